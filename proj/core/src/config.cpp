#include "sdpg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace sdpg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, int line, const std::string& key) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(line, key, "line " + std::to_string(line) + ": key '" + key +
                                     "': cannot parse '" + v + "' as a number");
  }
}

long parse_long(const std::string& v, int line, const std::string& key) {
  try {
    size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(line, key, "line " + std::to_string(line) + ": key '" + key +
                                     "': cannot parse '" + v + "' as an integer");
  }
}

bool parse_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(line, key, "line " + std::to_string(line) + ": key '" + key +
                                   "': cannot parse '" + v + "' as a boolean");
}

std::vector<int> parse_int_list(const std::string& v, int line, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<int>(parse_long(item, line, key)));
  }
  return out;
}

const std::vector<std::string> kSections = {"env", "rollout", "model", "optim", "exploration",
                                            "run"};

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(0, "", msg); };
  if (N < 1 || M < 1 || H < 1) fail("N, M, H must all be >= 1");
  if (N * (M + 1) > env_budget) fail("N*(M+1) exceeds env_budget");
  if (gamma < 0.0 || gamma >= 1.0) fail("gamma must be in [0,1)");
  if (lambda < 0.0 || lambda > 1.0) fail("lambda must be in [0,1]");
  if (rho < 0.0 || rho > 1.0) fail("rho must be in [0,1]");
  if (lr_actor <= 0 || lr_critic <= 0 || lr_exploration <= 0 || lr_temperature <= 0) {
    fail("learning rates must be positive");
  }
  if (delta_clip_lo >= delta_clip_hi) fail("delta clip range is empty");
  if (preact_clip_lo >= preact_clip_hi) fail("pre-activation clip range is empty");
  if (delta_init <= 0) fail("delta_init must be positive");
  if (temperature_init <= 0) fail("temperature_init must be positive");
  if (K_c < 0 || B < 1) fail("K_c must be >= 0 and B >= 1");
  if (max_grad_norm <= 0) fail("max_grad_norm must be positive");
  if (epochs < 0) fail("epochs must be >= 0");
  if (checkpoint_interval < 1) fail("checkpoint_interval must be >= 1");
  if (trace_mode != "causal" && trace_mode != "bootstrap") {
    fail("trace_mode must be 'causal' or 'bootstrap'");
  }
  if (actor_schedule != "cosine" && actor_schedule != "linear" && actor_schedule != "constant") {
    fail("actor_schedule must be cosine, linear, or constant");
  }
  if (critic_schedule != "cosine" && critic_schedule != "linear" &&
      critic_schedule != "constant") {
    fail("critic_schedule must be cosine, linear, or constant");
  }
  if (actor_hidden.empty() || critic_hidden.empty()) fail("network widths must be non-empty");
  if (conv_feature_dim < 1) fail("conv_feature_dim must be >= 1");
}

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  using Setter = std::function<void(const std::string&, int)>;
  const std::map<std::string, Setter> setters = {
      {"env_id", [&](const std::string& v, int l) {
         try {
           cfg.env_id = envs::env_from_name(v);
         } catch (const std::exception& e) {
           throw ConfigError(l, "env_id", "line " + std::to_string(l) + ": " + e.what());
         }
       }},
      {"obs_mode", [&](const std::string& v, int l) {
         try {
           cfg.obs_mode = envs::obs_mode_from_name(v);
         } catch (const std::exception& e) {
           throw ConfigError(l, "obs_mode", "line " + std::to_string(l) + ": " + e.what());
         }
       }},
      {"pixels_proprio", [&](const std::string& v, int l) { cfg.pixels_proprio = parse_bool(v, l, "pixels_proprio"); }},
      {"N", [&](const std::string& v, int l) { cfg.N = static_cast<int>(parse_long(v, l, "N")); }},
      {"M", [&](const std::string& v, int l) { cfg.M = static_cast<int>(parse_long(v, l, "M")); }},
      {"H", [&](const std::string& v, int l) { cfg.H = static_cast<int>(parse_long(v, l, "H")); }},
      {"gamma", [&](const std::string& v, int l) { cfg.gamma = parse_double(v, l, "gamma"); }},
      {"lambda", [&](const std::string& v, int l) { cfg.lambda = parse_double(v, l, "lambda"); }},
      {"trace_mode", [&](const std::string& v, int l) { cfg.trace_mode = v; }},
      {"env_budget", [&](const std::string& v, int l) { cfg.env_budget = static_cast<int>(parse_long(v, l, "env_budget")); }},
      {"actor_hidden", [&](const std::string& v, int l) { cfg.actor_hidden = parse_int_list(v, l, "actor_hidden"); }},
      {"critic_hidden", [&](const std::string& v, int l) { cfg.critic_hidden = parse_int_list(v, l, "critic_hidden"); }},
      {"conv_feature_dim", [&](const std::string& v, int l) { cfg.conv_feature_dim = static_cast<int>(parse_long(v, l, "conv_feature_dim")); }},
      {"lr_actor", [&](const std::string& v, int l) { cfg.lr_actor = parse_double(v, l, "lr_actor"); }},
      {"lr_critic", [&](const std::string& v, int l) { cfg.lr_critic = parse_double(v, l, "lr_critic"); }},
      {"lr_exploration", [&](const std::string& v, int l) { cfg.lr_exploration = parse_double(v, l, "lr_exploration"); }},
      {"lr_temperature", [&](const std::string& v, int l) { cfg.lr_temperature = parse_double(v, l, "lr_temperature"); }},
      {"actor_schedule", [&](const std::string& v, int l) { cfg.actor_schedule = v; }},
      {"actor_warmup_epochs", [&](const std::string& v, int l) { cfg.actor_warmup_epochs = static_cast<int>(parse_long(v, l, "actor_warmup_epochs")); }},
      {"actor_min_lr_frac", [&](const std::string& v, int l) { cfg.actor_min_lr_frac = parse_double(v, l, "actor_min_lr_frac"); }},
      {"critic_schedule", [&](const std::string& v, int l) { cfg.critic_schedule = v; }},
      {"critic_start_frac", [&](const std::string& v, int l) { cfg.critic_start_frac = parse_double(v, l, "critic_start_frac"); }},
      {"critic_end_frac", [&](const std::string& v, int l) { cfg.critic_end_frac = parse_double(v, l, "critic_end_frac"); }},
      {"max_grad_norm", [&](const std::string& v, int l) { cfg.max_grad_norm = parse_double(v, l, "max_grad_norm"); }},
      {"K_c", [&](const std::string& v, int l) { cfg.K_c = static_cast<int>(parse_long(v, l, "K_c")); }},
      {"B", [&](const std::string& v, int l) { cfg.B = static_cast<int>(parse_long(v, l, "B")); }},
      {"rho", [&](const std::string& v, int l) { cfg.rho = parse_double(v, l, "rho"); }},
      {"actor_entropy", [&](const std::string& v, int l) { cfg.actor_entropy = parse_bool(v, l, "actor_entropy"); }},
      {"soft_critic", [&](const std::string& v, int l) { cfg.soft_critic = parse_bool(v, l, "soft_critic"); }},
      {"auto_temperature", [&](const std::string& v, int l) { cfg.auto_temperature = parse_bool(v, l, "auto_temperature"); }},
      {"delta_target", [&](const std::string& v, int l) { cfg.delta_target = parse_double(v, l, "delta_target"); }},
      {"delta_init", [&](const std::string& v, int l) { cfg.delta_init = parse_double(v, l, "delta_init"); }},
      {"delta_clip_lo", [&](const std::string& v, int l) { cfg.delta_clip_lo = parse_double(v, l, "delta_clip_lo"); }},
      {"delta_clip_hi", [&](const std::string& v, int l) { cfg.delta_clip_hi = parse_double(v, l, "delta_clip_hi"); }},
      {"preact_clip_lo", [&](const std::string& v, int l) { cfg.preact_clip_lo = parse_double(v, l, "preact_clip_lo"); }},
      {"preact_clip_hi", [&](const std::string& v, int l) { cfg.preact_clip_hi = parse_double(v, l, "preact_clip_hi"); }},
      {"temperature_init", [&](const std::string& v, int l) { cfg.temperature_init = parse_double(v, l, "temperature_init"); }},
      {"epochs", [&](const std::string& v, int l) { cfg.epochs = static_cast<int>(parse_long(v, l, "epochs")); }},
      {"seed", [&](const std::string& v, int l) { cfg.seed = static_cast<uint64_t>(parse_long(v, l, "seed")); }},
      {"out_dir", [&](const std::string& v, int l) { cfg.out_dir = v; }},
      {"checkpoint_interval", [&](const std::string& v, int l) { cfg.checkpoint_interval = static_cast<int>(parse_long(v, l, "checkpoint_interval")); }},
      {"log_wall_time", [&](const std::string& v, int l) { cfg.log_wall_time = parse_bool(v, l, "log_wall_time"); }},
  };

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(line_no, "", "line " + std::to_string(line_no) + ": unterminated section header");
      }
      const std::string section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& s : kSections) known = known || s == section;
      if (!known) {
        throw ConfigError(line_no, section,
                          "line " + std::to_string(line_no) + ": unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line_no, "", "line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError(line_no, key,
                        "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    it->second(value, line_no);
  }
  cfg.validate();
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "", "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace sdpg
