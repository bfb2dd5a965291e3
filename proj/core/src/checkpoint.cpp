#include "sdpg/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sdpg::ckpt {

namespace {

void write_doubles(std::ostream& out, const std::string& name, std::span<const double> v) {
  out << name << " " << v.size();
  char buf[48];
  for (double x : v) {
    std::snprintf(buf, sizeof(buf), " %a", x);
    out << buf;
  }
  out << "\n";
}

struct Reader {
  std::istream& in;
  int line_no = 0;

  std::vector<std::string> next_tokens() {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      std::vector<std::string> tokens;
      std::stringstream ss(line);
      std::string tok;
      while (ss >> tok) tokens.push_back(tok);
      if (!tokens.empty()) return tokens;
    }
    throw std::runtime_error("checkpoint: unexpected end of file");
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw std::runtime_error("checkpoint line " + std::to_string(line_no) + ": " + msg);
  }

  std::vector<std::string> expect(const std::string& name, size_t min_tokens) {
    auto t = next_tokens();
    if (t[0] != name) fail("expected '" + name + "', found '" + t[0] + "'");
    if (t.size() < min_tokens) fail("too few fields for '" + name + "'");
    return t;
  }

  double as_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') fail("bad number '" + s + "'");
    return v;
  }

  long as_long(const std::string& s) {
    try {
      return std::stol(s);
    } catch (const std::exception&) {
      fail("bad integer '" + s + "'");
    }
  }

  std::vector<double> read_doubles(const std::string& name) {
    auto t = expect(name, 2);
    const long n = as_long(t[1]);
    if (static_cast<long>(t.size()) != n + 2) fail("'" + name + "' count mismatch");
    std::vector<double> v(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) v[i] = as_double(t[i + 2]);
    return v;
  }
};

void write_mlp_spec(std::ostream& out, const std::string& name, const nn::MlpSpec& spec) {
  out << name << " " << spec.input_dim << " " << spec.hidden_widths.size();
  for (int h : spec.hidden_widths) out << " " << h;
  out << " " << spec.output_dim << " " << nn::activation_name(spec.activation) << "\n";
}

nn::MlpSpec read_mlp_spec(Reader& r, const std::string& name) {
  auto t = r.expect(name, 5);
  nn::MlpSpec spec;
  spec.input_dim = static_cast<int>(r.as_long(t[1]));
  const long nh = r.as_long(t[2]);
  if (static_cast<long>(t.size()) != nh + 5) r.fail("'" + name + "' width count mismatch");
  for (long i = 0; i < nh; ++i) spec.hidden_widths.push_back(static_cast<int>(r.as_long(t[3 + i])));
  spec.output_dim = static_cast<int>(r.as_long(t[3 + nh]));
  spec.activation = nn::activation_from_name(t[4 + nh]);
  return spec;
}

void write_adam(std::ostream& out, const std::string& name, const nn::AdamState& a) {
  char buf[48];
  out << name << " " << a.step;
  std::snprintf(buf, sizeof(buf), " %a", a.lr);
  out << buf;
  std::snprintf(buf, sizeof(buf), " %a", a.beta1);
  out << buf;
  std::snprintf(buf, sizeof(buf), " %a", a.beta2);
  out << buf;
  std::snprintf(buf, sizeof(buf), " %a", a.eps);
  out << buf << "\n";
  write_doubles(out, name + "_m", a.m);
  write_doubles(out, name + "_v", a.v);
}

nn::AdamState read_adam(Reader& r, const std::string& name) {
  auto t = r.expect(name, 6);
  nn::AdamState a;
  a.step = r.as_long(t[1]);
  a.lr = r.as_double(t[2]);
  a.beta1 = r.as_double(t[3]);
  a.beta2 = r.as_double(t[4]);
  a.eps = r.as_double(t[5]);
  a.m = r.read_doubles(name + "_m");
  a.v = r.read_doubles(name + "_v");
  return a;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint file for writing: " + path);
  char buf[48];
  out << kHeader << "\n";
  out << "env_id " << envs::env_name(c.env_id) << "\n";
  out << "obs_mode " << envs::obs_mode_name(c.obs_mode) << "\n";
  std::snprintf(buf, sizeof(buf), "%a", c.gamma);
  out << "gamma " << buf << "\n";
  out << "epoch " << c.epoch << "\n";
  out << "env_steps " << c.env_steps << "\n";

  write_mlp_spec(out, "actor_head", c.actor.head);
  if (c.actor.encoder) {
    const auto& e = *c.actor.encoder;
    out << "actor_conv " << e.in_channels << " " << e.in_height << " " << e.in_width << " "
        << e.layers.size();
    for (const auto& l : e.layers) out << " " << l.out_channels << " " << l.kernel << " " << l.stride;
    out << " " << e.feature_dim << " " << nn::activation_name(e.activation) << "\n";
  } else {
    out << "actor_conv none\n";
  }
  write_doubles(out, "theta", c.theta.span());
  write_adam(out, "adam_theta", c.adam_theta);

  write_mlp_spec(out, "critic", c.critic);
  write_doubles(out, "phi", c.phi.span());
  write_adam(out, "adam_phi", c.adam_phi);
  write_doubles(out, "phi_target", c.phi_target.span());

  write_doubles(out, "log_std", c.log_std);
  write_doubles(out, "log_temperature", {&c.log_temperature, 1});
  write_doubles(out, "target_std", {&c.target_std, 1});
  const double ls_clip[2] = {c.log_std_clip_lo, c.log_std_clip_hi};
  write_doubles(out, "log_std_clip", ls_clip);
  const double pa_clip[2] = {c.preact_clip_lo, c.preact_clip_hi};
  write_doubles(out, "preact_clip", pa_clip);
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  Reader r{in};

  {
    auto t = r.next_tokens();
    if (t[0] != kHeader) {
      throw std::runtime_error("not a " + std::string(kHeader) + " checkpoint: " + path);
    }
  }
  Checkpoint c;
  c.env_id = envs::env_from_name(r.expect("env_id", 2)[1]);
  c.obs_mode = envs::obs_mode_from_name(r.expect("obs_mode", 2)[1]);
  c.gamma = r.as_double(r.expect("gamma", 2)[1]);
  c.epoch = r.as_long(r.expect("epoch", 2)[1]);
  c.env_steps = r.as_long(r.expect("env_steps", 2)[1]);

  c.actor.mode = c.obs_mode;
  c.actor.head = read_mlp_spec(r, "actor_head");
  {
    auto t = r.expect("actor_conv", 2);
    if (t[1] != "none") {
      if (t.size() < 5) r.fail("bad actor_conv record");
      nn::ConvSpec e;
      e.in_channels = static_cast<int>(r.as_long(t[1]));
      e.in_height = static_cast<int>(r.as_long(t[2]));
      e.in_width = static_cast<int>(r.as_long(t[3]));
      const long nl = r.as_long(t[4]);
      if (static_cast<long>(t.size()) != 5 + 3 * nl + 2) r.fail("bad actor_conv layer list");
      for (long i = 0; i < nl; ++i) {
        nn::ConvLayerSpec l;
        l.out_channels = static_cast<int>(r.as_long(t[5 + 3 * i]));
        l.kernel = static_cast<int>(r.as_long(t[6 + 3 * i]));
        l.stride = static_cast<int>(r.as_long(t[7 + 3 * i]));
        e.layers.push_back(l);
      }
      e.feature_dim = static_cast<int>(r.as_long(t[5 + 3 * nl]));
      e.activation = nn::activation_from_name(t[6 + 3 * nl]);
      c.actor.encoder = e;
    }
  }
  c.theta.values = r.read_doubles("theta");
  c.adam_theta = read_adam(r, "adam_theta");

  c.critic = read_mlp_spec(r, "critic");
  c.phi.values = r.read_doubles("phi");
  c.adam_phi = read_adam(r, "adam_phi");
  c.phi_target.values = r.read_doubles("phi_target");

  c.log_std = r.read_doubles("log_std");
  c.log_temperature = r.read_doubles("log_temperature").at(0);
  c.target_std = r.read_doubles("target_std").at(0);
  {
    const auto v = r.read_doubles("log_std_clip");
    c.log_std_clip_lo = v.at(0);
    c.log_std_clip_hi = v.at(1);
  }
  {
    const auto v = r.read_doubles("preact_clip");
    c.preact_clip_lo = v.at(0);
    c.preact_clip_hi = v.at(1);
  }

  if (c.theta.size() != c.actor.param_count()) {
    throw std::runtime_error("checkpoint: actor parameter count does not match its spec");
  }
  if (c.phi.size() != c.critic.param_count() || c.phi_target.size() != c.critic.param_count()) {
    throw std::runtime_error("checkpoint: critic parameter count does not match its spec");
  }
  return c;
}

}  // namespace sdpg::ckpt
