#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdpg/envs.hpp"

namespace sdpg {

// Every knob of the training loop. Config files are flat key=value lines
// grouped under [section] headers; keys match these field names exactly and
// unknown keys are errors.
struct TrainConfig {
  // [env]
  envs::EnvId env_id = envs::EnvId::PointMass2D;
  envs::ObsMode obs_mode = envs::ObsMode::State;
  bool pixels_proprio = true;

  // [rollout]
  int N = 8;
  int M = 15;
  int H = 16;
  double gamma = 0.99;
  double lambda = 0.95;
  std::string trace_mode = "causal";  // causal | bootstrap
  int env_budget = 4096;

  // [model]
  std::vector<int> actor_hidden = {64, 64};
  std::vector<int> critic_hidden = {64, 64};
  int conv_feature_dim = 32;

  // [optim]
  double lr_actor = 2e-3;
  double lr_critic = 1e-3;
  double lr_exploration = 1e-2;
  double lr_temperature = 1e-2;
  std::string actor_schedule = "cosine";  // cosine | linear | constant
  int actor_warmup_epochs = 10;
  double actor_min_lr_frac = 0.01;
  std::string critic_schedule = "linear";
  double critic_start_frac = 1.0;
  double critic_end_frac = 0.1;
  double max_grad_norm = 1.0;
  int K_c = 2;
  int B = 256;
  double rho = 0.05;

  // [exploration]
  bool actor_entropy = true;
  bool soft_critic = false;
  bool auto_temperature = true;
  double delta_target = 0.15;
  double delta_init = 0.3;
  double delta_clip_lo = -5.0;
  double delta_clip_hi = 2.0;
  double preact_clip_lo = -2.0;
  double preact_clip_hi = 2.0;
  double temperature_init = 1e-2;

  // [run]
  int epochs = 300;
  uint64_t seed = 0;
  std::string out_dir = "out";
  int checkpoint_interval = 50;
  bool log_wall_time = false;

  void validate() const;
};

struct ConfigError : std::runtime_error {
  int line;
  std::string field;
  ConfigError(int line_, std::string field_, const std::string& what)
      : std::runtime_error(what), line(line_), field(std::move(field_)) {}
};

TrainConfig parse_config_text(const std::string& text);
TrainConfig parse_config_file(const std::string& path);

}  // namespace sdpg
