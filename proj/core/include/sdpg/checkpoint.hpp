#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdpg/envs.hpp"
#include "sdpg/nn.hpp"
#include "sdpg/policy.hpp"

namespace sdpg::ckpt {

inline constexpr const char* kHeader = "SDPG-CKPT-v1";

// Complete trainer state. Serialized as a line-oriented text record with
// hexfloat values, so save/load round-trips bit-exactly.
struct Checkpoint {
  envs::EnvId env_id = envs::EnvId::PointMass2D;
  envs::ObsMode obs_mode = envs::ObsMode::State;
  double gamma = 0.99;
  long epoch = 0;
  long env_steps = 0;

  policy::ActorNet actor;
  nn::ParamVector theta;
  nn::AdamState adam_theta;

  nn::MlpSpec critic;
  nn::ParamVector phi;
  nn::AdamState adam_phi;
  nn::ParamVector phi_target;

  std::vector<double> log_std;
  double log_temperature = 0.0;
  double target_std = 0.15;
  double log_std_clip_lo = -5.0;
  double log_std_clip_hi = 2.0;
  double preact_clip_lo = -2.0;
  double preact_clip_hi = 2.0;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sdpg::ckpt
