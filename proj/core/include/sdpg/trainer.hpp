#pragma once

#include <string>
#include <vector>

#include "sdpg/checkpoint.hpp"
#include "sdpg/config.hpp"
#include "sdpg/envs.hpp"
#include "sdpg/nn.hpp"
#include "sdpg/policy.hpp"
#include "sdpg/rollout.hpp"
#include "sdpg/update.hpp"

namespace sdpg::train {

struct MetricsRow {
  long epoch = 0;
  long env_steps = 0;
  double mean_nominal_return = 0.0;
  double mean_aux_return = 0.0;
  double mean_sigma = 0.0;
  double mean_exp_delta = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double temperature = 0.0;
  double lr_actor = 0.0;
  double lr_critic = 0.0;
  double wall_time_s = 0.0;
};

std::string metrics_header();
std::string metrics_csv_row(const MetricsRow& row);

// The training loop: rollout segment, TD(lambda) returns, actor targets,
// actor/exploration step, temperature step, critic passes, Polyak update.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg, int workers = 1);

  // Full run with metrics.csv and checkpoints written under cfg.out_dir.
  void run();

  // One epoch without file output; exposed for tests.
  MetricsRow epoch_step();

  ckpt::Checkpoint make_checkpoint() const;
  void restore(const ckpt::Checkpoint& c);

  const TrainConfig& config() const { return cfg_; }
  long epoch() const { return epoch_; }
  const update::ExplorationState& exploration() const { return expl_; }
  const nn::ParamVector& theta() const { return theta_; }

 private:
  TrainConfig cfg_;
  int workers_;
  rollout::RolloutConfig rcfg_;
  policy::ActorNet actor_;
  nn::MlpSpec critic_spec_;
  nn::ParamVector theta_, phi_, phi_target_;
  nn::AdamState adam_theta_, adam_phi_;
  update::ExplorationState expl_;
  nn::LrSchedule actor_sched_, critic_sched_;
  envs::EnvBatch envs_;
  rollout::GaussianPerturbations perturbations_;
  long epoch_ = 0;
  long env_steps_ = 0;
  double train_time_s_ = 0.0;
};

struct EvalResult {
  double mean_return = 0.0;
  double std_return = 0.0;
  double success_rate = 0.0;
  std::vector<double> returns;       // per episode, discounted
  std::vector<double> final_metric;  // per episode: goal distance / cos(theta) / steps survived
  std::vector<int> lengths;
  std::vector<uint8_t> success;
};

// Deterministic rollouts with the mean action (zero exploration).
EvalResult evaluate_policy(const ckpt::Checkpoint& c, int episodes, uint64_t seed);

void write_eval_csv(const EvalResult& r, const std::string& path);

}  // namespace sdpg::train
