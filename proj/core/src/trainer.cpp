#include "sdpg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "sdpg/rng.hpp"

namespace sdpg::train {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nn::LrSchedule make_schedule(const std::string& kind, int total_epochs, int warmup,
                             double min_frac, double start_frac, double end_frac) {
  nn::LrSchedule s;
  s.total_epochs = std::max(1, total_epochs);
  if (kind == "cosine") {
    s.kind = nn::LrSchedule::Kind::CosineWithWarmup;
    s.warmup_epochs = warmup;
    s.min_multiplier = min_frac;
  } else if (kind == "linear") {
    s.kind = nn::LrSchedule::Kind::LinearDecay;
    s.start_frac = start_frac;
    s.end_frac = end_frac;
  } else {
    s.kind = nn::LrSchedule::Kind::Constant;
  }
  s.validate();
  return s;
}

}  // namespace

std::string metrics_header() {
  return "epoch,env_steps,mean_nominal_return,mean_aux_return,mean_sigma,mean_exp_delta,"
         "actor_loss,critic_loss,temperature,lr_actor,lr_critic,wall_time_s";
}

std::string metrics_csv_row(const MetricsRow& r) {
  std::string out = std::to_string(r.epoch) + "," + std::to_string(r.env_steps);
  for (double v : {r.mean_nominal_return, r.mean_aux_return, r.mean_sigma, r.mean_exp_delta,
                   r.actor_loss, r.critic_loss, r.temperature, r.lr_actor, r.lr_critic,
                   r.wall_time_s}) {
    out += "," + fmt(v);
  }
  return out;
}

Trainer::Trainer(const TrainConfig& cfg, int workers)
    : cfg_(cfg),
      workers_(std::max(1, workers)),
      envs_(cfg.env_id, cfg.N * (cfg.M + 1), cfg.obs_mode, rng::mix(cfg.seed, 0xe2f)),
      perturbations_(rng::mix(cfg.seed, 0x9e27)) {
  cfg_.validate();
  rcfg_.nominal_count = cfg_.N;
  rcfg_.aux_per_nominal = cfg_.M;
  rcfg_.horizon = cfg_.H;
  rcfg_.gamma = cfg_.gamma;
  rcfg_.lam = cfg_.lambda;
  rcfg_.validate();

  const int proprio = cfg_.pixels_proprio ? envs_.proprio_dim() : 0;
  actor_ = policy::ActorNet::make(cfg_.obs_mode, envs_.state_obs_dim(), proprio,
                                  envs_.action_dim(), cfg_.actor_hidden, cfg_.conv_feature_dim);
  critic_spec_ = policy::make_critic_spec(envs_.privileged_dim(), cfg_.critic_hidden);

  theta_ = actor_.init_params(rng::mix(cfg_.seed, 0x7e7a));
  phi_ = nn::init_mlp_params(critic_spec_, rng::mix(cfg_.seed, 0xbd1));
  phi_target_ = phi_;
  adam_theta_ = nn::AdamState::make(theta_.size(), cfg_.lr_actor);
  adam_phi_ = nn::AdamState::make(phi_.size(), cfg_.lr_critic);

  expl_ = update::ExplorationState::make(envs_.action_dim(), cfg_.delta_init,
                                         cfg_.temperature_init, cfg_.delta_target);
  expl_.log_std_min = cfg_.delta_clip_lo;
  expl_.log_std_max = cfg_.delta_clip_hi;

  actor_sched_ = make_schedule(cfg_.actor_schedule, cfg_.epochs, cfg_.actor_warmup_epochs,
                               cfg_.actor_min_lr_frac, 1.0, 1.0);
  critic_sched_ = make_schedule(cfg_.critic_schedule, cfg_.epochs, 0, 1.0, cfg_.critic_start_frac,
                                cfg_.critic_end_frac);

  if (cfg_.obs_mode == envs::ObsMode::Pixels) {
    std::vector<int> nominals;
    for (int n = 0; n < cfg_.N; ++n) nominals.push_back(n * (cfg_.M + 1));
    envs_.set_render_enabled(nominals);
  }
}

MetricsRow Trainer::epoch_step() {
  const auto t_start = std::chrono::steady_clock::now();

  rollout::sync_auxiliaries(envs_, rcfg_);

  rollout::SegmentParams params;
  params.actor = &actor_;
  params.theta = &theta_;
  const std::vector<double> delta = expl_.std();
  params.delta = delta;
  params.critic_spec = &critic_spec_;
  params.phi_target = &phi_target_;
  params.preact_clip_lo = cfg_.preact_clip_lo;
  params.preact_clip_hi = cfg_.preact_clip_hi;
  params.epoch = epoch_;
  params.workers = workers_;

  rollout::SegmentBuffer buffer = rollout::run_segment(envs_, rcfg_, perturbations_, params);

  if (cfg_.soft_critic) {
    const double alpha = cfg_.actor_entropy ? expl_.temperature() : 0.0;
    const double log_target = std::log(cfg_.delta_target);
    for (double& r : buffer.reward) {
      r = update::soft_critic_reward(r, expl_.log_std, log_target, alpha);
    }
  }

  const rollout::TraceMode mode = cfg_.trace_mode == "bootstrap"
                                      ? rollout::TraceMode::Bootstrap
                                      : rollout::TraceMode::CausalTrace;
  const rollout::ReturnTable returns = rollout::compute_returns(buffer, rcfg_, mode);
  const update::DeltaJTable delta_j = update::normalize_delta_j(returns);

  update::ActorTargets targets;
  targets.action = update::actor_target(buffer, delta_j, cfg_.preact_clip_lo, cfg_.preact_clip_hi);
  targets.log_std_target = update::exploration_target(buffer, delta_j, expl_.log_std);

  const double alpha = cfg_.actor_entropy ? expl_.temperature() : 0.0;
  update::ActorLossResult loss =
      update::actor_exploration_loss(actor_, theta_, buffer.obs, targets, expl_.log_std, alpha);

  const double actor_mult = actor_sched_.multiplier(static_cast<int>(epoch_));
  nn::adam_step(adam_theta_, theta_, loss.theta_grad, cfg_.max_grad_norm, actor_mult);
  for (size_t k = 0; k < expl_.log_std.size(); ++k) {
    expl_.log_std[k] -= cfg_.lr_exploration * loss.log_std_grad[k];
  }
  expl_.clip_log_std();

  if (cfg_.actor_entropy && cfg_.auto_temperature) {
    expl_.log_temperature = update::temperature_update(expl_.log_temperature, expl_.log_std,
                                                       cfg_.delta_target, cfg_.lr_temperature);
  }

  const rollout::ReturnTable vtargets = rollout::critic_value_targets(buffer, rcfg_);
  const double critic_mult = critic_sched_.multiplier(static_cast<int>(epoch_));
  const update::CriticUpdateStats cstats = update::critic_update(
      critic_spec_, phi_, adam_phi_, buffer.priv_state, vtargets.values, cfg_.B, cfg_.K_c,
      critic_mult, cfg_.max_grad_norm, rng::mix({cfg_.seed, 0xc5, static_cast<uint64_t>(epoch_)}),
      workers_);

  update::polyak_update(phi_target_, phi_, cfg_.rho);

  epoch_ += 1;
  env_steps_ += static_cast<long>(cfg_.N) * (cfg_.M + 1) * cfg_.H;
  train_time_s_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  MetricsRow row;
  row.epoch = epoch_;
  row.env_steps = env_steps_;
  double nominal = 0.0, aux = 0.0;
  for (int n = 0; n < cfg_.N; ++n) {
    for (int j = 0; j <= cfg_.M; ++j) {
      double sum = 0.0;
      for (int t = 0; t < cfg_.H; ++t) sum += buffer.reward[buffer.idx(n, j, t)];
      if (j == 0) {
        nominal += sum;
      } else {
        aux += sum;
      }
    }
  }
  row.mean_nominal_return = nominal / cfg_.N;
  row.mean_aux_return = aux / (static_cast<double>(cfg_.N) * cfg_.M);
  double sig = 0.0;
  for (double s : delta_j.sigma) sig += s;
  row.mean_sigma = sig / static_cast<double>(delta_j.sigma.size());
  double ed = 0.0;
  for (double ls : expl_.log_std) ed += std::exp(ls);
  row.mean_exp_delta = ed / static_cast<double>(expl_.log_std.size());
  row.actor_loss = loss.total;
  row.critic_loss = cstats.mean_loss;
  row.temperature = expl_.temperature();
  row.lr_actor = cfg_.lr_actor * actor_mult;
  row.lr_critic = cfg_.lr_critic * critic_mult;
  row.wall_time_s = cfg_.log_wall_time ? train_time_s_ : 0.0;
  return row;
}

ckpt::Checkpoint Trainer::make_checkpoint() const {
  ckpt::Checkpoint c;
  c.env_id = cfg_.env_id;
  c.obs_mode = cfg_.obs_mode;
  c.gamma = cfg_.gamma;
  c.epoch = epoch_;
  c.env_steps = env_steps_;
  c.actor = actor_;
  c.theta = theta_;
  c.adam_theta = adam_theta_;
  c.critic = critic_spec_;
  c.phi = phi_;
  c.adam_phi = adam_phi_;
  c.phi_target = phi_target_;
  c.log_std = expl_.log_std;
  c.log_temperature = expl_.log_temperature;
  c.target_std = expl_.target_std;
  c.log_std_clip_lo = expl_.log_std_min;
  c.log_std_clip_hi = expl_.log_std_max;
  c.preact_clip_lo = cfg_.preact_clip_lo;
  c.preact_clip_hi = cfg_.preact_clip_hi;
  return c;
}

void Trainer::restore(const ckpt::Checkpoint& c) {
  if (c.env_id != cfg_.env_id || c.obs_mode != cfg_.obs_mode) {
    throw std::runtime_error("Trainer::restore: checkpoint env/obs mode mismatch");
  }
  if (c.theta.size() != theta_.size() || c.phi.size() != phi_.size()) {
    throw std::runtime_error("Trainer::restore: checkpoint network shape mismatch");
  }
  theta_ = c.theta;
  adam_theta_ = c.adam_theta;
  phi_ = c.phi;
  adam_phi_ = c.adam_phi;
  phi_target_ = c.phi_target;
  expl_.log_std = c.log_std;
  expl_.log_temperature = c.log_temperature;
  expl_.target_std = c.target_std;
  epoch_ = c.epoch;
  env_steps_ = c.env_steps;
}

void Trainer::run() {
  namespace fs = std::filesystem;
  fs::create_directories(cfg_.out_dir);
  const std::string metrics_path = cfg_.out_dir + "/metrics.csv";
  std::ofstream metrics(metrics_path);
  if (!metrics) throw std::runtime_error("cannot open " + metrics_path);
  metrics << metrics_header() << "\n";
  metrics.flush();

  for (int e = 0; e < cfg_.epochs; ++e) {
    MetricsRow row;
    try {
      row = epoch_step();
    } catch (const std::exception& err) {
      throw std::runtime_error("epoch " + std::to_string(e) + ": " + err.what());
    }
    metrics << metrics_csv_row(row) << "\n";
    metrics.flush();
    if (cfg_.checkpoint_interval > 0 && (e + 1) % cfg_.checkpoint_interval == 0 &&
        e + 1 < cfg_.epochs) {
      char name[64];
      std::snprintf(name, sizeof(name), "/checkpoint_%06d.sdpg", e + 1);
      ckpt::save_checkpoint(make_checkpoint(), cfg_.out_dir + name);
    }
  }
  ckpt::save_checkpoint(make_checkpoint(), cfg_.out_dir + "/checkpoint_final.sdpg");
}

EvalResult evaluate_policy(const ckpt::Checkpoint& c, int episodes, uint64_t seed) {
  EvalResult out;
  for (int e = 0; e < episodes; ++e) {
    envs::EnvBatch env(c.env_id, 1, c.obs_mode, rng::mix({seed, 0xeba1, static_cast<uint64_t>(e)}));
    policy::ObsBatch obs;
    obs.mode = c.obs_mode;
    if (c.obs_mode == envs::ObsMode::State) {
      obs.state = Matrix(1, env.state_obs_dim());
    } else {
      obs.frames = Matrix(1, envs::kFrameStack * envs::kFramePixels);
      obs.proprio = Matrix(1, c.actor.head.input_dim - c.actor.encoder->feature_dim);
    }
    double ret = 0.0;
    double disc = 1.0;
    int steps = 0;
    bool terminated = false;
    Matrix actions(1, env.action_dim());
    for (int t = 0; t < envs::kMaxEpisodeLen; ++t) {
      obs.set_row(0, env.observe(0));
      const Matrix mean = c.actor.forward(c.theta, obs);
      for (int k = 0; k < env.action_dim(); ++k) {
        actions.at(0, k) = update::squash_scalar(mean.at(0, k), c.preact_clip_lo, c.preact_clip_hi);
      }
      const auto res = env.step(actions);
      ret += disc * res[0].reward;
      disc *= c.gamma;
      steps += 1;
      if (res[0].terminated) {
        terminated = true;
        break;
      }
      if (res[0].truncated) break;
    }
    const auto final_state = env.snapshot(0);
    double metric = 0.0;
    bool success = false;
    switch (c.env_id) {
      case envs::EnvId::PointMass2D:
        metric = std::hypot(final_state.phys[0], final_state.phys[1]);
        success = metric < 0.2;
        break;
      case envs::EnvId::PendulumSwingUp:
        metric = std::cos(final_state.phys[0]);
        success = metric > 0.9;
        break;
      case envs::EnvId::CartPole:
        metric = steps;
        success = !terminated && steps >= envs::kMaxEpisodeLen;
        break;
    }
    out.returns.push_back(ret);
    out.final_metric.push_back(metric);
    out.lengths.push_back(steps);
    out.success.push_back(success ? 1 : 0);
  }
  double mean = 0.0;
  for (double r : out.returns) mean += r;
  mean /= std::max<size_t>(1, out.returns.size());
  double var = 0.0;
  for (double r : out.returns) var += (r - mean) * (r - mean);
  out.mean_return = mean;
  out.std_return = out.returns.empty() ? 0.0 : std::sqrt(var / out.returns.size());
  double succ = 0.0;
  for (uint8_t s : out.success) succ += s;
  out.success_rate = out.success.empty() ? 0.0 : succ / out.success.size();
  return out;
}

void write_eval_csv(const EvalResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "episode,return,length,success,final_metric\n";
  for (size_t e = 0; e < r.returns.size(); ++e) {
    out << e << "," << fmt(r.returns[e]) << "," << r.lengths[e] << ","
        << static_cast<int>(r.success[e]) << "," << fmt(r.final_metric[e]) << "\n";
  }
}

}  // namespace sdpg::train
