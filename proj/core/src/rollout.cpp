#include "sdpg/rollout.hpp"

#include <cmath>
#include <stdexcept>

#include "sdpg/parallel.hpp"
#include "sdpg/rng.hpp"

namespace sdpg::rollout {

void RolloutConfig::validate() const {
  if (nominal_count < 1) throw std::invalid_argument("RolloutConfig: N must be >= 1");
  if (aux_per_nominal < 1) throw std::invalid_argument("RolloutConfig: M must be >= 1");
  if (horizon < 1) throw std::invalid_argument("RolloutConfig: H must be >= 1");
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("RolloutConfig: gamma in [0,1)");
  if (lam < 0.0 || lam > 1.0) throw std::invalid_argument("RolloutConfig: lambda in [0,1]");
}

void GaussianPerturbations::sample(long epoch, int n, int j, int t, std::span<double> out) const {
  for (size_t k = 0; k < out.size(); ++k) {
    out[k] = rng::normal(rng::mix({seed_, 0xe5b, static_cast<uint64_t>(epoch),
                                   static_cast<uint64_t>(n), static_cast<uint64_t>(j),
                                   static_cast<uint64_t>(t), k}));
  }
}

void sync_auxiliaries(envs::EnvBatch& envs, const RolloutConfig& cfg) {
  const int group = cfg.group_size();
  for (int n = 0; n < cfg.nominal_count; ++n) {
    const int nominal = n * group;
    if (envs.needs_reset(nominal)) envs.reset(nominal);
    const envs::EnvState s = envs.snapshot(nominal);
    for (int j = 1; j <= cfg.aux_per_nominal; ++j) envs.restore(nominal + j, s);
  }
}

SegmentBuffer run_segment(envs::EnvBatch& envs, const RolloutConfig& cfg,
                          const PerturbationSource& perturbations, const SegmentParams& params) {
  cfg.validate();
  if (envs.count() != cfg.total_envs()) {
    throw std::invalid_argument("run_segment: env batch size does not match N*(M+1)");
  }
  const int N = cfg.nominal_count;
  const int M = cfg.aux_per_nominal;
  const int H = cfg.horizon;
  const int group = cfg.group_size();
  const int dim = envs.action_dim();

  SegmentBuffer buf;
  buf.nominal_count = N;
  buf.aux_per_nominal = M;
  buf.horizon = H;
  buf.action_dim = dim;
  const size_t slots = static_cast<size_t>(N) * group * H;
  buf.perturbation.assign(slots * dim, 0.0);
  buf.reward.assign(slots, 0.0);
  buf.boundary.assign(slots, 0);
  buf.value_next.assign(slots, 0.0);
  buf.priv_state = Matrix(static_cast<int>(slots), envs.privileged_dim());
  buf.mean_action = Matrix(N * H, dim);

  // Observation storage sized from a probe observation.
  {
    policy::ObsBatch proto;
    proto.mode = envs.obs_mode();
    if (proto.mode == envs::ObsMode::State) {
      proto.state = Matrix(0, envs.state_obs_dim());
    } else {
      proto.frames = Matrix(0, envs::kFrameStack * envs::kFramePixels);
      proto.proprio = Matrix(0, envs.proprio_dim());
    }
    buf.obs = policy::ObsBatch::with_rows(proto, N * H);
  }

  Matrix actions(cfg.total_envs(), dim);
  policy::ObsBatch step_obs = policy::ObsBatch::with_rows(buf.obs, N);

  for (int t = 0; t < H; ++t) {
    // Observations from the nominals only.
    for (int n = 0; n < N; ++n) {
      const auto o = envs.observe(n * group);
      step_obs.set_row(n, o);
      buf.obs.set_row(buf.obs_row(n, t), o);
    }
    const Matrix means = params.actor->forward(*params.theta, step_obs);
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < dim; ++k) buf.mean_action.at(buf.obs_row(n, t), k) = means.at(n, k);
    }

    // Perturbed pre-activations, squashed into env actions.
    std::vector<double> eps(dim);
    for (int n = 0; n < N; ++n) {
      for (int j = 0; j < group; ++j) {
        if (j == 0) {
          std::fill(eps.begin(), eps.end(), 0.0);
        } else {
          perturbations.sample(params.epoch, n, j, t, eps);
        }
        double* slot = buf.perturbation.data() + buf.idx(n, j, t) * dim;
        for (int k = 0; k < dim; ++k) {
          slot[k] = eps[k];
          const double u = means.at(n, k) + params.delta[k] * eps[k];
          const double clipped = std::min(params.preact_clip_hi, std::max(params.preact_clip_lo, u));
          actions.at(n * group + j, k) = std::tanh(clipped);
        }
      }
    }

    // Pre-step privileged states.
    for (int i = 0; i < cfg.total_envs(); ++i) {
      const auto s = envs.privileged(i);
      const int n = i / group;
      const int j = i % group;
      auto dst = buf.priv_state.row(static_cast<int>(buf.idx(n, j, t)));
      std::copy(s.begin(), s.end(), dst.begin());
    }

    std::vector<envs::StepResult> results = envs.step(actions, params.workers);

    // Batched target-critic values for all post-step states.
    Matrix next_states(cfg.total_envs(), envs.privileged_dim());
    for (int i = 0; i < cfg.total_envs(); ++i) {
      std::copy(results[i].privileged_state.begin(), results[i].privileged_state.end(),
                next_states.row(i).begin());
    }
    const std::vector<double> values =
        policy::critic_values(*params.phi_target, *params.critic_spec, next_states);

    for (int i = 0; i < cfg.total_envs(); ++i) {
      const int n = i / group;
      const int j = i % group;
      const size_t s = buf.idx(n, j, t);
      const auto& r = results[i];
      if (!std::isfinite(r.reward)) {
        throw std::runtime_error("run_segment: non-finite reward from env " + std::to_string(i) +
                                 " at step " + std::to_string(t));
      }
      buf.reward[s] = r.reward;
      buf.boundary[s] = r.terminated || r.truncated;
      buf.value_next[s] = r.terminated ? 0.0 : values[i];
    }

    // Reset handling. A nominal ending forces a fresh episode on its whole
    // group; an auxiliary ending alone inherits the live nominal state.
    for (int n = 0; n < N; ++n) {
      const int nominal = n * group;
      const auto& rn = results[nominal];
      if (rn.terminated || rn.truncated) {
        envs.reset(nominal);
        const envs::EnvState fresh = envs.snapshot(nominal);
        for (int j = 1; j <= M; ++j) {
          envs.restore(nominal + j, fresh);
          buf.boundary[buf.idx(n, j, t)] = 1;  // forced boundary for the group
        }
      } else {
        for (int j = 1; j <= M; ++j) {
          const auto& ra = results[nominal + j];
          if (ra.terminated || ra.truncated) {
            envs.restore(nominal + j, envs.snapshot(nominal));
          }
        }
      }
    }
  }
  return buf;
}

ReturnTable compute_returns(const SegmentBuffer& buffer, const RolloutConfig& cfg, TraceMode mode) {
  const int N = buffer.nominal_count;
  const int M = buffer.aux_per_nominal;
  const int H = buffer.horizon;
  const double lam = mode == TraceMode::Bootstrap ? 1.0 : cfg.lam;
  const double gamma = cfg.gamma;

  ReturnTable table;
  table.nominal_count = N;
  table.aux_per_nominal = M;
  table.horizon = H;
  table.values.assign(static_cast<size_t>(N) * (M + 1) * H, 0.0);

  for (int n = 0; n < N; ++n) {
    for (int j = 0; j <= M; ++j) {
      double next = 0.0;
      for (int t = H - 1; t >= 0; --t) {
        const size_t s = buffer.idx(n, j, t);
        double g;
        if (t == H - 1 || buffer.boundary[s]) {
          g = buffer.reward[s] + gamma * buffer.value_next[s];
        } else {
          g = buffer.reward[s] +
              gamma * ((1.0 - lam) * buffer.value_next[s] + lam * next);
        }
        table.values[s] = g;
        next = g;
      }
    }
  }
  return table;
}

ReturnTable critic_value_targets(const SegmentBuffer& buffer, const RolloutConfig& cfg) {
  return compute_returns(buffer, cfg, TraceMode::CausalTrace);
}

}  // namespace sdpg::rollout
