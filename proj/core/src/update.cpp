#include "sdpg/update.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sdpg/parallel.hpp"
#include "sdpg/rng.hpp"

namespace sdpg::update {

std::vector<double> ExplorationState::std() const {
  std::vector<double> s(log_std.size());
  for (size_t i = 0; i < log_std.size(); ++i) s[i] = std::exp(log_std[i]);
  return s;
}

double ExplorationState::temperature() const { return std::exp(log_temperature); }

void ExplorationState::clip_log_std() {
  for (double& v : log_std) v = std::min(log_std_max, std::max(log_std_min, v));
}

ExplorationState ExplorationState::make(int action_dim, double init_std, double init_temperature,
                                        double target) {
  ExplorationState e;
  e.log_std.assign(static_cast<size_t>(action_dim), std::log(init_std));
  e.log_temperature = std::log(init_temperature);
  e.target_std = target;
  return e;
}

double squash_scalar(double pre, double lo, double hi) {
  return std::tanh(std::min(hi, std::max(lo, pre)));
}

std::vector<double> squash_action(std::span<const double> pre, double lo, double hi) {
  std::vector<double> out(pre.size());
  for (size_t i = 0; i < pre.size(); ++i) out[i] = squash_scalar(pre[i], lo, hi);
  return out;
}

DeltaJTable normalize_delta_j(const rollout::ReturnTable& returns, double sigma_floor) {
  const int N = returns.nominal_count;
  const int M = returns.aux_per_nominal;
  const int H = returns.horizon;
  DeltaJTable d;
  d.nominal_count = N;
  d.aux_per_nominal = M;
  d.horizon = H;
  d.values.assign(returns.values.size(), 0.0);
  d.sigma.assign(static_cast<size_t>(N) * H, 0.0);

  for (int n = 0; n < N; ++n) {
    for (int t = 0; t < H; ++t) {
      const double nominal = returns.at(n, 0, t);
      double mean = 0.0;
      for (int j = 0; j <= M; ++j) {
        const double dj = returns.at(n, j, t) - nominal;
        d.values[d.idx(n, j, t)] = dj;
        mean += dj;
      }
      mean /= (M + 1);
      double var = 0.0;
      for (int j = 0; j <= M; ++j) {
        const double c = d.values[d.idx(n, j, t)] - mean;
        var += c * c;
      }
      const double sigma = std::sqrt(var / (M + 1));
      d.sigma[static_cast<size_t>(n) * H + t] = sigma;
      const double denom = std::max(sigma, sigma_floor);
      for (int j = 0; j <= M; ++j) d.values[d.idx(n, j, t)] /= denom;
    }
  }
  return d;
}

Matrix actor_target(const rollout::SegmentBuffer& buffer, const DeltaJTable& delta_j,
                    double clip_lo, double clip_hi) {
  const int N = buffer.nominal_count;
  const int M = buffer.aux_per_nominal;
  const int H = buffer.horizon;
  const int dim = buffer.action_dim;
  Matrix target = buffer.mean_action;
  for (int n = 0; n < N; ++n) {
    for (int t = 0; t < H; ++t) {
      double* row = target.row(buffer.obs_row(n, t)).data();
      for (int j = 0; j <= M; ++j) {
        const double dj = delta_j.at(n, j, t);
        const auto eps = buffer.perturbation_at(n, j, t);
        for (int k = 0; k < dim; ++k) row[k] += dj * eps[k] / (M + 1);
      }
      for (int k = 0; k < dim; ++k) row[k] = std::min(clip_hi, std::max(clip_lo, row[k]));
    }
  }
  return target;
}

std::vector<double> exploration_target(const rollout::SegmentBuffer& buffer,
                                       const DeltaJTable& delta_j,
                                       std::span<const double> log_std) {
  const int N = buffer.nominal_count;
  const int M = buffer.aux_per_nominal;
  const int H = buffer.horizon;
  const int dim = buffer.action_dim;
  std::vector<double> ascent(static_cast<size_t>(dim), 0.0);
  for (int n = 0; n < N; ++n) {
    for (int t = 0; t < H; ++t) {
      for (int j = 0; j <= M; ++j) {
        const double dj = delta_j.at(n, j, t);
        const auto eps = buffer.perturbation_at(n, j, t);
        for (int k = 0; k < dim; ++k) {
          ascent[k] += dj * (eps[k] * eps[k] - 1.0) * std::exp(log_std[k]) / (M + 1);
        }
      }
    }
  }
  std::vector<double> target(log_std.begin(), log_std.end());
  for (int k = 0; k < dim; ++k) target[k] += ascent[k] / (static_cast<double>(N) * H);
  return target;
}

ActorLossResult actor_exploration_loss(const policy::ActorNet& actor, const nn::ParamVector& theta,
                                       const policy::ObsBatch& obs, const ActorTargets& targets,
                                       std::span<const double> log_std, double alpha) {
  const int rows = obs.rows();
  const int dim = actor.action_dim();
  if (targets.action.rows != rows || targets.action.cols != dim) {
    throw std::invalid_argument("actor_exploration_loss: target shape mismatch");
  }

  const Matrix means = actor.forward(theta, obs);
  Matrix upstream(rows, dim);
  double bc = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < dim; ++k) {
      const double diff = means.at(r, k) - targets.action.at(r, k);
      bc += diff * diff;
      upstream.at(r, k) = 2.0 * diff / rows;
    }
  }
  bc /= rows;

  ActorLossResult res;
  res.bc_loss = bc;
  res.theta_grad = actor.backward(theta, obs, upstream);

  const int d = static_cast<int>(log_std.size());
  res.log_std_grad.assign(static_cast<size_t>(d), 0.0);
  double expl = 0.0;
  double mean_log_std = 0.0;
  for (int k = 0; k < d; ++k) {
    const double diff = log_std[k] - targets.log_std_target[k];
    expl += diff * diff;
    mean_log_std += log_std[k] / d;
    res.log_std_grad[k] = 2.0 * diff - alpha / d;
  }
  res.exploration_loss = expl;
  res.entropy_term = -alpha * mean_log_std;
  res.total = res.bc_loss + res.exploration_loss + res.entropy_term;
  return res;
}

double temperature_loss(double log_temperature, std::span<const double> log_std,
                        double target_std) {
  double gap = 0.0;
  for (double ls : log_std) gap += std::exp(ls) - target_std;
  return std::exp(log_temperature) * gap / static_cast<double>(log_std.size());
}

double temperature_update(double log_temperature, std::span<const double> log_std,
                          double target_std, double lr) {
  // dL/d(log alpha) equals the loss itself since L = exp(log alpha) * gap.
  const double grad = temperature_loss(log_temperature, log_std, target_std);
  return log_temperature - lr * grad;
}

double soft_critic_reward(double reward, std::span<const double> log_std, double log_std_target,
                          double alpha) {
  double gap = 0.0;
  for (double ls : log_std) gap += ls - log_std_target;
  return reward + alpha * gap / static_cast<double>(log_std.size());
}

namespace {

// Deterministic chunked parameter gradient: chunk boundaries are fixed, so
// the sequential reduction is identical for every worker count.
nn::ParamVector chunked_param_grad(const nn::MlpSpec& spec, const nn::ParamVector& params,
                                   const Matrix& inputs, const Matrix& upstream, int workers) {
  constexpr int kChunk = 64;
  const int n_chunks = (inputs.rows + kChunk - 1) / kChunk;
  std::vector<nn::ParamVector> partial(n_chunks);
  parallel_chunks(inputs.rows, kChunk, workers, [&](int begin, int end) {
    Matrix in(end - begin, inputs.cols);
    Matrix up(end - begin, upstream.cols);
    for (int r = begin; r < end; ++r) {
      std::copy(inputs.row(r).begin(), inputs.row(r).end(), in.row(r - begin).begin());
      std::copy(upstream.row(r).begin(), upstream.row(r).end(), up.row(r - begin).begin());
    }
    partial[begin / kChunk] = nn::mlp_backward(params, spec, in, up).param_grad;
  });
  nn::ParamVector grad(spec.param_count());
  for (const auto& p : partial) {
    for (size_t i = 0; i < grad.values.size(); ++i) grad.values[i] += p.values[i];
  }
  return grad;
}

}  // namespace

CriticUpdateStats critic_update(const nn::MlpSpec& spec, nn::ParamVector& phi,
                                nn::AdamState& adam, const Matrix& states,
                                std::span<const double> targets, int batch_size, int iters,
                                double lr_multiplier, double max_norm, uint64_t shuffle_key,
                                int workers) {
  const int n = states.rows;
  if (static_cast<int>(targets.size()) != n) {
    throw std::invalid_argument("critic_update: target count mismatch");
  }
  for (double t : targets) {
    if (!std::isfinite(t)) throw std::runtime_error("critic_update: non-finite target");
  }
  const int bs = std::min(batch_size, n);

  CriticUpdateStats stats;
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  double loss_sum = 0.0;
  for (int pass = 0; pass < iters; ++pass) {
    rng::Stream shuffle(rng::mix({shuffle_key, 0x5b0f, static_cast<uint64_t>(pass)}));
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle.below(static_cast<uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
    for (int start = 0; start < n; start += bs) {
      const int count = std::min(bs, n - start);
      Matrix batch(count, states.cols);
      std::vector<double> batch_targets(static_cast<size_t>(count));
      for (int r = 0; r < count; ++r) {
        const int src = order[start + r];
        std::copy(states.row(src).begin(), states.row(src).end(), batch.row(r).begin());
        batch_targets[r] = targets[src];
      }
      const std::vector<double> values = policy::critic_values(phi, spec, batch);
      Matrix upstream(count, 1);
      double loss = 0.0;
      for (int r = 0; r < count; ++r) {
        const double diff = values[r] - batch_targets[r];
        loss += diff * diff;
        upstream.at(r, 0) = 2.0 * diff / count;
      }
      loss /= count;
      if (!std::isfinite(loss)) {
        throw std::runtime_error("critic_update: non-finite loss in minibatch");
      }
      const nn::ParamVector grad = chunked_param_grad(spec, phi, batch, upstream, workers);
      nn::adam_step(adam, phi, grad, max_norm, lr_multiplier);
      loss_sum += loss;
      stats.minibatches += 1;
    }
  }
  stats.mean_loss = stats.minibatches > 0 ? loss_sum / stats.minibatches : 0.0;
  return stats;
}

void polyak_update(nn::ParamVector& target, const nn::ParamVector& source, double rho) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("polyak_update: rho must be in [0,1]");
  if (target.size() != source.size()) {
    throw std::invalid_argument("polyak_update: size mismatch");
  }
  for (size_t i = 0; i < target.values.size(); ++i) {
    target.values[i] = rho * target.values[i] + (1.0 - rho) * source.values[i];
  }
}

}  // namespace sdpg::update
