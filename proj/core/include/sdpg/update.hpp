#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdpg/matrix.hpp"
#include "sdpg/nn.hpp"
#include "sdpg/policy.hpp"
#include "sdpg/rollout.hpp"

namespace sdpg::update {

// Learnable exploration: per-action-dimension log std plus the entropy
// temperature in log space.
struct ExplorationState {
  std::vector<double> log_std;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  double log_temperature = 0.0;
  double target_std = 0.15;

  std::vector<double> std() const;
  double temperature() const;
  void clip_log_std();

  static ExplorationState make(int action_dim, double init_std, double init_temperature,
                               double target_std);
};

struct ActorTargets {
  Matrix action;                        // per (n,t), pre-activation space
  std::vector<double> log_std_target;   // one vector, action_dim
};

struct SdpgLosses {
  double actor_bc_loss = 0.0;
  double exploration_loss = 0.0;
  double entropy_term = 0.0;
  double temperature_loss = 0.0;
  double critic_loss = 0.0;
};

// tanh of the clamped pre-activation.
double squash_scalar(double pre, double lo, double hi);
std::vector<double> squash_action(std::span<const double> pre, double lo, double hi);

// Return differences against the nominal, divided by the per-(n,t) standard
// deviation across j (floored). sigma holds the pre-floor deviations.
struct DeltaJTable {
  int nominal_count = 0;
  int aux_per_nominal = 0;
  int horizon = 0;
  std::vector<double> values;  // per (n,j,t)
  std::vector<double> sigma;   // per (n,t)

  size_t idx(int n, int j, int t) const {
    return (static_cast<size_t>(n) * (aux_per_nominal + 1) + j) * horizon + t;
  }
  double at(int n, int j, int t) const { return values[idx(n, j, t)]; }
};

inline constexpr double kSigmaFloor = 1e-6;

DeltaJTable normalize_delta_j(const rollout::ReturnTable& returns, double sigma_floor = kSigmaFloor);

// a_target = a + (1/(M+1)) sum_j dJ * eps, clipped to the pre-activation range.
Matrix actor_target(const rollout::SegmentBuffer& buffer, const DeltaJTable& delta_j,
                    double clip_lo, double clip_hi);

// log-std target = log_std + mean over (n,t) of (1/(M+1)) sum_j dJ (eps^2-1) * std.
std::vector<double> exploration_target(const rollout::SegmentBuffer& buffer,
                                       const DeltaJTable& delta_j,
                                       std::span<const double> log_std);

struct ActorLossResult {
  double bc_loss = 0.0;
  double exploration_loss = 0.0;
  double entropy_term = 0.0;
  double total = 0.0;
  nn::ParamVector theta_grad;
  std::vector<double> log_std_grad;
};

// mean over rows of ||mu(o) - a_target||^2, plus ||log_std - target||^2,
// minus alpha * mean(log_std). Gradients flow to theta and log_std only;
// targets are plain numbers.
ActorLossResult actor_exploration_loss(const policy::ActorNet& actor, const nn::ParamVector& theta,
                                       const policy::ObsBatch& obs, const ActorTargets& targets,
                                       std::span<const double> log_std, double alpha);

double temperature_loss(double log_temperature, std::span<const double> log_std, double target_std);
// One gradient-descent step on the temperature objective; returns the new
// log temperature. Temperature shrinks while exploration exceeds the target
// std and grows while it is short, which closes the loop on the actor-side
// entropy push.
double temperature_update(double log_temperature, std::span<const double> log_std,
                          double target_std, double lr);

// r + (alpha/d) * sum_i (log_std_i - log_std_target).
double soft_critic_reward(double reward, std::span<const double> log_std, double log_std_target,
                          double alpha);

struct CriticUpdateStats {
  double mean_loss = 0.0;
  int minibatches = 0;
};

// iters shuffled passes of mean-squared-error regression onto fixed targets.
CriticUpdateStats critic_update(const nn::MlpSpec& spec, nn::ParamVector& phi,
                                nn::AdamState& adam, const Matrix& states,
                                std::span<const double> targets, int batch_size, int iters,
                                double lr_multiplier, double max_norm, uint64_t shuffle_key,
                                int workers = 1);

void polyak_update(nn::ParamVector& target, const nn::ParamVector& source, double rho);

}  // namespace sdpg::update
