#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sdpg/envs.hpp"
#include "sdpg/matrix.hpp"
#include "sdpg/policy.hpp"

namespace sdpg::rollout {

struct RolloutConfig {
  int nominal_count = 1;     // N
  int aux_per_nominal = 1;   // M
  int horizon = 1;           // H
  double gamma = 0.99;
  double lam = 0.95;

  int group_size() const { return aux_per_nominal + 1; }
  int total_envs() const { return nominal_count * group_size(); }
  void validate() const;
};

// Source of the per-(n,j,t) Gaussian perturbations. The default draws from
// counter-based streams keyed on (seed, epoch, n, j, t), so samples do not
// depend on evaluation order.
class PerturbationSource {
 public:
  virtual ~PerturbationSource() = default;
  virtual void sample(long epoch, int n, int j, int t, std::span<double> out) const = 0;
};

class GaussianPerturbations final : public PerturbationSource {
 public:
  explicit GaussianPerturbations(uint64_t seed) : seed_(seed) {}
  void sample(long epoch, int n, int j, int t, std::span<double> out) const override;

 private:
  uint64_t seed_;
};

// Everything recorded over one H-step segment across the N*(M+1) grid.
// j = 0 is the nominal row; its perturbations are zero.
struct SegmentBuffer {
  int nominal_count = 0;
  int aux_per_nominal = 0;
  int horizon = 0;
  int action_dim = 0;

  // per (n, j, t)
  std::vector<double> perturbation;  // action_dim per slot
  std::vector<double> reward;
  std::vector<uint8_t> boundary;   // episode ended after step t (any reason)
  std::vector<double> value_next;  // target-critic value of the post-step state; zero at failures
  Matrix priv_state;               // pre-step privileged state per slot

  // per (n, t)
  policy::ObsBatch obs;  // row n * horizon + t
  Matrix mean_action;

  size_t idx(int n, int j, int t) const {
    return (static_cast<size_t>(n) * (aux_per_nominal + 1) + j) * horizon + t;
  }
  int obs_row(int n, int t) const { return n * horizon + t; }
  std::span<const double> perturbation_at(int n, int j, int t) const {
    return {perturbation.data() + idx(n, j, t) * action_dim, static_cast<size_t>(action_dim)};
  }
};

struct ReturnTable {
  int nominal_count = 0;
  int aux_per_nominal = 0;
  int horizon = 0;
  std::vector<double> values;  // per (n, j, t)

  size_t idx(int n, int j, int t) const {
    return (static_cast<size_t>(n) * (aux_per_nominal + 1) + j) * horizon + t;
  }
  double at(int n, int j, int t) const { return values[idx(n, j, t)]; }
};

// Copies each nominal's state into its M auxiliaries, bit-exactly. Resets a
// nominal first if it finished its episode.
void sync_auxiliaries(envs::EnvBatch& envs, const RolloutConfig& cfg);

struct SegmentParams {
  const policy::ActorNet* actor = nullptr;
  const nn::ParamVector* theta = nullptr;
  std::span<const double> delta;  // exploration std per action dim
  const nn::MlpSpec* critic_spec = nullptr;
  const nn::ParamVector* phi_target = nullptr;
  double preact_clip_lo = -2.0;
  double preact_clip_hi = 2.0;
  long epoch = 0;
  int workers = 1;
};

// One H-step rollout following the nominal/auxiliary protocol: observations
// and mean actions come from the nominals only, auxiliaries step with
// perturbed actions, terminations are patched per the reset rules, and
// target-critic bootstrap values are recorded for every step.
SegmentBuffer run_segment(envs::EnvBatch& envs, const RolloutConfig& cfg,
                          const PerturbationSource& perturbations, const SegmentParams& params);

enum class TraceMode { Bootstrap, CausalTrace };

// Per-(n,j,t) return-to-go. Bootstrap mode is the plain discounted suffix
// sum with a terminal bootstrap; CausalTrace is the TD(lambda) backward
// recursion. Both restart at episode boundaries.
ReturnTable compute_returns(const SegmentBuffer& buffer, const RolloutConfig& cfg, TraceMode mode);

// Value regression targets for the critic; same machinery as CausalTrace.
ReturnTable critic_value_targets(const SegmentBuffer& buffer, const RolloutConfig& cfg);

}  // namespace sdpg::rollout
