#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sdpg/matrix.hpp"

namespace sdpg::envs {

enum class EnvId { PointMass2D, PendulumSwingUp, CartPole };
enum class ObsMode { State, Pixels };

std::string env_name(EnvId id);
EnvId env_from_name(const std::string& name);
std::string obs_mode_name(ObsMode m);
ObsMode obs_mode_from_name(const std::string& name);

inline constexpr int kFrameSize = 32;
inline constexpr int kFrameStack = 3;
inline constexpr int kFramePixels = kFrameSize * kFrameSize;
inline constexpr double kDt = 0.05;
inline constexpr int kMaxEpisodeLen = 200;

// Bit-exact snapshot of one environment instance's simulator state.
struct EnvState {
  std::vector<double> phys;
  int episode_step = 0;
  bool needs_reset = false;
};

struct Observation {
  ObsMode mode = ObsMode::State;
  std::vector<double> state;    // State mode
  std::vector<double> frames;   // Pixels mode: kFrameStack grayscale frames, oldest first
  std::vector<double> proprio;  // Pixels mode: proprioceptive sub-vector
};

struct StepResult {
  double reward = 0.0;
  bool terminated = false;  // failure condition hit
  bool truncated = false;   // episode step limit hit
  Observation observation;  // filled for state mode and for render-enabled pixel instances
  std::vector<double> privileged_state;  // critic input, post-step
};

// A batch of identical environments with exact snapshot/restore. Mutable
// state; callers serialize step/restore on one batch, distinct batches may
// run in parallel.
class EnvBatch {
 public:
  EnvBatch(EnvId id, int count, ObsMode obs_mode, uint64_t seed);

  EnvId id() const { return id_; }
  ObsMode obs_mode() const { return mode_; }
  int count() const { return count_; }
  int action_dim() const;
  int phys_dim() const;
  int state_obs_dim() const;
  int privileged_dim() const;
  int proprio_dim() const;

  // Pixel mode keeps frame stacks (and renders on step) only for instances
  // marked here; auxiliary environments are physics-only.
  void set_render_enabled(std::span<const int> indices);

  void reset(int index);
  void reset_all();

  // actions: count rows, action_dim cols, values in [-1, 1].
  std::vector<StepResult> step(const Matrix& actions, int workers = 1);

  Observation observe(int index) const;
  std::vector<double> privileged(int index) const;
  bool needs_reset(int index) const { return states_[index].needs_reset; }
  int episode_step(int index) const { return states_[index].episode_step; }

  EnvState snapshot(int index) const;
  void restore(int index, const EnvState& state);

  // Documented per-env bound on |reward|.
  double reward_bound() const;

 private:
  void step_one(int i, std::span<const double> action, StepResult& out);
  void refresh_frames(int i);
  void push_frame(int i);

  EnvId id_;
  ObsMode mode_;
  int count_;
  uint64_t seed_;
  std::vector<EnvState> states_;
  std::vector<long> reset_counts_;
  std::vector<uint8_t> render_enabled_;
  std::vector<std::vector<double>> frames_;  // per instance, kFrameStack * kFramePixels
};

// Deterministic rasterization of one state to a kFrameSize^2 grayscale image
// with values in [0, 1].
std::vector<double> render(EnvId id, const EnvState& state);

// Discounted return of the LQR controller for the linear-quadratic point
// mass, evaluated in the actual environment with action squashing applied.
// Throws std::invalid_argument for any other environment.
double lqr_oracle_return(EnvId id, const EnvState& initial, int horizon, double gamma);

// The underlying per-axis feedback gain (position, velocity), exposed for
// direct controller comparisons.
std::pair<double, double> lqr_point_mass_gain(double gamma);

// Discounted return of an arbitrary state-feedback controller from a given
// initial state; stops early at termination.
double controller_return(EnvId id, const EnvState& initial, int horizon, double gamma,
                         const std::function<std::vector<double>(const EnvState&)>& controller);

}  // namespace sdpg::envs
