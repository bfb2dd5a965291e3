#include "sdpg/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sdpg/parallel.hpp"
#include "sdpg/rng.hpp"

namespace sdpg::envs {

namespace {

constexpr double kInitNoise = 0.1;

// Point mass: double integrator on [-3,3]^2, goal at the origin.
constexpr double kPmAccelMax = 1.0;
constexpr double kPmSpeedMax = 2.0;
constexpr double kPmKillRadius = 3.0;
constexpr double kPmRewardFloor = -2.0;
const double kPmNominalInit[4] = {1.0, 1.0, 0.0, 0.0};

// Pendulum: gym-style swing-up, angle zero means upright.
constexpr double kPenGravity = 10.0;
constexpr double kPenMass = 1.0;
constexpr double kPenLength = 1.0;
constexpr double kPenTorqueMax = 2.0;
constexpr double kPenSpeedMax = 8.0;

// Cart-pole: classic parameters, continuous force input.
constexpr double kCpForceMax = 10.0;
constexpr double kCpGravity = 9.8;
constexpr double kCpCartMass = 1.0;
constexpr double kCpPoleMass = 0.1;
constexpr double kCpPoleHalfLen = 0.5;
constexpr double kCpAngleLimit = 0.21;
constexpr double kCpTrackLimit = 2.4;

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0) a += two_pi;
  return a - std::numbers::pi;
}

double clampd(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

// ---- rasterization helpers ----

void draw_disk(std::vector<double>& img, double cx, double cy, double radius, double intensity) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
  const int x1 = std::min(kFrameSize - 1, static_cast<int>(std::ceil(cx + radius + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
  const int y1 = std::min(kFrameSize - 1, static_cast<int>(std::ceil(cy + radius + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
      const double cov = clampd(radius + 0.5 - d, 0.0, 1.0);
      double& px = img[static_cast<size_t>(y) * kFrameSize + x];
      px = std::max(px, cov * intensity);
    }
  }
}

void draw_segment(std::vector<double>& img, double x0, double y0, double x1, double y1,
                  double half_width, double intensity) {
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  const int bx0 = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - half_width - 1)));
  const int bx1 =
      std::min(kFrameSize - 1, static_cast<int>(std::ceil(std::max(x0, x1) + half_width + 1)));
  const int by0 = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - half_width - 1)));
  const int by1 =
      std::min(kFrameSize - 1, static_cast<int>(std::ceil(std::max(y0, y1) + half_width + 1)));
  for (int y = by0; y <= by1; ++y) {
    for (int x = bx0; x <= bx1; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      double t = len2 > 0 ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0;
      t = clampd(t, 0.0, 1.0);
      const double d = std::hypot(px - (x0 + t * dx), py - (y0 + t * dy));
      const double cov = clampd(half_width + 0.5 - d, 0.0, 1.0);
      double& pix = img[static_cast<size_t>(y) * kFrameSize + x];
      pix = std::max(pix, cov * intensity);
    }
  }
}

}  // namespace

std::string env_name(EnvId id) {
  switch (id) {
    case EnvId::PointMass2D:
      return "PointMass2D";
    case EnvId::PendulumSwingUp:
      return "PendulumSwingUp";
    case EnvId::CartPole:
      return "CartPole";
  }
  return "PointMass2D";
}

EnvId env_from_name(const std::string& name) {
  if (name == "PointMass2D") return EnvId::PointMass2D;
  if (name == "PendulumSwingUp") return EnvId::PendulumSwingUp;
  if (name == "CartPole") return EnvId::CartPole;
  throw std::invalid_argument("unknown env_id: " + name);
}

std::string obs_mode_name(ObsMode m) { return m == ObsMode::State ? "State" : "Pixels"; }

ObsMode obs_mode_from_name(const std::string& name) {
  if (name == "State") return ObsMode::State;
  if (name == "Pixels") return ObsMode::Pixels;
  throw std::invalid_argument("unknown obs_mode: " + name);
}

EnvBatch::EnvBatch(EnvId id, int count, ObsMode obs_mode, uint64_t seed)
    : id_(id), mode_(obs_mode), count_(count), seed_(seed) {
  if (count < 1) throw std::invalid_argument("EnvBatch: count must be >= 1");
  states_.resize(count);
  reset_counts_.assign(count, 0);
  render_enabled_.assign(count, mode_ == ObsMode::Pixels ? 1 : 0);
  frames_.resize(count);
  reset_all();
}

int EnvBatch::action_dim() const { return id_ == EnvId::PointMass2D ? 2 : 1; }

int EnvBatch::phys_dim() const {
  switch (id_) {
    case EnvId::PointMass2D:
      return 4;
    case EnvId::PendulumSwingUp:
      return 2;
    case EnvId::CartPole:
      return 4;
  }
  return 0;
}

int EnvBatch::state_obs_dim() const {
  switch (id_) {
    case EnvId::PointMass2D:
      return 4;  // px, py, vx, vy
    case EnvId::PendulumSwingUp:
      return 3;  // cos, sin, omega
    case EnvId::CartPole:
      return 4;
  }
  return 0;
}

int EnvBatch::privileged_dim() const { return state_obs_dim(); }

int EnvBatch::proprio_dim() const {
  switch (id_) {
    case EnvId::PointMass2D:
      return 2;  // vx, vy
    case EnvId::PendulumSwingUp:
      return 1;  // omega
    case EnvId::CartPole:
      return 2;  // xdot, omega
  }
  return 0;
}

double EnvBatch::reward_bound() const {
  switch (id_) {
    case EnvId::PointMass2D:
      return 2.0;
    case EnvId::PendulumSwingUp:
      // cos term plus velocity and action penalties at their clips
      return 1.0 + 0.01 * kPenSpeedMax * kPenSpeedMax + 0.01;
    case EnvId::CartPole:
      return 1.0;
  }
  return 0.0;
}

void EnvBatch::set_render_enabled(std::span<const int> indices) {
  render_enabled_.assign(count_, 0);
  for (int i : indices) {
    render_enabled_[i] = 1;
    refresh_frames(i);
  }
}

void EnvBatch::reset(int index) {
  EnvState& s = states_[index];
  s.phys.assign(phys_dim(), 0.0);
  s.episode_step = 0;
  s.needs_reset = false;
  rng::Stream stream(rng::mix({seed_, 0x127e5e7, static_cast<uint64_t>(index),
                               static_cast<uint64_t>(reset_counts_[index])}));
  reset_counts_[index] += 1;
  switch (id_) {
    case EnvId::PointMass2D:
      for (int k = 0; k < 4; ++k) s.phys[k] = kPmNominalInit[k] + stream.uniform(-kInitNoise, kInitNoise);
      break;
    case EnvId::PendulumSwingUp:
      s.phys[0] = wrap_angle(std::numbers::pi + stream.uniform(-kInitNoise, kInitNoise));
      s.phys[1] = stream.uniform(-kInitNoise, kInitNoise);
      break;
    case EnvId::CartPole:
      for (int k = 0; k < 4; ++k) s.phys[k] = stream.uniform(-kInitNoise, kInitNoise);
      break;
  }
  if (render_enabled_[index]) refresh_frames(index);
}

void EnvBatch::reset_all() {
  for (int i = 0; i < count_; ++i) reset(i);
}

void EnvBatch::step_one(int i, std::span<const double> action, StepResult& out) {
  EnvState& s = states_[i];
  switch (id_) {
    case EnvId::PointMass2D: {
      const double ax = action[0];
      const double ay = action[1];
      s.phys[2] = clampd(s.phys[2] + ax * kDt * kPmAccelMax, -kPmSpeedMax, kPmSpeedMax);
      s.phys[3] = clampd(s.phys[3] + ay * kDt * kPmAccelMax, -kPmSpeedMax, kPmSpeedMax);
      s.phys[0] += s.phys[2] * kDt;
      s.phys[1] += s.phys[3] * kDt;
      const double dist = std::hypot(s.phys[0], s.phys[1]);
      out.reward = std::max(1.0 - dist - 0.1 * (ax * ax + ay * ay), kPmRewardFloor);
      out.terminated = dist > kPmKillRadius;
      break;
    }
    case EnvId::PendulumSwingUp: {
      const double torque = kPenTorqueMax * action[0];
      const double theta = s.phys[0];
      double omega = s.phys[1];
      omega += (3.0 * kPenGravity / (2.0 * kPenLength) * std::sin(theta) +
                3.0 / (kPenMass * kPenLength * kPenLength) * torque) *
               kDt;
      omega = clampd(omega, -kPenSpeedMax, kPenSpeedMax);
      s.phys[0] = wrap_angle(theta + omega * kDt);
      s.phys[1] = omega;
      out.reward = std::cos(s.phys[0]) - 0.01 * omega * omega - 0.01 * action[0] * action[0];
      out.terminated = false;
      break;
    }
    case EnvId::CartPole: {
      const double force = kCpForceMax * action[0];
      const double x = s.phys[0];
      const double xdot = s.phys[1];
      const double theta = s.phys[2];
      const double omega = s.phys[3];
      const double total_mass = kCpCartMass + kCpPoleMass;
      const double cos_t = std::cos(theta);
      const double sin_t = std::sin(theta);
      const double temp =
          (force + kCpPoleMass * kCpPoleHalfLen * omega * omega * sin_t) / total_mass;
      const double theta_acc =
          (kCpGravity * sin_t - cos_t * temp) /
          (kCpPoleHalfLen * (4.0 / 3.0 - kCpPoleMass * cos_t * cos_t / total_mass));
      const double x_acc = temp - kCpPoleMass * kCpPoleHalfLen * theta_acc * cos_t / total_mass;
      s.phys[0] = x + kDt * xdot;
      s.phys[1] = xdot + kDt * x_acc;
      s.phys[2] = theta + kDt * omega;
      s.phys[3] = omega + kDt * theta_acc;
      out.reward = 1.0;
      out.terminated = std::abs(s.phys[2]) > kCpAngleLimit || std::abs(s.phys[0]) > kCpTrackLimit;
      break;
    }
  }
  s.episode_step += 1;
  out.truncated = !out.terminated && s.episode_step >= kMaxEpisodeLen;
  s.needs_reset = out.terminated || out.truncated;
}

std::vector<StepResult> EnvBatch::step(const Matrix& actions, int workers) {
  if (actions.rows != count_ || actions.cols != action_dim()) {
    throw std::invalid_argument("EnvBatch::step: actions shape mismatch");
  }
  for (int i = 0; i < count_; ++i) {
    if (states_[i].needs_reset) {
      throw std::logic_error("EnvBatch::step: environment " + std::to_string(i) +
                             " finished its episode and must be reset or restored first");
    }
    for (int k = 0; k < actions.cols; ++k) {
      if (!std::isfinite(actions.at(i, k))) {
        throw std::invalid_argument("EnvBatch::step: non-finite action for environment " +
                                    std::to_string(i));
      }
    }
  }
  std::vector<StepResult> results(count_);
  parallel_chunks(count_, 16, workers, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      step_one(i, actions.row(i), results[i]);
      if (render_enabled_[i]) push_frame(i);
      results[i].privileged_state = privileged(i);
      if (mode_ == ObsMode::State || render_enabled_[i]) results[i].observation = observe(i);
    }
  });
  return results;
}

Observation EnvBatch::observe(int index) const {
  Observation o;
  o.mode = mode_;
  const EnvState& s = states_[index];
  if (mode_ == ObsMode::State) {
    o.state = privileged(index);
    return o;
  }
  o.frames = frames_[index];
  switch (id_) {
    case EnvId::PointMass2D:
      o.proprio = {s.phys[2], s.phys[3]};
      break;
    case EnvId::PendulumSwingUp:
      o.proprio = {s.phys[1]};
      break;
    case EnvId::CartPole:
      o.proprio = {s.phys[1], s.phys[3]};
      break;
  }
  return o;
}

std::vector<double> EnvBatch::privileged(int index) const {
  const EnvState& s = states_[index];
  switch (id_) {
    case EnvId::PointMass2D:
      return {s.phys[0], s.phys[1], s.phys[2], s.phys[3]};
    case EnvId::PendulumSwingUp:
      return {std::cos(s.phys[0]), std::sin(s.phys[0]), s.phys[1]};
    case EnvId::CartPole:
      return {s.phys[0], s.phys[1], s.phys[2], s.phys[3]};
  }
  return {};
}

EnvState EnvBatch::snapshot(int index) const { return states_[index]; }

void EnvBatch::restore(int index, const EnvState& state) {
  if (static_cast<int>(state.phys.size()) != phys_dim()) {
    throw std::invalid_argument("EnvBatch::restore: state dimensionality mismatch");
  }
  states_[index] = state;
  if (render_enabled_[index]) refresh_frames(index);
}

void EnvBatch::refresh_frames(int i) {
  const auto img = render(id_, states_[i]);
  auto& stack = frames_[i];
  stack.resize(static_cast<size_t>(kFrameStack) * kFramePixels);
  for (int f = 0; f < kFrameStack; ++f) {
    std::copy(img.begin(), img.end(), stack.begin() + static_cast<size_t>(f) * kFramePixels);
  }
}

void EnvBatch::push_frame(int i) {
  auto& stack = frames_[i];
  std::copy(stack.begin() + kFramePixels, stack.end(), stack.begin());
  const auto img = render(id_, states_[i]);
  std::copy(img.begin(), img.end(), stack.end() - kFramePixels);
}

std::vector<double> render(EnvId id, const EnvState& state) {
  std::vector<double> img(static_cast<size_t>(kFramePixels), 0.0);
  switch (id) {
    case EnvId::PointMass2D: {
      // world [-3,3]^2 onto the frame
      auto to_px = [](double w) { return (w + 3.0) / 6.0 * kFrameSize - 0.5; };
      draw_disk(img, to_px(0.0), to_px(0.0), 1.2, 0.5);  // goal marker
      draw_disk(img, to_px(state.phys[0]), to_px(state.phys[1]), 2.0, 1.0);
      break;
    }
    case EnvId::PendulumSwingUp: {
      const double cx = kFrameSize / 2.0;
      const double cy = kFrameSize / 2.0;
      const double rod = 12.0;
      const double bx = cx + rod * std::sin(state.phys[0]);
      const double by = cy - rod * std::cos(state.phys[0]);
      draw_segment(img, cx, cy, bx, by, 1.0, 0.6);
      draw_disk(img, bx, by, 2.2, 1.0);
      break;
    }
    case EnvId::CartPole: {
      auto to_px = [](double w) { return (w + 2.6) / 5.2 * kFrameSize - 0.5; };
      const double cart_y = 24.0;
      const double cx = to_px(state.phys[0]);
      draw_segment(img, cx - 2.5, cart_y, cx + 2.5, cart_y, 1.5, 0.7);
      const double pole = 12.0;
      const double tx = cx + pole * std::sin(state.phys[2]);
      const double ty = cart_y - pole * std::cos(state.phys[2]);
      draw_segment(img, cx, cart_y, tx, ty, 1.0, 1.0);
      break;
    }
  }
  return img;
}

std::pair<double, double> lqr_point_mass_gain(double gamma) {
  // Per-axis double integrator x' = A x + B u with the env's semi-implicit
  // update; quadratic surrogate cost q_p p^2 + q_v v^2 + r u^2.
  const double a00 = 1.0, a01 = kDt, a10 = 0.0, a11 = 1.0;
  const double b0 = kDt * kDt * kPmAccelMax, b1 = kDt * kPmAccelMax;
  const double qp = 1.0, qv = 0.1, r = 0.05;
  double p00 = qp, p01 = 0.0, p11 = qv;
  double k0 = 0.0, k1 = 0.0;
  for (int it = 0; it < 100000; ++it) {
    // S = R + g B'PB, M = B'PA (1x2)
    const double pb0 = p00 * b0 + p01 * b1;
    const double pb1 = p01 * b0 + p11 * b1;
    const double S = r + gamma * (b0 * pb0 + b1 * pb1);
    const double m0 = b0 * (p00 * a00 + p01 * a10) + b1 * (p01 * a00 + p11 * a10);
    const double m1 = b0 * (p00 * a01 + p01 * a11) + b1 * (p01 * a01 + p11 * a11);
    const double nk0 = gamma * m0 / S;
    const double nk1 = gamma * m1 / S;
    // P = Q + g A'PA - g^2 A'PB S^-1 B'PA
    const double apa00 = a00 * (p00 * a00 + p01 * a10) + a10 * (p01 * a00 + p11 * a10);
    const double apa01 = a00 * (p00 * a01 + p01 * a11) + a10 * (p01 * a01 + p11 * a11);
    const double apa11 = a01 * (p00 * a01 + p01 * a11) + a11 * (p01 * a01 + p11 * a11);
    const double np00 = qp + gamma * apa00 - gamma * gamma * m0 * m0 / S;
    const double np01 = gamma * apa01 - gamma * gamma * m0 * m1 / S;
    const double np11 = qv + gamma * apa11 - gamma * gamma * m1 * m1 / S;
    const double change = std::abs(np00 - p00) + std::abs(np01 - p01) + std::abs(np11 - p11);
    p00 = np00;
    p01 = np01;
    p11 = np11;
    k0 = nk0;
    k1 = nk1;
    if (change < 1e-14) break;
  }
  return {k0, k1};
}

double controller_return(EnvId id, const EnvState& initial, int horizon, double gamma,
                         const std::function<std::vector<double>(const EnvState&)>& controller) {
  EnvBatch env(id, 1, ObsMode::State, 0);
  EnvState start = initial;
  start.needs_reset = false;
  env.restore(0, start);
  double ret = 0.0;
  double disc = 1.0;
  Matrix actions(1, env.action_dim());
  for (int t = 0; t < horizon; ++t) {
    const auto a = controller(env.snapshot(0));
    for (int k = 0; k < env.action_dim(); ++k) actions.at(0, k) = a[k];
    const auto res = env.step(actions);
    ret += disc * res[0].reward;
    disc *= gamma;
    if (res[0].terminated || res[0].truncated) break;
  }
  return ret;
}

double lqr_oracle_return(EnvId id, const EnvState& initial, int horizon, double gamma) {
  if (id != EnvId::PointMass2D) {
    throw std::invalid_argument("lqr_oracle_return: only supported for PointMass2D");
  }
  const auto [k0, k1] = lqr_point_mass_gain(gamma);
  auto controller = [k0, k1](const EnvState& s) {
    // same pre-activation clip + tanh pathway as the policy
    auto squash = [](double u) { return std::tanh(clampd(u, -2.0, 2.0)); };
    return std::vector<double>{squash(-(k0 * s.phys[0] + k1 * s.phys[2])),
                               squash(-(k0 * s.phys[1] + k1 * s.phys[3]))};
  };
  return controller_return(id, initial, horizon, gamma, controller);
}

}  // namespace sdpg::envs
