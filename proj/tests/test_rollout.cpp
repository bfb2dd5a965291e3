#include <doctest.h>

#include <limits>
#include <stdexcept>

#include <cmath>
#include <cstring>

#include "sdpg/rollout.hpp"
#include "sdpg/rng.hpp"

using namespace sdpg;
using rollout::RolloutConfig;
using rollout::ReturnTable;
using rollout::SegmentBuffer;
using rollout::TraceMode;

namespace {

struct ZeroPerturbations final : rollout::PerturbationSource {
  void sample(long, int, int, int, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
  }
};

struct Harness {
  envs::EnvBatch envs;
  RolloutConfig cfg;
  policy::ActorNet actor;
  nn::ParamVector theta;
  nn::MlpSpec critic;
  nn::ParamVector phi;
  std::vector<double> delta;

  Harness(envs::EnvId id, int N, int M, int H, uint64_t seed, double delta_value,
          double critic_scale = 0.1)
      : envs(id, N * (M + 1), envs::ObsMode::State, seed) {
    cfg.nominal_count = N;
    cfg.aux_per_nominal = M;
    cfg.horizon = H;
    cfg.gamma = 0.99;
    cfg.lam = 0.95;
    actor = policy::ActorNet::make(envs::ObsMode::State, envs.state_obs_dim(), 0,
                                   envs.action_dim(), {8}, 0);
    theta = actor.init_params(rng::mix(seed, 1));
    critic = policy::make_critic_spec(envs.privileged_dim(), {8});
    phi = nn::init_mlp_params(critic, rng::mix(seed, 2));
    for (double& v : phi.values) v *= critic_scale;
    delta.assign(envs.action_dim(), delta_value);
  }

  rollout::SegmentParams params(long epoch = 0) {
    rollout::SegmentParams p;
    p.actor = &actor;
    p.theta = &theta;
    p.delta = delta;
    p.critic_spec = &critic;
    p.phi_target = &phi;
    p.epoch = epoch;
    return p;
  }
};

// Direct expansion of the k-step mixture: independent oracle for the
// backward recursion.
double td_lambda_direct(std::span<const double> r, std::span<const double> v_next, double gamma,
                        double lam, int t) {
  const int H = static_cast<int>(r.size());
  auto k_step = [&](int k) {
    double acc = 0.0, disc = 1.0;
    for (int l = 0; l < k; ++l) {
      acc += disc * r[t + l];
      disc *= gamma;
    }
    return acc + disc * v_next[t + k - 1];
  };
  const int k_max = H - t;
  if (k_max == 1) return k_step(1);
  double total = 0.0, lam_pow = 1.0;
  for (int k = 1; k <= k_max - 1; ++k) {
    total += (1.0 - lam) * lam_pow * k_step(k);
    lam_pow *= lam;
  }
  total += lam_pow * k_step(k_max);
  return total;
}

SegmentBuffer manual_buffer(int H, std::span<const double> r, std::span<const double> v_next) {
  SegmentBuffer b;
  b.nominal_count = 1;
  b.aux_per_nominal = 0;
  b.horizon = H;
  b.action_dim = 1;
  b.reward.assign(r.begin(), r.end());
  b.value_next.assign(v_next.begin(), v_next.end());
  b.boundary.assign(H, 0);
  b.perturbation.assign(H, 0.0);
  return b;
}

bool buffers_equal(const SegmentBuffer& a, const SegmentBuffer& b) {
  auto bytes_eq = [](const std::vector<double>& x, const std::vector<double>& y) {
    return x.size() == y.size() &&
           std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
  };
  return bytes_eq(a.reward, b.reward) && bytes_eq(a.value_next, b.value_next) &&
         bytes_eq(a.perturbation, b.perturbation) && a.boundary == b.boundary &&
         bytes_eq(a.priv_state.data, b.priv_state.data) &&
         bytes_eq(a.mean_action.data, b.mean_action.data) &&
         bytes_eq(a.obs.state.data, b.obs.state.data);
}

}  // namespace

TEST_CASE("sync_auxiliaries copies nominal state bit-exactly") {
  Harness h(envs::EnvId::PointMass2D, 2, 3, 4, 11, 0.2);
  rollout::sync_auxiliaries(h.envs, h.cfg);
  for (int n = 0; n < 2; ++n) {
    const auto nominal = h.envs.snapshot(n * 4);
    for (int j = 1; j <= 3; ++j) {
      const auto aux = h.envs.snapshot(n * 4 + j);
      CHECK(std::memcmp(nominal.phys.data(), aux.phys.data(),
                        nominal.phys.size() * sizeof(double)) == 0);
      CHECK(aux.episode_step == nominal.episode_step);
    }
  }
}

TEST_CASE("sync_auxiliaries inherits a mid-episode step counter") {
  Harness h(envs::EnvId::PendulumSwingUp, 1, 2, 4, 12, 0.2);
  Matrix a(3, 1);
  for (int t = 0; t < 7; ++t) h.envs.step(a);
  rollout::sync_auxiliaries(h.envs, h.cfg);
  CHECK(h.envs.episode_step(1) == 7);
  CHECK(h.envs.episode_step(2) == 7);
}

TEST_CASE("sync_auxiliaries resets a finished nominal first") {
  Harness h(envs::EnvId::PointMass2D, 1, 1, 4, 13, 0.2);
  envs::EnvState edge;
  edge.phys = {2.95, 0.0, 2.0, 0.0};
  h.envs.restore(0, edge);
  Matrix a(2, 2);
  h.envs.step(a);
  CHECK(h.envs.needs_reset(0));
  rollout::sync_auxiliaries(h.envs, h.cfg);
  CHECK(!h.envs.needs_reset(0));
  CHECK(h.envs.episode_step(0) == 0);
}

TEST_CASE("zero perturbations make auxiliaries replicate the nominal") {
  Harness h(envs::EnvId::PendulumSwingUp, 2, 1, 8, 14, 0.3);
  rollout::sync_auxiliaries(h.envs, h.cfg);
  const ZeroPerturbations zero;
  const auto buf = rollout::run_segment(h.envs, h.cfg, zero, h.params());
  for (int n = 0; n < 2; ++n) {
    for (int t = 0; t < 8; ++t) {
      CHECK(buf.reward[buf.idx(n, 1, t)] == buf.reward[buf.idx(n, 0, t)]);
      CHECK(buf.value_next[buf.idx(n, 1, t)] == buf.value_next[buf.idx(n, 0, t)]);
    }
  }
}

TEST_CASE("zero exploration std zeroes every return difference") {
  Harness h(envs::EnvId::PointMass2D, 2, 3, 6, 15, 0.0);
  rollout::sync_auxiliaries(h.envs, h.cfg);
  const rollout::GaussianPerturbations gauss(999);
  const auto buf = rollout::run_segment(h.envs, h.cfg, gauss, h.params());
  const auto returns = rollout::compute_returns(buf, h.cfg, TraceMode::CausalTrace);
  for (int n = 0; n < 2; ++n) {
    for (int j = 0; j <= 3; ++j) {
      for (int t = 0; t < 6; ++t) {
        CHECK(returns.at(n, j, t) == returns.at(n, 0, t));
      }
    }
  }
}

TEST_CASE("run_segment is bit-deterministic for a fixed seed") {
  auto make = [] {
    Harness h(envs::EnvId::CartPole, 2, 2, 10, 16, 0.25);
    rollout::sync_auxiliaries(h.envs, h.cfg);
    const rollout::GaussianPerturbations gauss(44);
    return rollout::run_segment(h.envs, h.cfg, gauss, h.params(3));
  };
  const auto a = make();
  const auto b = make();
  CHECK(buffers_equal(a, b));
}

TEST_CASE("nominal rows carry zero perturbations") {
  Harness h(envs::EnvId::PointMass2D, 2, 2, 5, 17, 0.2);
  rollout::sync_auxiliaries(h.envs, h.cfg);
  const rollout::GaussianPerturbations gauss(17);
  const auto buf = rollout::run_segment(h.envs, h.cfg, gauss, h.params());
  for (int n = 0; n < 2; ++n) {
    for (int t = 0; t < 5; ++t) {
      for (double e : buf.perturbation_at(n, 0, t)) CHECK(e == 0.0);
    }
  }
}

TEST_CASE("returns: lambda 0 reduces to the one-step bootstrap") {
  const double r[4] = {1.0, -2.0, 0.5, 3.0};
  const double v[4] = {10.0, 20.0, -5.0, 7.0};
  auto buf = manual_buffer(4, r, v);
  RolloutConfig cfg;
  cfg.aux_per_nominal = 1;
  cfg.gamma = 0.9;
  cfg.lam = 0.0;
  const auto table = rollout::compute_returns(buf, cfg, TraceMode::CausalTrace);
  for (int t = 0; t < 4; ++t) {
    CHECK(table.at(0, 0, t) == doctest::Approx(r[t] + 0.9 * v[t]).epsilon(1e-15));
  }
}

TEST_CASE("returns: lambda 1 reduces to discounted suffix sums with bootstrap") {
  const double r[3] = {1.0, 2.0, 3.0};
  const double v[3] = {10.0, 20.0, 30.0};
  auto buf = manual_buffer(3, r, v);
  RolloutConfig cfg;
  cfg.aux_per_nominal = 1;
  cfg.gamma = 0.9;
  cfg.lam = 1.0;
  const auto table = rollout::compute_returns(buf, cfg, TraceMode::CausalTrace);
  for (int t = 0; t < 3; ++t) {
    double expected = 0, disc = 1;
    for (int l = t; l < 3; ++l) {
      expected += disc * r[l];
      disc *= 0.9;
    }
    expected += disc * v[2];
    CHECK(table.at(0, 0, t) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("returns: three-step hand case matches the direct expansion") {
  const double r[3] = {1.0, 2.0, 3.0};
  const double v[3] = {10.0, 20.0, 30.0};
  auto buf = manual_buffer(3, r, v);
  RolloutConfig cfg;
  cfg.aux_per_nominal = 1;
  cfg.gamma = 0.9;
  cfg.lam = 0.5;
  const auto table = rollout::compute_returns(buf, cfg, TraceMode::CausalTrace);
  // frozen values computed by expanding the k-step mixture by hand
  CHECK(std::abs(table.at(0, 0, 2) - 30.0) < 1e-12);
  CHECK(std::abs(table.at(0, 0, 1) - 24.5) < 1e-12);
  CHECK(std::abs(table.at(0, 0, 0) - 16.525) < 1e-12);
  for (int t = 0; t < 3; ++t) {
    CHECK(std::abs(table.at(0, 0, t) - td_lambda_direct(r, v, 0.9, 0.5, t)) < 1e-12);
  }
}

TEST_CASE("returns: recursion matches direct expansion on random segments") {
  rng::Stream s(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int H = 2 + static_cast<int>(s.below(10));
    std::vector<double> r(H), v(H);
    for (int t = 0; t < H; ++t) {
      r[t] = s.normal();
      v[t] = 5.0 * s.normal();
    }
    auto buf = manual_buffer(H, r, v);
    RolloutConfig cfg;
    cfg.aux_per_nominal = 1;
    cfg.gamma = 0.8 + 0.19 * s.uniform();
    cfg.lam = s.uniform();
    const auto table = rollout::compute_returns(buf, cfg, TraceMode::CausalTrace);
    for (int t = 0; t < H; ++t) {
      CHECK(table.at(0, 0, t) ==
            doctest::Approx(td_lambda_direct(r, v, cfg.gamma, cfg.lam, t)).epsilon(1e-12));
    }
  }
}

TEST_CASE("returns restart at termination boundaries") {
  const double r[4] = {1.0, 2.0, 3.0, 4.0};
  const double v[4] = {10.0, 0.0, 30.0, 40.0};  // failure at t=1 bootstraps zero
  auto buf = manual_buffer(4, r, v);
  buf.boundary[1] = 1;
  RolloutConfig cfg;
  cfg.aux_per_nominal = 1;
  cfg.gamma = 0.9;
  cfg.lam = 0.5;
  const auto table = rollout::compute_returns(buf, cfg, TraceMode::CausalTrace);
  CHECK(table.at(0, 0, 1) == doctest::Approx(2.0).epsilon(1e-15));  // r + gamma*0
  // t=0 sees the boundary value, not anything past it
  CHECK(table.at(0, 0, 0) ==
        doctest::Approx(1.0 + 0.9 * (0.5 * 10.0 + 0.5 * 2.0)).epsilon(1e-14));
  // t=2..3 belong to the next episode and bootstrap normally
  CHECK(table.at(0, 0, 3) == doctest::Approx(4.0 + 0.9 * 40.0).epsilon(1e-14));
}

TEST_CASE("causal trace with lambda 1 equals bootstrap mode on every suffix") {
  Harness h(envs::EnvId::PendulumSwingUp, 2, 2, 12, 18, 0.2);
  rollout::sync_auxiliaries(h.envs, h.cfg);
  const rollout::GaussianPerturbations gauss(5);
  const auto buf = rollout::run_segment(h.envs, h.cfg, gauss, h.params());
  RolloutConfig cfg = h.cfg;
  cfg.lam = 1.0;
  const auto causal = rollout::compute_returns(buf, cfg, TraceMode::CausalTrace);
  const auto boot = rollout::compute_returns(buf, cfg, TraceMode::Bootstrap);
  REQUIRE(causal.values.size() == boot.values.size());
  for (size_t i = 0; i < causal.values.size(); ++i) {
    CHECK(causal.values[i] == doctest::Approx(boot.values[i]).epsilon(1e-14));
  }
}

TEST_CASE("return tables are invariant to the (n,j) processing order") {
  Harness h(envs::EnvId::PointMass2D, 2, 2, 6, 19, 0.3);
  rollout::sync_auxiliaries(h.envs, h.cfg);
  const rollout::GaussianPerturbations gauss(6);
  auto buf = rollout::run_segment(h.envs, h.cfg, gauss, h.params());
  const auto base = rollout::compute_returns(buf, h.cfg, TraceMode::CausalTrace);

  // permute the (n,j) blocks and recompute
  auto permuted = buf;
  const int H = buf.horizon;
  auto swap_block = [&](int a, int b) {
    for (int t = 0; t < H; ++t) {
      std::swap(permuted.reward[a * H + t], permuted.reward[b * H + t]);
      std::swap(permuted.value_next[a * H + t], permuted.value_next[b * H + t]);
      std::swap(permuted.boundary[a * H + t], permuted.boundary[b * H + t]);
    }
  };
  swap_block(0, 4);
  swap_block(1, 3);
  const auto moved = rollout::compute_returns(permuted, h.cfg, TraceMode::CausalTrace);
  for (int t = 0; t < H; ++t) {
    CHECK(moved.values[4 * H + t] == base.values[0 * H + t]);
    CHECK(moved.values[3 * H + t] == base.values[1 * H + t]);
  }
}

TEST_CASE("auxiliary termination copies the nominal state and restarts its return") {
  // zero-mean actor (init scale makes means tiny), zero perturbations, so the
  // only difference between rows is the scripted initial state
  Harness h(envs::EnvId::PointMass2D, 1, 1, 4, 20, 0.0);
  rollout::sync_auxiliaries(h.envs, h.cfg);
  envs::EnvState doomed;
  doomed.phys = {3.0, 0.0, 2.0, 0.0};  // flies past the kill radius on step 0
  h.envs.restore(1, doomed);
  const ZeroPerturbations zero;
  const auto buf = rollout::run_segment(h.envs, h.cfg, zero, h.params());

  CHECK(buf.boundary[buf.idx(0, 1, 0)] == 1);
  CHECK(buf.value_next[buf.idx(0, 1, 0)] == 0.0);  // genuine failure bootstraps zero
  CHECK(buf.boundary[buf.idx(0, 0, 0)] == 0);
  // from t=1 on the auxiliary walks in lockstep with the nominal
  for (int t = 1; t < 4; ++t) {
    const auto a = buf.priv_state.row(static_cast<int>(buf.idx(0, 0, t)));
    const auto b = buf.priv_state.row(static_cast<int>(buf.idx(0, 1, t)));
    for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    CHECK(buf.reward[buf.idx(0, 1, t)] == buf.reward[buf.idx(0, 0, t)]);
  }
  // no reward leakage across the boundary
  const auto returns = rollout::compute_returns(buf, h.cfg, TraceMode::CausalTrace);
  CHECK(returns.at(0, 1, 0) == doctest::Approx(buf.reward[buf.idx(0, 1, 0)]).epsilon(1e-15));
}

TEST_CASE("nominal termination resets the whole group to a fresh episode") {
  Harness h(envs::EnvId::PointMass2D, 1, 2, 4, 21, 0.0);
  rollout::sync_auxiliaries(h.envs, h.cfg);
  envs::EnvState doomed;
  doomed.phys = {3.0, 0.0, 2.0, 0.0};
  for (int i = 0; i < 3; ++i) h.envs.restore(i, doomed);
  const ZeroPerturbations zero;
  const auto buf = rollout::run_segment(h.envs, h.cfg, zero, h.params());

  for (int j = 0; j <= 2; ++j) CHECK(buf.boundary[buf.idx(0, j, 0)] == 1);
  // all rows continue from the same fresh state
  for (int t = 1; t < 4; ++t) {
    const auto a = buf.priv_state.row(static_cast<int>(buf.idx(0, 0, t)));
    for (int j = 1; j <= 2; ++j) {
      const auto b = buf.priv_state.row(static_cast<int>(buf.idx(0, j, t)));
      for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    }
  }
  // the fresh episode starts from a reset state, not the doomed one
  CHECK(std::hypot(buf.priv_state.at(static_cast<int>(buf.idx(0, 0, 1)), 0),
                   buf.priv_state.at(static_cast<int>(buf.idx(0, 0, 1)), 1)) < 2.0);
}

TEST_CASE("a forced group reset marks the auxiliary boundary as a truncation") {
  // nominal terminates but a healthy auxiliary bootstraps its own value
  Harness h(envs::EnvId::PointMass2D, 1, 1, 2, 22, 0.0, 0.5);
  rollout::sync_auxiliaries(h.envs, h.cfg);
  envs::EnvState doomed;
  doomed.phys = {3.0, 0.0, 2.0, 0.0};
  h.envs.restore(0, doomed);  // nominal dies, auxiliary (restored by sync) stays alive
  envs::EnvState safe;
  safe.phys = {0.5, 0.5, 0.0, 0.0};
  h.envs.restore(1, safe);
  const ZeroPerturbations zero;
  const auto buf = rollout::run_segment(h.envs, h.cfg, zero, h.params());
  CHECK(buf.boundary[buf.idx(0, 1, 0)] == 1);
  CHECK(buf.value_next[buf.idx(0, 1, 0)] != 0.0);
}
