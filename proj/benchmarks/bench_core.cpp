#include <benchmark/benchmark.h>

#include "sdpg/envs.hpp"
#include "sdpg/nn.hpp"
#include "sdpg/policy.hpp"
#include "sdpg/rng.hpp"
#include "sdpg/rollout.hpp"
#include "sdpg/update.hpp"

using namespace sdpg;

static void BM_MlpForward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  nn::MlpSpec spec{16, {64, 64}, 4, nn::Activation::Elu};
  const auto p = nn::init_mlp_params(spec, 0);
  Matrix in(batch, 16);
  rng::Stream s(1);
  for (double& v : in.data) v = s.normal();
  for (auto _ : state) {
    auto out = nn::mlp_forward(p, spec, in);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForward)->Arg(16)->Arg(128)->Arg(1024);

static void BM_MlpBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  nn::MlpSpec spec{16, {64, 64}, 4, nn::Activation::Elu};
  const auto p = nn::init_mlp_params(spec, 0);
  Matrix in(batch, 16);
  Matrix up(batch, 4);
  rng::Stream s(2);
  for (double& v : in.data) v = s.normal();
  for (double& v : up.data) v = s.normal();
  for (auto _ : state) {
    auto g = nn::mlp_backward(p, spec, in, up);
    benchmark::DoNotOptimize(g.param_grad.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpBackward)->Arg(16)->Arg(128)->Arg(1024);

static void BM_ConvForward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  nn::ConvSpec spec;
  spec.in_channels = 3;
  spec.in_height = 32;
  spec.in_width = 32;
  spec.layers = {{8, 3, 2}, {16, 3, 2}};
  spec.feature_dim = 32;
  const auto p = nn::init_conv_params(spec, 0);
  Matrix img(batch, 3 * 32 * 32);
  rng::Stream s(3);
  for (double& v : img.data) v = s.uniform();
  for (auto _ : state) {
    auto out = nn::conv_forward(p, spec, img);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ConvForward)->Arg(8)->Arg(64);

static void BM_EnvStepBatch(benchmark::State& state) {
  const int count = static_cast<int>(state.range(0));
  envs::EnvBatch env(envs::EnvId::PointMass2D, count, envs::ObsMode::State, 0);
  Matrix actions(count, 2);
  rng::Stream s(4);
  for (double& v : actions.data) v = s.uniform(-1, 1);
  for (auto _ : state) {
    auto res = env.step(actions);
    benchmark::DoNotOptimize(res.data());
    for (int i = 0; i < count; ++i) {
      if (env.needs_reset(i)) env.reset(i);
    }
  }
  state.SetItemsProcessed(state.iterations() * count);
}
BENCHMARK(BM_EnvStepBatch)->Arg(128)->Arg(1024);

static void BM_Render(benchmark::State& state) {
  envs::EnvState s;
  s.phys = {0.7, -0.4, 0.1, 0.0};
  for (auto _ : state) {
    auto img = envs::render(envs::EnvId::PointMass2D, s);
    benchmark::DoNotOptimize(img.data());
  }
}
BENCHMARK(BM_Render);

static void BM_RunSegment(benchmark::State& state) {
  const int N = 8, M = 15, H = 16;
  envs::EnvBatch env(envs::EnvId::PointMass2D, N * (M + 1), envs::ObsMode::State, 0);
  rollout::RolloutConfig cfg;
  cfg.nominal_count = N;
  cfg.aux_per_nominal = M;
  cfg.horizon = H;
  policy::ActorNet actor =
      policy::ActorNet::make(envs::ObsMode::State, env.state_obs_dim(), 0, 2, {64, 64}, 0);
  const auto theta = actor.init_params(1);
  const auto critic = policy::make_critic_spec(env.privileged_dim(), {64, 64});
  const auto phi = nn::init_mlp_params(critic, 2);
  const std::vector<double> delta = {0.3, 0.3};
  const rollout::GaussianPerturbations gauss(3);
  rollout::SegmentParams p;
  p.actor = &actor;
  p.theta = &theta;
  p.delta = delta;
  p.critic_spec = &critic;
  p.phi_target = &phi;
  long epoch = 0;
  for (auto _ : state) {
    rollout::sync_auxiliaries(env, cfg);
    p.epoch = epoch++;
    auto buf = rollout::run_segment(env, cfg, gauss, p);
    benchmark::DoNotOptimize(buf.reward.data());
  }
  state.SetItemsProcessed(state.iterations() * N * (M + 1) * H);
}
BENCHMARK(BM_RunSegment);

static void BM_ComputeReturns(benchmark::State& state) {
  const int N = 8, M = 15, H = 16;
  rollout::SegmentBuffer buf;
  buf.nominal_count = N;
  buf.aux_per_nominal = M;
  buf.horizon = H;
  buf.action_dim = 2;
  const size_t slots = static_cast<size_t>(N) * (M + 1) * H;
  buf.reward.assign(slots, 0.5);
  buf.value_next.assign(slots, 1.0);
  buf.boundary.assign(slots, 0);
  rollout::RolloutConfig cfg;
  cfg.nominal_count = N;
  cfg.aux_per_nominal = M;
  cfg.horizon = H;
  for (auto _ : state) {
    auto table = rollout::compute_returns(buf, cfg, rollout::TraceMode::CausalTrace);
    benchmark::DoNotOptimize(table.values.data());
  }
  state.SetItemsProcessed(state.iterations() * slots);
}
BENCHMARK(BM_ComputeReturns);

BENCHMARK_MAIN();
