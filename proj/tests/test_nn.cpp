#include <doctest.h>

#include <limits>
#include <stdexcept>

#include <cmath>
#include <cstring>

#include "sdpg/nn.hpp"
#include "sdpg/oracle.hpp"
#include "sdpg/rng.hpp"

using namespace sdpg;

namespace {

// Straight-line re-evaluation of a 2-layer ELU net, independent of the
// library's forward pass.
std::vector<double> reference_two_layer_elu(const nn::MlpSpec& spec, const nn::ParamVector& p,
                                            const std::vector<double>& x) {
  auto elu = [](double v) { return v > 0 ? v : std::exp(v) - 1.0; };
  const int in = spec.input_dim;
  const int h = spec.hidden_widths[0];
  const int out = spec.output_dim;
  std::vector<double> hidden(h), y(out);
  const double* w1 = p.data();
  const double* b1 = p.data() + in * h;
  for (int o = 0; o < h; ++o) {
    double acc = b1[o];
    for (int i = 0; i < in; ++i) acc += w1[o * in + i] * x[i];
    hidden[o] = elu(acc);
  }
  const double* w2 = p.data() + in * h + h;
  const double* b2 = p.data() + in * h + h + h * out;
  for (int o = 0; o < out; ++o) {
    double acc = b2[o];
    for (int i = 0; i < h; ++i) acc += w2[o * h + i] * hidden[i];
    y[o] = acc;
  }
  return y;
}

nn::ParamVector random_params(uint64_t seed, int n, double scale) {
  rng::Stream s(seed);
  nn::ParamVector p(n);
  for (double& v : p.values) v = scale * s.normal();
  return p;
}

Matrix random_matrix(uint64_t seed, int rows, int cols, double scale) {
  rng::Stream s(seed);
  Matrix m(rows, cols);
  for (double& v : m.data) v = scale * s.normal();
  return m;
}

double rel_err(std::span<const double> a, std::span<const double> b) {
  double num = 0, den = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace

TEST_CASE("mlp forward: zero params give zero output") {
  nn::MlpSpec spec{4, {8, 8}, 3, nn::Activation::Elu};
  nn::ParamVector p(spec.param_count());
  const Matrix in = random_matrix(1, 5, 4, 1.0);
  const Matrix out = nn::mlp_forward(p, spec, in);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("mlp forward: single linear layer affine identity") {
  nn::MlpSpec spec{1, {}, 1, nn::Activation::Identity};
  nn::ParamVector p(2);
  p.values = {2.0, 1.0};  // W=[[2]], b=[1]
  Matrix in(1, 1);
  in.at(0, 0) = 3.0;
  const Matrix out = nn::mlp_forward(p, spec, in);
  CHECK(out.at(0, 0) == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("mlp forward matches independent straight-line evaluation") {
  nn::MlpSpec spec{3, {6}, 2, nn::Activation::Elu};
  const auto p = random_params(42, spec.param_count(), 0.7);
  const Matrix in = random_matrix(43, 4, 3, 1.0);
  const Matrix out = nn::mlp_forward(p, spec, in);
  for (int r = 0; r < in.rows; ++r) {
    const std::vector<double> x(in.row(r).begin(), in.row(r).end());
    const auto ref = reference_two_layer_elu(spec, p, x);
    for (int k = 0; k < 2; ++k) CHECK(out.at(r, k) == doctest::Approx(ref[k]).epsilon(1e-13));
  }
}

TEST_CASE("mlp forward is pure: repeated calls bit-identical") {
  nn::MlpSpec spec{5, {16, 16}, 4, nn::Activation::Tanh};
  const auto p = random_params(7, spec.param_count(), 0.5);
  const Matrix in = random_matrix(8, 6, 5, 1.0);
  const Matrix a = nn::mlp_forward(p, spec, in);
  const Matrix b = nn::mlp_forward(p, spec, in);
  REQUIRE(a.data.size() == b.data.size());
  CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0);
}

TEST_CASE("mlp backward: zero upstream gives zero gradients") {
  nn::MlpSpec spec{4, {8}, 2, nn::Activation::Elu};
  const auto p = random_params(1, spec.param_count(), 0.5);
  const Matrix in = random_matrix(2, 3, 4, 1.0);
  const Matrix upstream(3, 2);
  const auto g = nn::mlp_backward(p, spec, in, upstream);
  for (double v : g.param_grad.values) CHECK(v == 0.0);
  for (double v : g.input_grad.data) CHECK(v == 0.0);
}

TEST_CASE("mlp backward: linear layer analytic gradients") {
  // y = Wx + b, upstream g: dW = g x^T, db = g, dx = W^T g
  nn::MlpSpec spec{3, {}, 2, nn::Activation::Identity};
  nn::ParamVector p(spec.param_count());
  p.values = {1.0, -2.0, 0.5, 0.3, 0.0, 4.0, 0.1, -0.2};  // W rows then b
  Matrix in(1, 3);
  in.row(0)[0] = 0.5;
  in.row(0)[1] = -1.0;
  in.row(0)[2] = 2.0;
  Matrix up(1, 2);
  up.at(0, 0) = 2.0;
  up.at(0, 1) = -3.0;
  const auto g = nn::mlp_backward(p, spec, in, up);
  // dW[o][i] = up[o] * x[i]
  const double expected_w[6] = {2.0 * 0.5, 2.0 * -1.0, 2.0 * 2.0,
                                -3.0 * 0.5, -3.0 * -1.0, -3.0 * 2.0};
  for (int i = 0; i < 6; ++i) CHECK(g.param_grad.values[i] == doctest::Approx(expected_w[i]));
  CHECK(g.param_grad.values[6] == doctest::Approx(2.0));
  CHECK(g.param_grad.values[7] == doctest::Approx(-3.0));
  // dx = W^T up
  CHECK(g.input_grad.at(0, 0) == doctest::Approx(1.0 * 2.0 + 0.3 * -3.0));
  CHECK(g.input_grad.at(0, 1) == doctest::Approx(-2.0 * 2.0 + 0.0 * -3.0));
  CHECK(g.input_grad.at(0, 2) == doctest::Approx(0.5 * 2.0 + 4.0 * -3.0));
}

TEST_CASE("mlp backward matches finite differences on a 3-layer net") {
  nn::MlpSpec spec{8, {12, 10, 6}, 3, nn::Activation::Elu};
  const auto p = random_params(11, spec.param_count(), 0.1);
  const Matrix in = random_matrix(12, 4, 8, 0.1);
  const Matrix up = random_matrix(13, 4, 3, 1.0);
  const auto g = nn::mlp_backward(p, spec, in, up);

  const sdpg::oracle::ScalarFn f = [&](std::span<const double> pv) {
    nn::ParamVector probe(spec.param_count());
    std::copy(pv.begin(), pv.end(), probe.values.begin());
    const Matrix out = nn::mlp_forward(probe, spec, in);
    double acc = 0;
    for (size_t i = 0; i < out.data.size(); ++i) acc += up.data[i] * out.data[i];
    return acc;
  };
  const auto fd = sdpg::oracle::finite_diff_grad(f, p.span(), 1e-5);
  CHECK(rel_err(g.param_grad.span(), fd) < 1e-5);

  // Input gradient against finite differences too.
  const sdpg::oracle::ScalarFn fx = [&](std::span<const double> xv) {
    Matrix probe = in;
    std::copy(xv.begin(), xv.end(), probe.data.begin());
    const Matrix out = nn::mlp_forward(p, spec, probe);
    double acc = 0;
    for (size_t i = 0; i < out.data.size(); ++i) acc += up.data[i] * out.data[i];
    return acc;
  };
  const auto fdx = sdpg::oracle::finite_diff_grad(fx, in.data, 1e-5);
  CHECK(rel_err(g.input_grad.data, fdx) < 1e-5);
}

TEST_CASE("mlp gradients match finite differences across seeds and activations") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    rng::Stream s(rng::mix(seed, 0x99));
    nn::MlpSpec spec;
    spec.input_dim = 2 + static_cast<int>(s.below(6));
    spec.hidden_widths = {2 + static_cast<int>(s.below(10)), 2 + static_cast<int>(s.below(10))};
    spec.output_dim = 1 + static_cast<int>(s.below(3));
    spec.activation = seed % 2 == 0 ? nn::Activation::Elu : nn::Activation::Tanh;
    const auto p = random_params(rng::mix(seed, 1), spec.param_count(), 0.1);
    const Matrix in = random_matrix(rng::mix(seed, 2), 3, spec.input_dim, 0.1);
    const Matrix up = random_matrix(rng::mix(seed, 3), 3, spec.output_dim, 1.0);
    const auto g = nn::mlp_backward(p, spec, in, up);
    const sdpg::oracle::ScalarFn f = [&](std::span<const double> pv) {
      nn::ParamVector probe(spec.param_count());
      std::copy(pv.begin(), pv.end(), probe.values.begin());
      const Matrix out = nn::mlp_forward(probe, spec, in);
      double acc = 0;
      for (size_t i = 0; i < out.data.size(); ++i) acc += up.data[i] * out.data[i];
      return acc;
    };
    const auto fd = sdpg::oracle::finite_diff_grad(f, p.span(), 1e-5);
    CHECK(rel_err(g.param_grad.span(), fd) < 1e-5);
  }
}

TEST_CASE("mlp shape mismatches are rejected") {
  nn::MlpSpec spec{4, {8}, 2, nn::Activation::Elu};
  const auto p = random_params(3, spec.param_count(), 0.5);
  const Matrix bad_in = random_matrix(4, 2, 5, 1.0);
  CHECK_THROWS_AS(nn::mlp_forward(p, spec, bad_in), std::invalid_argument);
  const Matrix in = random_matrix(5, 2, 4, 1.0);
  const Matrix bad_up = random_matrix(6, 2, 3, 1.0);
  CHECK_THROWS_AS(nn::mlp_backward(p, spec, in, bad_up), std::invalid_argument);
}

TEST_CASE("conv forward: zero image and zero params give zero features") {
  nn::ConvSpec spec;
  spec.in_channels = 1;
  spec.in_height = 8;
  spec.in_width = 8;
  spec.layers = {{2, 3, 2}};
  spec.feature_dim = 4;
  nn::ParamVector p(spec.param_count());
  const Matrix img(2, 64);
  const Matrix out = nn::conv_forward(p, spec, img);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("conv forward: 1x1 kernel stride 1 is a per-pixel affine map") {
  nn::ConvSpec spec;
  spec.in_channels = 1;
  spec.in_height = 4;
  spec.in_width = 4;
  spec.layers = {{1, 1, 1}};
  spec.feature_dim = 16;
  nn::ParamVector p(spec.param_count());
  const double w = 1.5, b = 0.25;
  p.values[spec.conv_weight_offset(0)] = w;
  p.values[spec.conv_bias_offset(0)] = b;
  // identity-like linear readout
  for (int i = 0; i < 16; ++i) p.values[spec.linear_weight_offset() + i * 16 + i] = 1.0;

  const Matrix img = random_matrix(21, 1, 16, 1.0);
  const Matrix out = nn::conv_forward(p, spec, img);
  auto elu = [](double v) { return v > 0 ? v : std::exp(v) - 1.0; };
  for (int i = 0; i < 16; ++i) {
    CHECK(out.at(0, i) == doctest::Approx(elu(w * img.at(0, i) + b)).epsilon(1e-13));
  }
}

TEST_CASE("conv gradients match finite differences on a small stack") {
  nn::ConvSpec spec;
  spec.in_channels = 2;
  spec.in_height = 8;
  spec.in_width = 8;
  spec.layers = {{2, 3, 2}, {3, 3, 2}};
  spec.feature_dim = 5;
  const auto p = random_params(31, spec.param_count(), 0.1);
  const Matrix img = random_matrix(32, 2, 2 * 64, 0.1);
  const Matrix up = random_matrix(33, 2, 5, 1.0);
  const auto g = nn::conv_backward(p, spec, img, up);

  const sdpg::oracle::ScalarFn f = [&](std::span<const double> pv) {
    nn::ParamVector probe(spec.param_count());
    std::copy(pv.begin(), pv.end(), probe.values.begin());
    const Matrix out = nn::conv_forward(probe, spec, img);
    double acc = 0;
    for (size_t i = 0; i < out.data.size(); ++i) acc += up.data[i] * out.data[i];
    return acc;
  };
  const auto fd = sdpg::oracle::finite_diff_grad(f, p.span(), 1e-5);
  CHECK(rel_err(g.param_grad.span(), fd) < 1e-5);

  const sdpg::oracle::ScalarFn fx = [&](std::span<const double> xv) {
    Matrix probe = img;
    std::copy(xv.begin(), xv.end(), probe.data.begin());
    const Matrix out = nn::conv_forward(p, spec, probe);
    double acc = 0;
    for (size_t i = 0; i < out.data.size(); ++i) acc += up.data[i] * out.data[i];
    return acc;
  };
  const auto fdx = sdpg::oracle::finite_diff_grad(fx, img.data, 1e-5);
  CHECK(rel_err(g.input_grad.data, fdx) < 1e-5);
}

TEST_CASE("conv gradient on the full 3x32x32 encoder matches sampled finite differences") {
  nn::ConvSpec spec;
  spec.in_channels = 3;
  spec.in_height = 32;
  spec.in_width = 32;
  spec.layers = {{8, 3, 2}, {16, 3, 2}};
  spec.feature_dim = 32;
  const auto p = random_params(41, spec.param_count(), 0.1);
  Matrix img = random_matrix(42, 1, 3 * 32 * 32, 1.0);
  for (double& v : img.data) v = std::abs(v) / 4.0;  // pixel-like values in [0, ~1]
  const Matrix up = random_matrix(43, 1, 32, 1.0);
  const auto g = nn::conv_backward(p, spec, img, up);

  auto value = [&](const nn::ParamVector& pv) {
    const Matrix out = nn::conv_forward(pv, spec, img);
    double acc = 0;
    for (size_t i = 0; i < out.data.size(); ++i) acc += up.data[i] * out.data[i];
    return acc;
  };
  rng::Stream pick(44);
  const double step = 1e-5;
  for (int trial = 0; trial < 40; ++trial) {
    const size_t i = pick.below(p.values.size());
    nn::ParamVector probe = p;
    probe.values[i] = p.values[i] + step;
    const double hi = value(probe);
    probe.values[i] = p.values[i] - step;
    const double lo = value(probe);
    const double fd = (hi - lo) / (2 * step);
    const double denom = std::max({std::abs(fd), std::abs(g.param_grad.values[i]), 1e-8});
    CHECK(std::abs(fd - g.param_grad.values[i]) / denom < 1e-5);
  }
}

TEST_CASE("adam: zero grads leave params and moments unchanged, step advances") {
  nn::MlpSpec spec{2, {4}, 1, nn::Activation::Elu};
  auto p = random_params(51, spec.param_count(), 0.5);
  const auto before = p;
  auto state = nn::AdamState::make(p.size(), 1e-3);
  nn::ParamVector zeros(p.size());
  nn::adam_step(state, p, zeros, 1.0, 1.0);
  CHECK(state.step == 1);
  for (int i = 0; i < p.size(); ++i) {
    CHECK(p.values[i] == before.values[i]);
    CHECK(state.m[i] == 0.0);
    CHECK(state.v[i] == 0.0);
  }
}

TEST_CASE("adam: gradient clipping rescales to max_norm") {
  auto p = nn::ParamVector(4);
  auto state = nn::AdamState::make(4, 1e-3);
  nn::ParamVector g(4);
  g.values = {10.0, 0.0, 0.0, 0.0};
  nn::adam_step(state, p, g, 1.0, 1.0);
  // effective gradient is recoverable from the first moment
  std::vector<double> eff(4);
  for (int i = 0; i < 4; ++i) eff[i] = state.m[i] / (1.0 - state.beta1);
  CHECK(l2_norm(eff) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adam: clipped norm never exceeds max_norm") {
  for (uint64_t seed = 0; seed < 6; ++seed) {
    const int n = 16;
    auto p = nn::ParamVector(n);
    auto state = nn::AdamState::make(n, 1e-3);
    auto g = random_params(rng::mix(seed, 0xc11), n, 3.0);
    const double max_norm = 0.5;
    nn::adam_step(state, p, g, max_norm, 1.0);
    std::vector<double> eff(n);
    for (int i = 0; i < n; ++i) eff[i] = state.m[i] / (1.0 - state.beta1);
    CHECK(l2_norm(eff) <= max_norm + 1e-12);
  }
}

TEST_CASE("adam: single step from zero moments matches the closed form") {
  const int n = 6;
  auto g = random_params(61, n, 0.05);  // small, below clipping
  auto p = random_params(62, n, 1.0);
  const auto before = p;
  auto state = nn::AdamState::make(n, 2e-3);
  nn::adam_step(state, p, g, 1.0, 0.5);
  for (int i = 0; i < n; ++i) {
    const double mhat = g.values[i];        // (1-b1)g / (1-b1)
    const double vhat = g.values[i] * g.values[i];
    const double expected = -2e-3 * 0.5 * mhat / (std::sqrt(vhat) + state.eps);
    CHECK(p.values[i] - before.values[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("adam: non-finite gradient is rejected with the component index") {
  auto p = nn::ParamVector(3);
  auto state = nn::AdamState::make(3, 1e-3);
  nn::ParamVector g(3);
  g.values[2] = std::numeric_limits<double>::quiet_NaN();
  try {
    nn::adam_step(state, p, g, 1.0, 1.0);
    FAIL("expected throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("lr schedule: cosine hits 1 at warmup end and the floor at the final epoch") {
  nn::LrSchedule s;
  s.kind = nn::LrSchedule::Kind::CosineWithWarmup;
  s.total_epochs = 300;
  s.warmup_epochs = 100;
  s.min_multiplier = 0.005;
  s.validate();
  CHECK(s.multiplier(99) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.multiplier(100) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.multiplier(299) == doctest::Approx(0.005).epsilon(1e-12));
  for (int e = 0; e < 300; ++e) CHECK(s.multiplier(e) > 0.0);
}

TEST_CASE("lr schedule: linear endpoints") {
  nn::LrSchedule s;
  s.kind = nn::LrSchedule::Kind::LinearDecay;
  s.total_epochs = 200;
  s.start_frac = 1.0;
  s.end_frac = 0.1;
  s.validate();
  CHECK(s.multiplier(0) == doctest::Approx(1.0));
  CHECK(s.multiplier(199) == doctest::Approx(0.1));
  for (int e = 0; e < 200; ++e) CHECK(s.multiplier(e) > 0.0);
}

TEST_CASE("param init: hidden std scales with fan-in, final layer shrunk") {
  nn::MlpSpec spec{64, {64}, 4, nn::Activation::Elu};
  const auto p = nn::init_mlp_params(spec, 0, 0.01);
  double s1 = 0, s2 = 0;
  const int n1 = 64 * 64;
  for (int i = 0; i < n1; ++i) s1 += p.values[i] * p.values[i];
  const double std1 = std::sqrt(s1 / n1);
  CHECK(std1 == doctest::Approx(1.0 / 8.0).epsilon(0.15));
  const int off2 = spec.weight_offset(1);
  for (int i = 0; i < 64 * 4; ++i) s2 += p.values[off2 + i] * p.values[off2 + i];
  const double std2 = std::sqrt(s2 / (64 * 4));
  CHECK(std2 < 0.01);  // 0.01 / 8 nominal
  // biases zero
  const int b1 = spec.bias_offset(0);
  for (int i = 0; i < 64; ++i) CHECK(p.values[b1 + i] == 0.0);
}
