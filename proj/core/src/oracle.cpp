#include "sdpg/oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "sdpg/nn.hpp"
#include "sdpg/rng.hpp"

namespace sdpg::oracle {

namespace {

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double rel_error(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

nn::MlpSpec random_small_mlp(rng::Stream& s, int max_width = 32) {
  nn::MlpSpec spec;
  spec.input_dim = 2 + static_cast<int>(s.below(7));
  spec.hidden_widths = {2 + static_cast<int>(s.below(max_width - 1)),
                        2 + static_cast<int>(s.below(max_width - 1))};
  spec.output_dim = 1 + static_cast<int>(s.below(4));
  spec.activation = nn::Activation::Elu;
  return spec;
}

Matrix random_matrix(rng::Stream& s, int rows, int cols, double scale) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = scale * s.normal();
  return m;
}

nn::ParamVector random_params(rng::Stream& s, int count, double scale) {
  nn::ParamVector p(count);
  for (double& v : p.values) v = scale * s.normal();
  return p;
}

}  // namespace

std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x, double step) {
  std::vector<double> grad(x.size(), 0.0);
  std::vector<double> probe(x.begin(), x.end());
  for (size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double hi = f(probe);
    probe[i] = x[i] - step;
    const double lo = f(probe);
    probe[i] = x[i];
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

McSmoothedGrad mc_smoothed_grad(const ScalarFn& J, std::span<const double> A, double delta,
                                long samples, uint64_t seed) {
  const size_t dim = A.size();
  const double base = J(A);

  std::vector<double> dj(static_cast<size_t>(samples));
  std::vector<double> eps(static_cast<size_t>(samples) * dim);
  std::vector<double> probe(dim);
  double dj_mean = 0.0;
  for (long i = 0; i < samples; ++i) {
    for (size_t k = 0; k < dim; ++k) {
      const double e = rng::normal(rng::mix({seed, 0x3c5, static_cast<uint64_t>(i), k}));
      eps[static_cast<size_t>(i) * dim + k] = e;
      probe[k] = A[k] + delta * e;
    }
    dj[i] = J(probe) - base;
    dj_mean += dj[i];
  }
  dj_mean /= samples;
  double var = 0.0;
  for (long i = 0; i < samples; ++i) var += (dj[i] - dj_mean) * (dj[i] - dj_mean);

  McSmoothedGrad out;
  out.samples = samples;
  out.sigma = std::sqrt(var / samples);
  const double denom = std::max(out.sigma, 1e-300);

  out.mean.assign(dim, 0.0);
  out.std_error.assign(dim, 0.0);
  for (long i = 0; i < samples; ++i) {
    for (size_t k = 0; k < dim; ++k) {
      out.mean[k] += dj[i] / denom * eps[static_cast<size_t>(i) * dim + k];
    }
  }
  for (size_t k = 0; k < dim; ++k) out.mean[k] /= samples;
  for (long i = 0; i < samples; ++i) {
    for (size_t k = 0; k < dim; ++k) {
      const double c = dj[i] / denom * eps[static_cast<size_t>(i) * dim + k] - out.mean[k];
      out.std_error[k] += c * c;
    }
  }
  for (size_t k = 0; k < dim; ++k) {
    out.std_error[k] = std::sqrt(out.std_error[k] / samples) / std::sqrt(static_cast<double>(samples));
  }
  return out;
}

CheckResult check_smoothed_grad_estimator(uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  constexpr int kDim = 8;
  constexpr double kDelta = 0.1;
  constexpr long kSamples = 100000;

  rng::Stream s(rng::mix(seed, 0x7431));
  std::vector<double> A(kDim);
  for (double& a : A) a = s.normal();

  const ScalarFn J = [](std::span<const double> u) {
    double v = 0.0;
    for (double x : u) v -= x * x;
    return v;
  };
  const auto est = mc_smoothed_grad(J, A, kDelta, kSamples, rng::mix(seed, 0x7432));

  // Gaussian smoothing of the quadratic shifts it by a constant, so its
  // gradient is exactly -2A; the estimator mean carries the delta/sigma scale.
  double worst = 0.0;
  for (int k = 0; k < kDim; ++k) {
    const double analytic = kDelta / std::max(est.sigma, 1e-300) * (-2.0 * A[k]);
    const double err = std::abs(est.mean[k] - analytic) / std::max(est.std_error[k], 1e-300);
    worst = std::max(worst, err);
  }
  CheckResult r;
  r.name = "smoothed_grad_estimator";
  r.tolerance = 3.0;
  r.measured_error = worst;
  r.samples = kSamples;
  r.pass = worst <= r.tolerance;
  r.wall_time_s = elapsed_s(start);
  return r;
}

CheckResult check_supervised_target_equivalence(uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  constexpr int kSeeds = 20;
  double worst = 0.0;
  for (int trial = 0; trial < kSeeds; ++trial) {
    rng::Stream s(rng::mix({seed, 0xb10c, static_cast<uint64_t>(trial)}));
    const nn::MlpSpec spec = random_small_mlp(s);
    const auto params = random_params(s, spec.param_count(), 0.5);
    const Matrix obs = random_matrix(s, 3 + static_cast<int>(s.below(5)), spec.input_dim, 1.0);
    const Matrix direction = random_matrix(s, obs.rows, spec.output_dim, 1.0);

    // Route 1: materialize target = A + d, differentiate 1/2 ||A - target||^2.
    const Matrix actions = nn::mlp_forward(params, spec, obs);
    Matrix target = actions;
    for (size_t i = 0; i < target.data.size(); ++i) target.data[i] += direction.data[i];
    Matrix upstream(actions.rows, actions.cols);
    for (size_t i = 0; i < upstream.data.size(); ++i) {
      upstream.data[i] = actions.data[i] - target.data[i];
    }
    const auto loss_grad = nn::mlp_backward(params, spec, obs, upstream).param_grad;

    // Route 2: push the direction straight through the Jacobian transpose.
    const auto direct = nn::mlp_backward(params, spec, obs, direction).param_grad;
    std::vector<double> negated(direct.values.size());
    for (size_t i = 0; i < negated.size(); ++i) negated[i] = -direct.values[i];

    worst = std::max(worst, rel_error(loss_grad.span(), negated));
  }
  CheckResult r;
  r.name = "supervised_target_equivalence";
  r.tolerance = 1e-10;
  r.measured_error = worst;
  r.samples = kSeeds;
  r.pass = worst <= r.tolerance;
  r.wall_time_s = elapsed_s(start);
  return r;
}

CheckResult check_bc_gradient_equivalence(uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  constexpr int kSeeds = 20;
  double worst = 0.0;
  for (int trial = 0; trial < kSeeds; ++trial) {
    rng::Stream s(rng::mix({seed, 0xbc10, static_cast<uint64_t>(trial)}));
    const nn::MlpSpec spec = random_small_mlp(s);
    const auto params = random_params(s, spec.param_count(), 0.5);
    const Matrix obs = random_matrix(s, 3 + static_cast<int>(s.below(5)), spec.input_dim, 1.0);
    const Matrix dj = random_matrix(s, obs.rows, spec.output_dim, 1.0);
    const double alpha = 0.1 + s.uniform();

    // Cloning loss route: target = A + alpha*dJ, L = 1/(2 alpha) sum ||A - target||^2.
    const Matrix actions = nn::mlp_forward(params, spec, obs);
    Matrix target = actions;
    for (size_t i = 0; i < target.data.size(); ++i) target.data[i] += alpha * dj.data[i];
    Matrix upstream(actions.rows, actions.cols);
    for (size_t i = 0; i < upstream.data.size(); ++i) {
      upstream.data[i] = (actions.data[i] - target.data[i]) / alpha;
    }
    const auto bc_grad = nn::mlp_backward(params, spec, obs, upstream).param_grad;
    std::vector<double> neg_bc(bc_grad.values.size());
    for (size_t i = 0; i < neg_bc.size(); ++i) neg_bc[i] = -bc_grad.values[i];

    // Direct decoupled-gradient route.
    const auto direct = nn::mlp_backward(params, spec, obs, dj).param_grad;

    worst = std::max(worst, rel_error(neg_bc, direct.span()));
  }
  CheckResult r;
  r.name = "bc_gradient_equivalence";
  r.tolerance = 1e-10;
  r.measured_error = worst;
  r.samples = kSeeds;
  r.pass = worst <= r.tolerance;
  r.wall_time_s = elapsed_s(start);
  return r;
}

CheckResult check_reinforce_special_case(uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  constexpr int kTrials = 100;
  double worst = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    rng::Stream s(rng::mix({seed, 0x5e1f, static_cast<uint64_t>(trial)}));
    const int dim = 1 + static_cast<int>(s.below(8));
    std::vector<double> a(dim), delta(dim), eps(dim), u(dim);
    for (int k = 0; k < dim; ++k) {
      a[k] = s.normal();
      delta[k] = 0.05 + s.uniform();
      eps[k] = s.normal();
      u[k] = a[k] + delta[k] * eps[k];
    }
    const double dj = 2.0 * s.normal();  // stands in for J(U) - J(A)

    double err = 0.0;
    for (int k = 0; k < dim; ++k) {
      // Smoothing estimator summand with the std denominator substituted.
      const double smooth_dir = dj / delta[k] * eps[k];
      // Gaussian policy-gradient: (J - B) * grad_a log N(u | a, delta^2).
      const double pg_dir = dj * (u[k] - a[k]) / (delta[k] * delta[k]);
      const double denom = std::max(std::abs(pg_dir), 1e-300);
      err = std::max(err, std::abs(smooth_dir - pg_dir) / denom);
    }
    worst = std::max(worst, err);
  }
  CheckResult r;
  r.name = "reinforce_special_case";
  r.tolerance = 1e-12;
  r.measured_error = worst;
  r.samples = kTrials;
  r.pass = worst <= r.tolerance;
  r.wall_time_s = elapsed_s(start);
  return r;
}

CheckResult check_autodiff_finite_diff(uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  constexpr int kTrials = 5;
  constexpr double kStep = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    rng::Stream s(rng::mix({seed, 0xfd11, static_cast<uint64_t>(trial)}));
    const nn::MlpSpec spec = random_small_mlp(s, 16);
    const auto params = random_params(s, spec.param_count(), 0.1);
    const Matrix obs = random_matrix(s, 4, spec.input_dim, 0.1);
    const Matrix upstream = random_matrix(s, 4, spec.output_dim, 1.0);

    const auto analytic = nn::mlp_backward(params, spec, obs, upstream).param_grad;
    const ScalarFn f = [&](std::span<const double> p) {
      nn::ParamVector probe(spec.param_count());
      std::copy(p.begin(), p.end(), probe.values.begin());
      const Matrix out = nn::mlp_forward(probe, spec, obs);
      double v = 0.0;
      for (size_t i = 0; i < out.data.size(); ++i) v += upstream.data[i] * out.data[i];
      return v;
    };
    const auto fd = finite_diff_grad(f, params.span(), kStep);
    worst = std::max(worst, rel_error(analytic.span(), fd));
  }
  CheckResult r;
  r.name = "autodiff_vs_finite_diff";
  r.tolerance = 1e-5;
  r.measured_error = worst;
  r.samples = kTrials;
  r.pass = worst <= r.tolerance;
  r.wall_time_s = elapsed_s(start);
  return r;
}

VerificationReport run_verification(uint64_t seed) {
  VerificationReport report;
  report.push_back(check_smoothed_grad_estimator(seed));
  report.push_back(check_supervised_target_equivalence(seed));
  report.push_back(check_bc_gradient_equivalence(seed));
  report.push_back(check_reinforce_special_case(seed));
  report.push_back(check_autodiff_finite_diff(seed));
  return report;
}

bool all_passed(const VerificationReport& report) {
  for (const auto& r : report) {
    if (!r.pass) return false;
  }
  return true;
}

void print_report(const VerificationReport& report, std::ostream& os) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-32s %-6s %12s %12s %10s %10s", "check", "pass",
                "measured", "tolerance", "samples", "time_s");
  os << line << "\n";
  for (const auto& r : report) {
    std::snprintf(line, sizeof(line), "%-32s %-6s %12.3e %12.3e %10ld %10.3f", r.name.c_str(),
                  r.pass ? "PASS" : "FAIL", r.measured_error, r.tolerance, r.samples,
                  r.wall_time_s);
    os << line << "\n";
  }
}

void write_report_csv(const VerificationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "name,pass,measured_error,tolerance,samples,wall_time_s\n";
  char buf[64];
  for (const auto& r : report) {
    out << r.name << "," << (r.pass ? 1 : 0) << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.measured_error);
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.tolerance);
    out << buf << "," << r.samples << ",";
    std::snprintf(buf, sizeof(buf), "%.6f", r.wall_time_s);
    out << buf << "\n";
  }
}

}  // namespace sdpg::oracle
