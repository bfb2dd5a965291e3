#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sdpg::oracle {

using ScalarFn = std::function<double(std::span<const double>)>;

// Central finite differences per coordinate.
std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x, double step);

struct McSmoothedGrad {
  std::vector<double> mean;       // Monte-Carlo average of the estimator summand
  std::vector<double> std_error;  // per-component standard error of the mean
  double sigma = 0.0;             // sample std of the perturbed returns
  long samples = 0;
};

// Monte-Carlo estimate of the smoothed ascent direction
// E[(J(A + delta*eps) - J(A)) / sigma * eps] with sigma measured from the
// sampled returns.
McSmoothedGrad mc_smoothed_grad(const ScalarFn& J, std::span<const double> A, double delta,
                                long samples, uint64_t seed);

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured_error = 0.0;
  double tolerance = 0.0;
  long samples = 0;
  double wall_time_s = 0.0;
};

using VerificationReport = std::vector<CheckResult>;

// Monte-Carlo mean of the smoothing estimator against the closed-form
// gradient of the Gaussian-smoothed quadratic; error measured in standard
// errors.
CheckResult check_smoothed_grad_estimator(uint64_t seed);

// Gradient of the squared loss to a stop-gradient target A + d equals the
// negated directional update (dA/dtheta)^T d; both routes evaluated.
CheckResult check_supervised_target_equivalence(uint64_t seed);

// Negative gradient of the scaled behavior-cloning loss with target
// A + alpha * dJ equals (dA/dtheta)^T dJ.
CheckResult check_bc_gradient_equivalence(uint64_t seed);

// With one perturbation and the return-std denominator replaced by the
// exploration std, the per-sample ascent direction matches the Gaussian
// log-likelihood policy-gradient direction term by term.
CheckResult check_reinforce_special_case(uint64_t seed);

// Reverse-mode gradients of random networks against central differences.
CheckResult check_autodiff_finite_diff(uint64_t seed);

VerificationReport run_verification(uint64_t seed);

bool all_passed(const VerificationReport& report);
void print_report(const VerificationReport& report, std::ostream& os);
void write_report_csv(const VerificationReport& report, const std::string& path);

}  // namespace sdpg::oracle
