#pragma once

#include <span>
#include <stdexcept>

namespace signbench {

struct StatsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TooFewSamples : StatsError {
  TooFewSamples() : StatsError("t-test needs at least two samples per side") {}
};

// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction,
// absolute error below 1e-10 on the tested domain.
double incomplete_beta_reg(double a, double b, double x);

// Two-sided survival probability of Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
// freedom. Identical zero-variance samples give t = 0, p = 1 by convention;
// zero variance with unequal means gives an infinite t and p = 0.
TTestResult two_sided_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace signbench
