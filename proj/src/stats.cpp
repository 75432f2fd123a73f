#include "signbench/stats.hpp"

#include <cmath>
#include <limits>

namespace signbench {

namespace {

constexpr double kTiny = 1.0e-30;
constexpr double kStop = 1.0e-12;

double betacf(double a, double b, double x) {
  // Lentz's algorithm on the standard continued fraction expansion.
  double f = 1.0, c = 1.0, d = 0.0;
  for (int i = 0; i <= 500; ++i) {
    const int m = i / 2;
    double numerator;
    if (i == 0)
      numerator = 1.0;
    else if (i % 2 == 1)
      numerator = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
    else
      numerator = (m * (b - m) * x) / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));

    d = 1.0 + numerator * d;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    c = 1.0 + numerator / c;
    if (std::abs(c) < kTiny) c = kTiny;
    const double cd = c * d;
    f *= cd;
    if (std::abs(1.0 - cd) < kStop) return f - 1.0;
  }
  throw StatsError("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta_reg(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw StatsError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // The fraction converges fast for x below the mean; use symmetry otherwise.
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta_reg(b, a, 1.0 - x);
  const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta) / a;
  return front * betacf(a, b, x);
}

double student_t_two_sided_p(double t, double df) {
  if (t == 0.0) return 1.0;
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return incomplete_beta_reg(df / 2.0, 0.5, x);
}

TTestResult two_sided_t_test(std::span<const double> a, std::span<const double> b) {
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  if (a.size() < 2 || b.size() < 2) throw TooFewSamples();

  double mean_a = 0.0, mean_b = 0.0;
  for (double v : a) mean_a += v;
  for (double v : b) mean_b += v;
  mean_a /= na;
  mean_b /= nb;

  double var_a = 0.0, var_b = 0.0;
  for (double v : a) var_a += (v - mean_a) * (v - mean_a);
  for (double v : b) var_b += (v - mean_b) * (v - mean_b);
  var_a /= na - 1.0;
  var_b /= nb - 1.0;

  TTestResult result;
  const double se2 = var_a / na + var_b / nb;
  if (se2 == 0.0) {
    // Degenerate: both samples constant.
    result.df = na + nb - 2.0;
    if (mean_a == mean_b) {
      result.t = 0.0;
      result.p = 1.0;
    } else {
      result.t = (mean_a > mean_b) ? std::numeric_limits<double>::infinity()
                                   : -std::numeric_limits<double>::infinity();
      result.p = 0.0;
    }
    return result;
  }
  result.t = (mean_a - mean_b) / std::sqrt(se2);
  result.df = se2 * se2 /
              (var_a * var_a / (na * na * (na - 1.0)) +
               var_b * var_b / (nb * nb * (nb - 1.0)));
  result.p = student_t_two_sided_p(result.t, result.df);
  return result;
}

}  // namespace signbench
