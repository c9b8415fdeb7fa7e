#include "esag/special.hpp"

#include <cmath>
#include <numbers>

namespace esag {

namespace {

constexpr double kForwardThreshold = -2.0;
constexpr double kContinuedFractionThreshold = 6.0;
constexpr int kBackwardPadding = 200;

// Phi(-x)/phi(x) for x > 6 by Lentz evaluation of
// 1/(x + 1/(x + 2/(x + 3/(x + ...)))).
double mills_continued_fraction(double x) {
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int j = 1; j < 500; ++j) {
    d = x + j * d;
    if (d == 0.0) d = tiny;
    c = x + j / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / f;
}

}  // namespace

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double mills_ratio(double x) {
  if (x > kContinuedFractionThreshold) return mills_continued_fraction(x);
  return normal_cdf(-x) / normal_pdf(x);
}

MomentLog log_mnorm_moment(int k, double alpha) {
  if (alpha >= kForwardThreshold) {
    double prev = normal_cdf(alpha);
    if (k == 0) return {std::log(prev), normal_pdf(alpha) / prev};
    double cur = alpha * prev + normal_pdf(alpha);
    for (int j = 1; j < k; ++j) {
      const double next = alpha * cur + j * prev;
      prev = cur;
      cur = next;
    }
    return {std::log(cur), k * prev / cur};
  }

  // Backward (Miller) recursion for the minimal solution R_j, j <= k.
  const double log_phi = -0.5 * alpha * alpha - 0.5 * kLogTwoPi;
  const double r0 = mills_ratio(-alpha);
  if (k == 0) return {log_phi + std::log(r0), 1.0 / r0};

  const int top = k + kBackwardPadding;
  double upper = 0.0;    // R_{j+1}
  double cur = 1.0;      // R_j, arbitrary scale
  double rk = 0.0;
  double rkm1 = 0.0;
  for (int j = top; j >= 1; --j) {
    const double lower = (upper - alpha * cur) / j;  // R_{j-1}
    upper = cur;
    cur = lower;
    if (j - 1 == k) rk = cur;
    if (j - 1 == k - 1) rkm1 = cur;
    // The minimal solution can span hundreds of decades over the padding;
    // keep the running pair representable. Recorded values rescale with it.
    const double mag = std::abs(cur);
    if (mag > 1e200 || (mag < 1e-200 && mag > 0.0)) {
      const double f = mag > 1e200 ? 1e-200 : 1e200;
      upper *= f;
      cur *= f;
      rk *= f;
      rkm1 *= f;
    }
  }
  // cur is R_0 at the same scale as rk and rkm1.
  const double log_rk = std::log(r0) + std::log(rk / cur);
  return {log_phi + log_rk, k * rkm1 / rk};
}

double mnorm_moment(int k, double alpha) {
  return std::exp(log_mnorm_moment(k, alpha).log_value);
}

}  // namespace esag
