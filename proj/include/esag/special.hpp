#pragma once

namespace esag {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

double normal_pdf(double x);
double normal_cdf(double x);

/// Phi(-x) / phi(x), the Mills ratio, accurate for all finite x.
double mills_ratio(double x);

/// log M_k(alpha) together with d/d(alpha) log M_k(alpha) = k M_{k-1} / M_k.
struct MomentLog {
  double log_value;
  double log_derivative;
};

/// M_k(alpha) = (2 pi)^{-1/2} \int_0^\infty t^k exp(-(t - alpha)^2 / 2) dt.
///
/// For alpha >= -2 the forward recurrence M_{k+1} = alpha M_k + k M_{k-1}
/// is used directly. Below that the forward direction cancels, so the
/// scaled sequence R_k = M_k / phi(alpha) is taken as the minimal solution
/// of the same recurrence (backward recursion, normalised by R_0 = Mills
/// ratio, itself a continued fraction once alpha < -6).
MomentLog log_mnorm_moment(int k, double alpha);

double mnorm_moment(int k, double alpha);

}  // namespace esag
