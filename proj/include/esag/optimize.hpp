#pragma once

#include <functional>

#include "esag/linalg.hpp"

namespace esag {

struct MinimizeResult {
  Vector x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
};

struct NelderMeadOptions {
  /// Converged once the best value improves by less than this relative
  /// amount over one full refresh of the simplex (n + 1 iterations).
  double rel_tol = 1e-8;
  int max_iterations = 5000;
  double initial_step = 0.25;
};

/// Adaptive Nelder-Mead (dimension-dependent coefficients) minimising f.
/// Non-finite values are treated as +infinity.
MinimizeResult nelder_mead(const std::function<double(const Vector&)>& f,
                           const Vector& x0, const NelderMeadOptions& opts = {});

struct BfgsOptions {
  double grad_tol = 1e-7;
  double rel_tol = 1e-8;
  int max_iterations = 1000;
};

/// Value-and-gradient callback; `grad` is always sized to x.
using ValueGradient = std::function<double(const Vector& x, Vector& grad)>;

/// BFGS with an Armijo backtracking line search. Converged when the
/// gradient's max-norm drops below grad_tol, or when successive accepted
/// steps improve the value by less than rel_tol (relative) twice in a row.
MinimizeResult bfgs(const ValueGradient& fg, const Vector& x0,
                    const BfgsOptions& opts = {});

}  // namespace esag
