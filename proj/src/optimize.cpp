#include "esag/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace esag {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sanitize(double v) { return std::isfinite(v) ? v : kInf; }

double relative_change(double before, double after) {
  return std::abs(before - after) / std::max(1.0, std::abs(after));
}

}  // namespace

MinimizeResult nelder_mead(const std::function<double(const Vector&)>& f,
                           const Vector& x0, const NelderMeadOptions& opts) {
  const Eigen::Index n = x0.size();
  MinimizeResult res;
  if (n == 0) {
    res.x = x0;
    res.value = sanitize(f(x0));
    res.converged = true;
    res.evaluations = 1;
    return res;
  }
  const double dn = static_cast<double>(n);
  const double reflect = 1.0;
  const double expand = 1.0 + 2.0 / dn;
  const double contract = 0.75 - 0.5 / dn;
  const double shrink = 1.0 - 1.0 / dn;

  std::vector<Vector> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (Eigen::Index j = 0; j < n; ++j) pts[j + 1](j) += opts.initial_step;
  auto eval = [&](const Vector& x) {
    ++res.evaluations;
    return sanitize(f(x));
  };
  for (Eigen::Index j = 0; j <= n; ++j) vals[j] = eval(pts[j]);

  std::vector<Eigen::Index> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return vals[a] < vals[b]; });
    std::vector<Vector> p2(n + 1);
    std::vector<double> v2(n + 1);
    for (Eigen::Index j = 0; j <= n; ++j) {
      p2[j] = std::move(pts[order[j]]);
      v2[j] = vals[order[j]];
    }
    pts.swap(p2);
    vals.swap(v2);
  };
  sort_simplex();

  double checkpoint = vals[0];
  Vector centroid(n);
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    if ((res.iterations + 1) % (n + 1) == 0) {
      if (std::isfinite(checkpoint) && relative_change(checkpoint, vals[0]) < opts.rel_tol &&
          relative_change(vals[0], vals[n]) < opts.rel_tol) {
        res.converged = true;
        break;
      }
      checkpoint = vals[0];
    }

    centroid.setZero();
    for (Eigen::Index j = 0; j < n; ++j) centroid += pts[j];
    centroid /= dn;

    const Vector xr = centroid + reflect * (centroid - pts[n]);
    const double fr = eval(xr);
    if (fr < vals[0]) {
      const Vector xe = centroid + expand * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[n] = xe;
        vals[n] = fe;
      } else {
        pts[n] = xr;
        vals[n] = fr;
      }
    } else if (fr < vals[n - 1]) {
      pts[n] = xr;
      vals[n] = fr;
    } else {
      const bool outside = fr < vals[n];
      const Vector xc = outside ? Vector(centroid + contract * (xr - centroid))
                                : Vector(centroid - contract * (centroid - pts[n]));
      const double fc = eval(xc);
      if ((outside && fc <= fr) || (!outside && fc < vals[n])) {
        pts[n] = xc;
        vals[n] = fc;
      } else {
        for (Eigen::Index j = 1; j <= n; ++j) {
          pts[j] = pts[0] + shrink * (pts[j] - pts[0]);
          vals[j] = eval(pts[j]);
        }
      }
    }
    sort_simplex();
  }
  res.x = pts[0];
  res.value = vals[0];
  return res;
}

MinimizeResult bfgs(const ValueGradient& fg, const Vector& x0,
                    const BfgsOptions& opts) {
  const Eigen::Index n = x0.size();
  MinimizeResult res;
  res.x = x0;
  Vector grad(n);
  res.value = sanitize(fg(res.x, grad));
  res.evaluations = 1;
  if (n == 0) {
    res.converged = true;
    return res;
  }
  if (!std::isfinite(res.value) || !grad.allFinite()) return res;

  Matrix hinv = Matrix::Identity(n, n);
  Vector x_new(n), g_new(n), dir(n), s(n), yv(n);
  int small_steps = 0;
  bool first = true;
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    if (grad.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      res.converged = true;
      break;
    }
    dir.noalias() = -hinv * grad;
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      dir = -grad;
      slope = grad.dot(dir);
    }
    // Keep the first trial step modest: the scale of the problem is unknown.
    double step = 1.0;
    if (first) step = std::min(1.0, 1.0 / std::max(1e-12, dir.lpNorm<Eigen::Infinity>()));
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = res.x + step * dir;
      f_new = sanitize(fg(x_new, g_new));
      ++res.evaluations;
      if (f_new <= res.value + 1e-4 * step * slope && g_new.allFinite()) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Line search failed along a quasi-Newton direction: retry once from
      // steepest descent before giving up.
      if (!hinv.isIdentity()) {
        hinv.setIdentity();
        continue;
      }
      break;
    }
    s = x_new - res.x;
    yv = g_new - grad;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (first) {
        hinv *= sy / yv.squaredNorm();
        first = false;
      }
      const double rho = 1.0 / sy;
      const Vector hy = hinv * yv;
      const double yhy = yv.dot(hy);
      hinv += (rho * rho * yhy + rho) * s * s.transpose() -
              rho * (hy * s.transpose() + s * hy.transpose());
    }
    const double change = relative_change(res.value, f_new);
    res.x = x_new;
    grad = g_new;
    res.value = f_new;
    small_steps = change < opts.rel_tol ? small_steps + 1 : 0;
    if (small_steps >= 2) {
      // Stalled on a kink or plateau; only call it converged near stationarity.
      res.converged = grad.lpNorm<Eigen::Infinity>() < 1e3 * opts.grad_tol;
      ++res.iterations;
      break;
    }
  }
  return res;
}

}  // namespace esag
