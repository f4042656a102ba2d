#pragma once

// Limited-memory BFGS with a strong-Wolfe line search (bracketing + zoom with
// safeguarded cubic interpolation). Non-finite objective values are treated
// as "too large" so the search backtracks away from them.

#include "togt/common.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace togt {

struct LbfgsParams {
  int memory = 8;
  int max_iterations = 3000;
  double grad_tolerance = 1e-6;  // on |g| / max(1, |f|)
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int stall_iterations = 20;
  double stall_decrease = 1e-10;  // on decrease / max(1, |f|)
  int max_line_search = 60;
  double max_step = 1e10;

  void validate() const {
    if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "require 0 < c1 < c2 < 1");
    }
    if (memory < 3) throw Error(ErrorCode::InvalidArgument, "L-BFGS memory must be >= 3");
    if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  }
};

enum class Termination { Converged, MaxIterations, LineSearchFailure };

inline const char *to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::MaxIterations: return "max_iter";
    case Termination::LineSearchFailure: return "line_search_failure";
  }
  return "unknown";
}

struct LbfgsResult {
  VecX x;
  double f = std::numeric_limits<double>::infinity();
  VecX gradient;
  int iterations = 0;
  int evaluations = 0;
  std::vector<double> trace;  // objective after each accepted step, starting with f(x0)
  Termination reason = Termination::MaxIterations;

  double grad_norm() const { return gradient.size() ? gradient.norm() : 0.0; }
};

namespace detail {

struct Trial {
  double alpha = 0.0;
  double f = 0.0;
  double df = 0.0;
  VecX x, g;
};

/// Minimizer of the cubic through (a, fa, da), (b, fb, db), clipped to the
/// inner 80% of the interval; bisection when the cubic is unusable.
inline double cubic_step(double a, double fa, double da, double b, double fb, double db) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double mid = 0.5 * (a + b);
  if (!std::isfinite(fb) || !std::isfinite(db)) return mid;
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (disc < 0.0) return mid;
  const double sgn = (b > a) ? 1.0 : -1.0;
  const double d2 = sgn * std::sqrt(disc);
  const double den = db - da + 2.0 * d2;
  if (den == 0.0) return mid;
  double t = b - (b - a) * ((db + d2 - d1) / den);
  const double pad = 0.1 * (hi - lo);
  if (!std::isfinite(t)) return mid;
  return std::clamp(t, lo + pad, hi - pad);
}

}  // namespace detail

/// fn(x, grad) -> f. Returns the best point found.
template <typename Fn>
LbfgsResult lbfgs_minimize(Fn &&fn, VecX x0, const LbfgsParams &params) {
  params.validate();
  LbfgsResult res;
  const Eigen::Index n = x0.size();
  VecX g(n);
  double f = fn(x0, g);
  res.evaluations = 1;
  res.x = x0;
  res.f = f;
  res.gradient = g;
  res.trace.push_back(f);
  if (!std::isfinite(f)) {
    res.reason = Termination::LineSearchFailure;
    return res;
  }

  std::deque<VecX> S, Y;
  std::deque<double> rho;
  VecX x = std::move(x0);
  int stall = 0;
  bool just_reset = false;

  auto evaluate = [&](double alpha, const VecX &dir, detail::Trial &t) {
    t.alpha = alpha;
    t.x = x + alpha * dir;
    t.g.resize(n);
    t.f = fn(t.x, t.g);
    ++res.evaluations;
    t.df = std::isfinite(t.f) ? t.g.dot(dir) : std::numeric_limits<double>::quiet_NaN();
  };

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    if (g.norm() / std::max(1.0, std::abs(f)) < params.grad_tolerance) {
      res.reason = Termination::Converged;
      return res;
    }

    // two-loop recursion
    VecX dir = -g;
    std::vector<double> alpha_h(S.size());
    for (int k = static_cast<int>(S.size()) - 1; k >= 0; --k) {
      alpha_h[static_cast<std::size_t>(k)] = rho[static_cast<std::size_t>(k)] * S[static_cast<std::size_t>(k)].dot(dir);
      dir -= alpha_h[static_cast<std::size_t>(k)] * Y[static_cast<std::size_t>(k)];
    }
    if (!S.empty()) dir *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double beta = rho[k] * Y[k].dot(dir);
      dir += S[k] * (alpha_h[k] - beta);
    }
    double df0 = g.dot(dir);
    if (!(df0 < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      dir = -g;
      df0 = g.dot(dir);
    }

    const double alpha0 = S.empty() ? std::min(1.0, 1.0 / dir.norm()) : 1.0;

    // strong-Wolfe search
    detail::Trial prev{0.0, f, df0, x, g};
    detail::Trial cur;
    detail::Trial accepted;
    bool found = false;
    bool have_armijo = false;  // fallback: a sufficient-decrease point
    detail::Trial best_armijo;

    auto armijo = [&](const detail::Trial &t) {
      return std::isfinite(t.f) && t.f <= f + params.wolfe_c1 * t.alpha * df0;
    };
    auto curvature = [&](const detail::Trial &t) {
      return std::abs(t.df) <= -params.wolfe_c2 * df0;
    };
    auto zoom = [&](detail::Trial lo, detail::Trial hi, int budget) {
      for (int z = 0; z < budget; ++z) {
        if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, lo.alpha)) return false;
        const double a = detail::cubic_step(lo.alpha, lo.f, lo.df, hi.alpha, hi.f, hi.df);
        detail::Trial t;
        evaluate(a, dir, t);
        if (!armijo(t) || t.f >= lo.f) {
          hi = std::move(t);
        } else {
          if (!have_armijo || t.f < best_armijo.f) {
            best_armijo = t;
            have_armijo = true;
          }
          if (curvature(t)) {
            accepted = std::move(t);
            return true;
          }
          if (t.df * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
          lo = std::move(t);
        }
      }
      return false;
    };

    double alpha = alpha0;
    for (int ls = 0; ls < params.max_line_search; ++ls) {
      evaluate(alpha, dir, cur);
      const int left = params.max_line_search - ls - 1;
      if (!armijo(cur) || (ls > 0 && cur.f >= prev.f)) {
        found = zoom(prev, cur, left);
        break;
      }
      if (!have_armijo || cur.f < best_armijo.f) {
        best_armijo = cur;
        have_armijo = true;
      }
      if (curvature(cur)) {
        accepted = cur;
        found = true;
        break;
      }
      if (cur.df >= 0.0) {
        found = zoom(cur, prev, left);
        break;
      }
      prev = cur;
      alpha = std::min(2.0 * alpha, params.max_step);
    }

    if (!found) {
      if (have_armijo) {
        accepted = best_armijo;
      } else if (!just_reset && !S.empty()) {
        S.clear();
        Y.clear();
        rho.clear();
        just_reset = true;
        continue;
      } else {
        res.reason = Termination::LineSearchFailure;
        return res;
      }
    }
    just_reset = false;

    const VecX s = accepted.x - x;
    const VecX y = accepted.g - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > params.memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }

    const double decrease = f - accepted.f;
    x = std::move(accepted.x);
    g = std::move(accepted.g);
    f = accepted.f;
    res.x = x;
    res.f = f;
    res.gradient = g;
    res.iterations = iter + 1;
    res.trace.push_back(f);

    stall = decrease < params.stall_decrease * std::max(1.0, std::abs(f)) ? stall + 1 : 0;
    if (stall >= params.stall_iterations) {
      res.reason = Termination::Converged;
      return res;
    }
  }
  res.reason = Termination::MaxIterations;
  return res;
}

}  // namespace togt
