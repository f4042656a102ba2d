#pragma once

// Minimum-control piecewise polynomials (MINCO). For smoothness order s each
// of the L+1 pieces is a degree 2s-1 polynomial in local time; boundary
// derivatives 0..s-1, interior waypoint interpolation and C^{2s-2} continuity
// form one banded system whose unique solution minimizes the integral of
// |y^(s)|^2. The factorization is kept for the adjoint (gradient) solve.

#include "togt/banded.hpp"
#include "togt/common.hpp"
#include "togt/model.hpp"

#include <algorithm>
#include <vector>

namespace togt {

inline constexpr double kMaxSegmentDuration = 60.0;

struct SplineConfig {
  int s = 3;  // minimum-jerk: degree-5 pieces

  int num_coeffs() const { return 2 * s; }
  int degree() const { return 2 * s - 1; }

  void validate() const {
    if (s < 2) throw Error(ErrorCode::InvalidArgument, "smoothness order s must be >= 2");
  }
};

/// Flat-output value and derivatives 1..s-1 at an endpoint.
struct BoundaryCondition {
  std::vector<Vec4> derivatives;

  static BoundaryCondition hover(const Vec3 &position, int s, double yaw = 0.0) {
    BoundaryCondition bc;
    bc.derivatives.assign(static_cast<std::size_t>(s), Vec4::Zero());
    bc.derivatives[0] << position, yaw;
    return bc;
  }
};

namespace detail {

/// d-th derivative of the power basis [1, t, ..., t^(n-1)].
inline void power_basis(int n, int d, double t, double *out) {
  for (int k = 0; k < n; ++k) {
    if (k < d) {
      out[k] = 0.0;
      continue;
    }
    double c = 1.0;
    for (int j = k - d + 1; j <= k; ++j) c *= j;
    double p = 1.0;
    for (int j = 0; j < k - d; ++j) p *= t;
    out[k] = c * p;
  }
}

inline double factorial(int k) {
  double f = 1.0;
  for (int j = 2; j <= k; ++j) f *= j;
  return f;
}

}  // namespace detail

/// Piecewise polynomial flat output. Segment i occupies coefficient rows
/// [2s i, 2s i + 2s) of `coefficients`; columns are x, y, z, psi.
class TrajectorySpline {
 public:
  TrajectorySpline() = default;
  TrajectorySpline(int s, VecX durations, MatX coefficients, Eigen::Matrix3Xd waypoints)
      : s_(s),
        durations_(std::move(durations)),
        coefficients_(std::move(coefficients)),
        waypoints_(std::move(waypoints)) {
    starts_.resize(durations_.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < durations_.size(); ++i) {
      starts_(i) = acc;
      acc += durations_(i);
    }
    total_ = acc;
  }

  int s() const { return s_; }
  int num_coeffs() const { return 2 * s_; }
  int num_segments() const { return static_cast<int>(durations_.size()); }
  const VecX &durations() const { return durations_; }
  const MatX &coefficients() const { return coefficients_; }
  const Eigen::Matrix3Xd &waypoints() const { return waypoints_; }
  double total_duration() const { return total_; }
  double segment_start(int i) const { return starts_(i); }

  auto segment_coeffs(int i) const {
    return coefficients_.middleRows(static_cast<Eigen::Index>(i) * num_coeffs(), num_coeffs());
  }

  /// Time at which waypoint i (0-based) is reached.
  double traversal_time(int i) const { return starts_(i + 1); }

  /// Derivative `order` of segment i at local time tau.
  Vec4 segment_derivative(int i, double tau, int order) const {
    const int n = num_coeffs();
    if (order >= n) return Vec4::Zero();
    Eigen::VectorXd beta(n);
    detail::power_basis(n, order, tau, beta.data());
    return segment_coeffs(i).transpose() * beta;
  }

  FlatSample eval_segment(int i, double tau, int max_order) const {
    FlatSample s;
    s.max_order = std::min(max_order, kMaxSampleOrder);
    for (int d = 0; d <= s.max_order; ++d) s[d] = segment_derivative(i, tau, d);
    return s;
  }

  /// Locates the segment containing t (junctions belong to the later one).
  std::pair<int, double> locate(double t) const {
    if (!(t >= 0.0) || t > total_ * (1.0 + 1e-12) + 1e-12) {
      throw Error(ErrorCode::OutOfDomain, "time outside [0, total duration]");
    }
    const auto *begin = starts_.data();
    const auto *end = starts_.data() + starts_.size();
    int i = static_cast<int>(std::upper_bound(begin, end, t) - begin) - 1;
    i = std::clamp(i, 0, num_segments() - 1);
    const double tau = std::min(t - starts_(i), durations_(i));
    return {i, tau};
  }

  FlatSample eval(double t, int max_order) const {
    const auto [i, tau] = locate(t);
    return eval_segment(i, tau, max_order);
  }

 private:
  int s_ = 3;
  VecX durations_;
  VecX starts_;
  MatX coefficients_;
  Eigen::Matrix3Xd waypoints_;
  double total_ = 0.0;
};

/// One MINCO linear system shared by several flat dimensions. With
/// interpolation, junction rows pin positions to waypoints; without it the
/// waypoint row is replaced by continuity of derivative 2s-1.
class MincoSystem {
 public:
  void construct(int s, bool interpolate, const VecX &T, const MatX &head, const MatX &tail,
                 const MatX *waypoints) {
    s_ = s;
    interpolate_ = interpolate;
    L_ = static_cast<int>(T.size()) - 1;
    const int nc = 2 * s;
    const int n = nc * (L_ + 1);
    const int m = static_cast<int>(head.cols());
    T_ = T;
    lu_.reset(n, 3 * s - 1, s);
    MatX rhs = MatX::Zero(n, m);

    std::vector<double> beta(static_cast<std::size_t>(nc));
    for (int k = 0; k < s; ++k) {
      lu_(k, k) = detail::factorial(k);
      rhs.row(k) = head.row(k);
    }
    for (int i = 0; i < L_; ++i) {
      const int r0 = s + nc * i;
      const int c0 = nc * i;
      const int c1 = nc * (i + 1);
      for (int k = 0; k < nc; ++k) {
        const int r = r0 + k;
        int d;
        if (interpolate && k == 0) {
          d = 0;
          rhs.row(r) = waypoints->row(i);
        } else {
          d = interpolate ? k - 1 : k;
          lu_(r, c1 + d) = -detail::factorial(d);
        }
        detail::power_basis(nc, d, T(i), beta.data());
        for (int j = d; j < nc; ++j) lu_(r, c0 + j) = beta[static_cast<std::size_t>(j)];
      }
    }
    for (int k = 0; k < s; ++k) {
      const int r = s + nc * L_ + k;
      detail::power_basis(nc, k, T(L_), beta.data());
      for (int j = k; j < nc; ++j) lu_(r, nc * L_ + j) = beta[static_cast<std::size_t>(j)];
      rhs.row(r) = tail.row(k);
    }
    lu_.factorize();
    lu_.solve(rhs);
    coeffs_ = std::move(rhs);
  }

  const MatX &coeffs() const { return coeffs_; }

  /// Adjoint of M(T) c = b(P). Adds -lambda^T (dM/dT_k) c to grad_T and
  /// returns dJ/dP (rows = waypoints) when interpolating.
  MatX propagate(const MatX &grad_c, VecX &grad_T) const {
    const int nc = 2 * s_;
    MatX lambda = grad_c;
    lu_.solve_transpose(lambda);
    const int m = static_cast<int>(coeffs_.cols());
    std::vector<double> beta(static_cast<std::size_t>(nc));

    auto seg_deriv = [&](int i, int d) {
      Eigen::RowVectorXd y = Eigen::RowVectorXd::Zero(m);
      if (d >= nc) return y;
      detail::power_basis(nc, d, T_(i), beta.data());
      for (int j = d; j < nc; ++j) {
        y += beta[static_cast<std::size_t>(j)] * coeffs_.row(nc * i + j);
      }
      return y;
    };

    for (int i = 0; i < L_; ++i) {
      const int r0 = s_ + nc * i;
      double acc = 0.0;
      for (int k = 0; k < nc; ++k) {
        const int d = (interpolate_ && k == 0) ? 0 : (interpolate_ ? k - 1 : k);
        acc += lambda.row(r0 + k).dot(seg_deriv(i, d + 1));
      }
      grad_T(i) -= acc;
    }
    double acc = 0.0;
    for (int k = 0; k < s_; ++k) {
      acc += lambda.row(s_ + nc * L_ + k).dot(seg_deriv(L_, k + 1));
    }
    grad_T(L_) -= acc;

    MatX grad_p;
    if (interpolate_) {
      grad_p.resize(L_, m);
      for (int i = 0; i < L_; ++i) grad_p.row(i) = lambda.row(s_ + nc * i);
    }
    return grad_p;
  }

  const BandedLU &factorization() const { return lu_; }

 private:
  int s_ = 3;
  int L_ = 0;
  bool interpolate_ = true;
  VecX T_;
  BandedLU lu_;
  MatX coeffs_;
};

struct SplineGradient {
  Eigen::Matrix3Xd dJ_dP;  // one column per waypoint
  VecX dJ_dT;
};

/// Position channels interpolate the waypoints; yaw has boundary conditions
/// only, so it vanishes identically under hover boundaries.
class Minco {
 public:
  void construct(const Eigen::Matrix3Xd &P, const VecX &T, const BoundaryCondition &bc0,
                 const BoundaryCondition &bcf, const SplineConfig &cfg = {}) {
    cfg.validate();
    const int s = cfg.s;
    if (T.size() != P.cols() + 1) {
      throw Error(ErrorCode::DimensionMismatch, "durations must number waypoints + 1");
    }
    if (static_cast<int>(bc0.derivatives.size()) != s ||
        static_cast<int>(bcf.derivatives.size()) != s) {
      throw Error(ErrorCode::DimensionMismatch, "boundary conditions need s derivatives");
    }
    for (Eigen::Index k = 0; k < T.size(); ++k) {
      if (!(T(k) > 0.0)) throw Error(ErrorCode::InvalidArgument, "durations must be positive");
      if (T(k) > kMaxSegmentDuration) {
        throw Error(ErrorCode::InvalidArgument, "segment duration exceeds 60 s");
      }
    }
    MatX head(s, 4), tail(s, 4);
    for (int k = 0; k < s; ++k) {
      head.row(k) = bc0.derivatives[static_cast<std::size_t>(k)].transpose();
      tail.row(k) = bcf.derivatives[static_cast<std::size_t>(k)].transpose();
    }
    const MatX wp = P.transpose();
    position_.construct(s, true, T, head.leftCols(3), tail.leftCols(3), &wp);
    yaw_.construct(s, false, T, head.rightCols(1), tail.rightCols(1), nullptr);

    MatX coeffs(position_.coeffs().rows(), 4);
    coeffs << position_.coeffs(), yaw_.coeffs();
    spline_ = TrajectorySpline(s, T, std::move(coeffs), P);
  }

  const TrajectorySpline &spline() const { return spline_; }

  /// Chain rule from coefficient and direct duration gradients to (P, T).
  SplineGradient propagate_gradients(const MatX &dJ_dC, const VecX &dJ_dT_direct) const {
    if (dJ_dC.rows() != spline_.coefficients().rows() || dJ_dC.cols() != 4 ||
        dJ_dT_direct.size() != spline_.durations().size()) {
      throw Error(ErrorCode::DimensionMismatch, "gradient shapes do not match spline");
    }
    SplineGradient g;
    g.dJ_dT = dJ_dT_direct;
    const MatX gp = position_.propagate(dJ_dC.leftCols(3), g.dJ_dT);
    yaw_.propagate(dJ_dC.rightCols(1), g.dJ_dT);
    g.dJ_dP = gp.transpose();
    return g;
  }

  const MincoSystem &position_system() const { return position_; }

 private:
  MincoSystem position_;
  MincoSystem yaw_;
  TrajectorySpline spline_;
};

inline TrajectorySpline construct(const Eigen::Matrix3Xd &P, const VecX &T,
                                  const BoundaryCondition &bc0, const BoundaryCondition &bcf,
                                  const SplineConfig &cfg = {}) {
  Minco m;
  m.construct(P, T, bc0, bcf, cfg);
  return m.spline();
}

}  // namespace togt
