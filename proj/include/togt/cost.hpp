#pragma once

// Objective: total duration plus a sampled cubic-hinge penalty on the
// state-input constraint residuals, with exact gradients with respect to the
// spline coefficients and durations, chained back to the decision vector.

#include "togt/gates.hpp"
#include "togt/model.hpp"
#include "togt/spline.hpp"

#include <ceres/jet.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace togt {

struct SamplingConfig {
  int min_samples_per_segment = 8;
  double target_dt = 0.01;  // s

  void validate() const {
    if (min_samples_per_segment < 4) {
      throw Error(ErrorCode::InvalidArgument, "min_samples_per_segment must be >= 4");
    }
    if (!(target_dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "target_dt must be > 0");
  }

  int samples(double duration) const {
    const double k = std::ceil(duration / target_dt);
    return std::max(min_samples_per_segment, static_cast<int>(std::min(k, 1e7)));
  }
};

/// Weights applied to the cubed normalized residuals. Thrust residuals are
/// divided by (f_max - f_min), body-rate residuals by omega_max.
/// `bound_tightening` is added to every normalized residual, so the penalty
/// starts acting that far inside the true limits.
struct PenaltyWeights {
  double thrust_weight = 1e7;
  double body_rate_weight = 1e7;
  double bound_tightening = 1e-3;

  void validate() const {
    if (!(thrust_weight > 0.0) || !(body_rate_weight > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "penalty weights must be > 0");
    }
    if (!(bound_tightening >= 0.0 && bound_tightening < 0.5)) {
      throw Error(ErrorCode::InvalidArgument, "bound_tightening must be in [0, 0.5)");
    }
  }
};

/// Largest normalized residual per constraint group over all samples
/// (negative means a strict margin).
struct ViolationSummary {
  double thrust_low = -std::numeric_limits<double>::infinity();
  double thrust_high = -std::numeric_limits<double>::infinity();
  double body_rate = -std::numeric_limits<double>::infinity();

  double worst() const { return std::max({thrust_low, thrust_high, body_rate}); }
};

struct PenaltyResult {
  double value = 0.0;
  MatX dJ_dC;
  VecX dJ_dT;
  ViolationSummary max_violation;
  bool singular = false;
};

namespace detail {

inline constexpr int kFlatInputDim = 12;
using FlatJet = ceres::Jet<double, kFlatInputDim>;

/// Residuals and their Jacobian with respect to
/// (acc[3], jerk[3], snap[3], psi, dpsi, ddpsi).
inline bool residual_jacobian(const FlatSample &s, const QuadParams &params,
                              Eigen::Matrix<double, kNumResiduals, 1> &r,
                              Eigen::Matrix<double, kNumResiduals, kFlatInputDim> &jac) {
  FlatInput<FlatJet> in;
  for (int k = 0; k < 3; ++k) {
    in.acc(k) = FlatJet(s[2](k), k);
    in.jerk(k) = FlatJet(s[3](k), 3 + k);
    in.snap(k) = FlatJet(s[4](k), 6 + k);
  }
  in.psi = FlatJet(s[0](3), 9);
  in.dpsi = FlatJet(s[1](3), 10);
  in.ddpsi = FlatJet(s[2](3), 11);
  Eigen::Matrix<FlatJet, kNumResiduals, 1> rj;
  if (!flat_residuals(in, params, rj)) return false;
  for (int i = 0; i < kNumResiduals; ++i) {
    r(i) = rj(i).a;
    jac.row(i) = rj(i).v.transpose();
  }
  return true;
}

}  // namespace detail

/// Sampled penalty sum_i sum_j node_j dt_i sum_k w_k max(h_k, 0)^3 with
/// trapezoid end weights; gradients are exact for a fixed sample count.
/// `counts`, when non-empty, overrides the per-segment sample counts.
inline PenaltyResult penalty(const TrajectorySpline &spline, const QuadParams &params,
                             const SamplingConfig &scfg, const PenaltyWeights &w,
                             const std::vector<int> &counts = {}) {
  const int nc = spline.num_coeffs();
  const int segs = spline.num_segments();
  PenaltyResult out;
  out.dJ_dC = MatX::Zero(spline.coefficients().rows(), 4);
  out.dJ_dT = VecX::Zero(segs);

  Eigen::Matrix<double, kNumResiduals, 1> scale;
  const double range = params.f_max - params.f_min;
  for (int i = 0; i < 8; ++i) scale(i) = 1.0 / range;
  for (int j = 0; j < 3; ++j) {
    scale(8 + j) = 1.0 / params.omega_max(j);
    scale(11 + j) = 1.0 / params.omega_max(j);
  }
  Eigen::Matrix<double, kNumResiduals, 1> weight;
  weight.head<8>().setConstant(w.thrust_weight);
  weight.tail<6>().setConstant(w.body_rate_weight);

  constexpr int kOrders = kMaxSampleOrder + 1;
  MatX beta(nc, kOrders);
  Eigen::Matrix<double, kNumResiduals, 1> r;
  Eigen::Matrix<double, kNumResiduals, detail::kFlatInputDim> jac;
  FlatSample sample;
  sample.max_order = kMaxSampleOrder;

  if (!counts.empty() && static_cast<int>(counts.size()) != segs) {
    throw Error(ErrorCode::DimensionMismatch, "sample counts do not match the segment count");
  }
  for (int i = 0; i < segs; ++i) {
    const double Ti = spline.durations()(i);
    const int kappa = counts.empty() ? scfg.samples(Ti) : counts[static_cast<std::size_t>(i)];
    const double dt = Ti / kappa;
    const auto c = spline.segment_coeffs(i);
    auto grad_c = out.dJ_dC.middleRows(static_cast<Eigen::Index>(i) * nc, nc);

    for (int j = 0; j <= kappa; ++j) {
      const double tau = j * dt;
      for (int d = 0; d < kOrders; ++d) detail::power_basis(nc, d, tau, beta.col(d).data());
      for (int d = 0; d < kOrders; ++d) sample[d] = c.transpose() * beta.col(d);

      if (!detail::residual_jacobian(sample, params, r, jac)) {
        out.singular = true;
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
      const Eigen::Matrix<double, kNumResiduals, 1> raw = r.cwiseProduct(scale);
      out.max_violation.thrust_low = std::max(out.max_violation.thrust_low, raw.head<4>().maxCoeff());
      out.max_violation.thrust_high =
          std::max(out.max_violation.thrust_high, raw.segment<4>(4).maxCoeff());
      out.max_violation.body_rate = std::max(out.max_violation.body_rate, raw.tail<6>().maxCoeff());
      const Eigen::Matrix<double, kNumResiduals, 1> h = raw.array() + w.bound_tightening;

      double value = 0.0;
      Eigen::Matrix<double, detail::kFlatInputDim, 1> gu =
          Eigen::Matrix<double, detail::kFlatInputDim, 1>::Zero();
      for (int k = 0; k < kNumResiduals; ++k) {
        if (h(k) <= 0.0) continue;
        value += weight(k) * h(k) * h(k) * h(k);
        gu += (3.0 * weight(k) * h(k) * h(k) * scale(k)) * jac.row(k).transpose();
      }
      if (value == 0.0) continue;

      const double node = (j == 0 || j == kappa) ? 0.5 : 1.0;
      std::array<Vec4, kOrders> g{};
      g.fill(Vec4::Zero());
      g[2].head<3>() = gu.segment<3>(0);
      g[3].head<3>() = gu.segment<3>(3);
      g[4].head<3>() = gu.segment<3>(6);
      g[0](3) = gu(9);
      g[1](3) = gu(10);
      g[2](3) += gu(11);

      double dtau = 0.0;  // d(value)/d(tau) along the sample
      for (int d = 0; d < kOrders; ++d) {
        if (g[static_cast<std::size_t>(d)].isZero(0.0)) continue;
        grad_c.noalias() += (node * dt) * beta.col(d) * g[static_cast<std::size_t>(d)].transpose();
        if (d + 1 < kOrders) dtau += g[static_cast<std::size_t>(d)].dot(sample[d + 1]);
      }
      out.value += node * dt * value;
      out.dJ_dT(i) += node * dt * dtau * (static_cast<double>(j) / kappa) + node * value / kappa;
    }
  }
  return out;
}

struct CostReport {
  double total = 0.0;
  double time_term = 0.0;
  double penalty_term = 0.0;
  ViolationSummary max_violation;
  VecX gradient;  // flattened [D; K]
  bool ok = true;
};

/// Everything that defines one planning problem except the decision vector.
struct Problem {
  GateSequence gates;
  QuadParams params;
  Vec3 start = Vec3::Zero();
  Vec3 finish = Vec3::Zero();
  SplineConfig spline;
  SamplingConfig sampling;
  PenaltyWeights weights;

  BoundaryCondition start_bc() const { return BoundaryCondition::hover(start, spline.s); }
  BoundaryCondition finish_bc() const { return BoundaryCondition::hover(finish, spline.s); }

  void validate() const {
    gates.validate();
    params.validate();
    spline.validate();
    sampling.validate();
    weights.validate();
  }
};

/// Evaluates the objective and its gradient. Spline construction and
/// singular samples report ok = false with total = +inf.
class Objective {
 public:
  explicit Objective(const Problem &problem) : problem_(problem) {}

  CostReport evaluate(const DecisionVector &dec, bool with_gradient = true) {
    CostReport rep;
    const Decoded dc = decode(problem_.gates, dec);
    try {
      minco_.construct(dc.waypoints, dc.T, problem_.start_bc(), problem_.finish_bc(),
                       problem_.spline);
    } catch (const Error &) {
      return failure(dec);
    }
    const PenaltyResult pen = penalty(minco_.spline(), problem_.params, problem_.sampling,
                                      problem_.weights, counts_);
    if (pen.singular) return failure(dec);

    rep.time_term = dc.T.sum();
    rep.penalty_term = pen.value;
    rep.total = rep.time_term + rep.penalty_term;
    rep.max_violation = pen.max_violation;
    if (!with_gradient) return rep;

    SplineGradient sg = minco_.propagate_gradients(pen.dJ_dC, pen.dJ_dT);
    sg.dJ_dT.array() += 1.0;
    rep.gradient.resize(dec.size());
    for (std::size_t i = 0; i < dec.offsets.size(); ++i) {
      const auto &r = dec.offsets[i];
      rep.gradient.segment(r.offset, r.size) =
          dc.jacobians[i].transpose() * sg.dJ_dP.col(static_cast<Eigen::Index>(i));
    }
    rep.gradient.tail(dec.K.size()) = sg.dJ_dT.cwiseProduct(dc.dT_dK);
    return rep;
  }

  /// Flat-vector form for the optimizer.
  double operator()(const VecX &x, VecX &grad) {
    if (layout_.offsets.empty()) layout_ = DecisionVector::zeros(problem_.gates);
    layout_.assign(x);
    CostReport rep = evaluate(layout_);
    grad = rep.ok ? rep.gradient : VecX::Zero(x.size());
    return rep.total;
  }

  /// Pins the per-segment sample counts to those implied by `dec`, which
  /// keeps the objective smooth while the durations move. An empty
  /// DecisionVector restores the duration-dependent counts.
  void freeze_sampling(const DecisionVector &dec) {
    counts_.clear();
    if (dec.K.size() == 0) return;
    const Decoded dc = decode(problem_.gates, dec);
    for (Eigen::Index i = 0; i < dc.T.size(); ++i) counts_.push_back(problem_.sampling.samples(dc.T(i)));
  }

  const Problem &problem() const { return problem_; }
  const Minco &minco() const { return minco_; }

 private:
  static CostReport failure(const DecisionVector &dec) {
    CostReport rep;
    rep.ok = false;
    rep.total = std::numeric_limits<double>::infinity();
    rep.gradient = VecX::Zero(dec.size());
    return rep;
  }

  Problem problem_;
  Minco minco_;
  DecisionVector layout_;
  std::vector<int> counts_;
};

}  // namespace togt
