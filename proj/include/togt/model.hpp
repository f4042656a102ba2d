#pragma once

// Quadrotor rigid-body model and the differential-flatness maps from the flat
// output y = [p, psi] and its time derivatives to state, rotor thrusts and
// the state-input constraint residuals.

#include "togt/common.hpp"

#include <Eigen/Geometry>

#include <array>
#include <cmath>

namespace togt {

/// Flatness maps raise SingularFlatness below this norm.
inline constexpr double kSingularityEps = 1e-6;

/// Highest flat-output derivative a FlatSample can carry (crackle). The maps
/// themselves consume derivatives up to snap.
inline constexpr int kMaxSampleOrder = 5;

/// Length of the state-input residual vector.
inline constexpr int kNumResiduals = 14;

struct QuadParams {
  double mass = 0.0;          // kg
  double arm_length = 0.0;    // m
  Vec3 inertia_diag = Vec3::Zero();  // kg m^2
  double torque_const = 0.0;
  double f_min = 0.0;         // N per rotor
  double f_max = 0.0;         // N per rotor
  Vec3 omega_max = Vec3::Zero();     // rad/s per body axis
  Vec3 gravity{0.0, 0.0, -9.81};

  void validate() const {
    auto fail = [](const std::string &msg) { throw Error(ErrorCode::ValidationError, msg); };
    if (!(mass > 0.0)) fail("mass must be positive");
    if (!(arm_length > 0.0)) fail("arm_length must be positive");
    if (!(inertia_diag.minCoeff() > 0.0)) fail("inertia_diag entries must be positive");
    if (!(torque_const > 0.0)) fail("torque_const must be positive");
    if (!(f_min >= 0.0 && f_min < f_max)) fail("rotor limits must satisfy 0 <= f_min < f_max");
    if (!(omega_max.minCoeff() > 0.0)) fail("omega_max entries must be positive");
    if (!gravity.allFinite()) fail("gravity must be finite");
    if (!(4.0 * f_max > mass * gravity.norm())) fail("hover infeasible: 4 f_max <= m |g|");
  }

  /// Inertia expressed in g m^2, as commonly tabulated.
  static Vec3 inertia_from_gram_m2(const Vec3 &j) { return j * 1e-3; }

  static QuadParams quad_a() {
    QuadParams q;
    q.mass = 0.85;
    q.arm_length = 0.15;
    q.inertia_diag = inertia_from_gram_m2(Vec3(1.0, 1.0, 1.7));
    q.torque_const = 0.05;
    q.f_max = 6.88;
    q.omega_max = Vec3(15.0, 15.0, 3.0);
    return q;
  }

  static QuadParams quad_b() {
    QuadParams q;
    q.mass = 1.05;
    q.arm_length = 0.125;
    q.inertia_diag = inertia_from_gram_m2(Vec3(2.5, 2.1, 4.3));
    q.torque_const = 0.022;
    q.f_max = 6.375;
    q.omega_max = Vec3(8.0, 8.0, 3.0);
    return q;
  }
};

struct QuadState {
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();  // world <- body
  Vec3 velocity = Vec3::Zero();
  Vec3 body_rate = Vec3::Zero();
};

/// Layout: position(3), quaternion w,x,y,z (4), velocity(3), body rate(3).
using StateVector = Eigen::Matrix<double, 13, 1>;

inline StateVector to_vector(const QuadState &s) {
  StateVector x;
  x << s.position, s.attitude.w(), s.attitude.x(), s.attitude.y(), s.attitude.z(), s.velocity,
      s.body_rate;
  return x;
}

inline QuadState from_vector(const StateVector &x) {
  QuadState s;
  s.position = x.segment<3>(0);
  s.attitude = Eigen::Quaterniond(x(3), x(4), x(5), x(6));
  s.velocity = x.segment<3>(7);
  s.body_rate = x.segment<3>(10);
  return s;
}

struct RotorThrusts {
  Vec4 f = Vec4::Zero();
};

/// Flat output [x, y, z, psi] and its derivatives at one instant, orders
/// 0..max_order. Entries above max_order are zero.
struct FlatSample {
  std::array<Vec4, kMaxSampleOrder + 1> derivatives{};
  int max_order = 0;

  FlatSample() { derivatives.fill(Vec4::Zero()); }

  const Vec4 &operator[](int order) const { return derivatives[static_cast<std::size_t>(order)]; }
  Vec4 &operator[](int order) { return derivatives[static_cast<std::size_t>(order)]; }

  static FlatSample rest(const Vec3 &position, double yaw = 0.0, int max_order = 4) {
    FlatSample s;
    s.max_order = max_order;
    s[0] << position, yaw;
    return s;
  }
};

struct Wrench {
  double collective_thrust = 0.0;
  Vec3 torque = Vec3::Zero();
};

inline Wrench mixer_forward(const RotorThrusts &u, const QuadParams &params) {
  const Vec4 &f = u.f;
  const double l = params.arm_length;
  const double c = params.torque_const;
  Wrench w;
  w.collective_thrust = f.sum();
  w.torque << l * (f(0) + f(1) - f(2) - f(3)), l * (-f(0) + f(1) + f(2) - f(3)),
      c * (f(0) - f(1) + f(2) - f(3));
  return w;
}

namespace detail {

// The mixer rows are mutually orthogonal, so the inverse is the transpose
// scaled by the squared row norms.
template <typename T>
Eigen::Matrix<T, 4, 1> mixer_inverse(const T &thrust, const Eigen::Matrix<T, 3, 1> &tau,
                                      double l, double c) {
  const T a = thrust / 4.0;
  const T bx = tau(0) / (4.0 * l);
  const T by = tau(1) / (4.0 * l);
  const T bz = tau(2) / (4.0 * c);
  Eigen::Matrix<T, 4, 1> f;
  f << a + bx - by + bz, a + bx + by - bz, a - bx + by + bz, a - bx - by - bz;
  return f;
}

inline double scalar_value(double x) { return x; }
template <typename J>
auto scalar_value(const J &x) -> decltype(x.a) {
  return x.a;
}

template <typename T>
using Vec3T = Eigen::Matrix<T, 3, 1>;

/// Inputs of the flatness maps beyond position/velocity.
template <typename T>
struct FlatInput {
  Vec3T<T> acc, jerk, snap;
  T psi, dpsi, ddpsi;
};

template <typename T>
struct FlatAttitude {
  Eigen::Matrix<T, 3, 3> rotation;  // columns x_B, y_B, z_B in world frame
  Vec3T<T> omega;                   // body frame
  Vec3T<T> domega;                  // body frame, only when requested
  T specific_thrust;                // |a - g|
};

/// Body frame: z_B along a - g, x_B from the heading x_C = [cos psi, sin psi, 0].
/// Rates follow from R^T dR/dt; angular acceleration from differentiating them
/// once more with snap and yaw acceleration. Returns false near singularities.
template <typename T>
bool flat_attitude(const FlatInput<T> &in, const Vec3 &gravity, bool with_domega,
                   FlatAttitude<T> &out) {
  using std::cos;
  using std::sin;
  const Vec3T<T> f = in.acc - gravity.cast<T>();
  const T n = f.norm();
  if (!(scalar_value(n) > kSingularityEps)) return false;
  const Vec3T<T> z = f / n;

  Vec3T<T> xc, yc;
  const T cp = cos(in.psi);
  const T sp = sin(in.psi);
  xc << cp, sp, T(0.0);
  yc << -sp, cp, T(0.0);

  const Vec3T<T> w = z.cross(xc);
  const T c = w.norm();
  if (!(scalar_value(c) > kSingularityEps)) return false;
  const Vec3T<T> y = w / c;
  const Vec3T<T> x = y.cross(z);

  const T zj = z.dot(in.jerk);
  const Vec3T<T> dz = (in.jerk - z * zj) / n;

  const T zxc = z.dot(xc);
  const T yyc = y.dot(yc);
  const T wx = -y.dot(dz);
  const T wy = x.dot(dz);
  const T wz = (in.dpsi * yyc + wx * zxc) / c;

  out.rotation.col(0) = x;
  out.rotation.col(1) = y;
  out.rotation.col(2) = z;
  out.omega << wx, wy, wz;
  out.specific_thrust = n;

  if (with_domega) {
    const Vec3T<T> ps = in.snap - z * z.dot(in.snap);
    const Vec3T<T> ddz = (ps - z * dz.dot(in.jerk)) / n - dz * (2.0 * zj / n);
    const T dwx = wz * wy - y.dot(ddz);
    const T dwy = -wx * wz + x.dot(ddz);
    const T dc = -wy * zxc + in.dpsi * x.dot(yc);
    const T dy_yc = (-wz * x + wx * z).dot(yc);
    const T y_dyc = -in.dpsi * y.dot(xc);
    const T dz_xc = dz.dot(xc) + in.dpsi * z.dot(yc);
    const T dwz = (in.ddpsi * yyc + in.dpsi * (dy_yc + y_dyc) + dwx * zxc + wx * dz_xc - wz * dc) / c;
    out.domega << dwx, dwy, dwz;
  } else {
    out.domega.setZero();
  }
  return true;
}

template <typename T>
bool flat_thrusts(const FlatInput<T> &in, const QuadParams &params, FlatAttitude<T> &att,
                  Eigen::Matrix<T, 4, 1> &thrusts) {
  if (!flat_attitude(in, params.gravity, true, att)) return false;
  const Vec3T<T> jw = params.inertia_diag.cast<T>().cwiseProduct(att.omega);
  const Vec3T<T> tau =
      params.inertia_diag.cast<T>().cwiseProduct(att.domega) + att.omega.cross(jw);
  const T thrust = params.mass * att.specific_thrust;
  thrusts = mixer_inverse<T>(thrust, tau, params.arm_length, params.torque_const);
  return true;
}

/// Residual layout: f_min - f_i (4), f_i - f_max (4), w_j - w_max_j (3),
/// -w_j - w_max_j (3). All <= 0 iff feasible.
template <typename T>
bool flat_residuals(const FlatInput<T> &in, const QuadParams &params,
                    Eigen::Matrix<T, kNumResiduals, 1> &r) {
  FlatAttitude<T> att;
  Eigen::Matrix<T, 4, 1> f;
  if (!flat_thrusts(in, params, att, f)) return false;
  for (int i = 0; i < 4; ++i) {
    r(i) = params.f_min - f(i);
    r(4 + i) = f(i) - params.f_max;
  }
  for (int j = 0; j < 3; ++j) {
    r(8 + j) = att.omega(j) - params.omega_max(j);
    r(11 + j) = -att.omega(j) - params.omega_max(j);
  }
  return true;
}

inline FlatInput<double> flat_input(const FlatSample &s) {
  FlatInput<double> in;
  in.acc = s[2].head<3>();
  in.jerk = s[3].head<3>();
  in.snap = s[4].head<3>();
  in.psi = s[0](3);
  in.dpsi = s[1](3);
  in.ddpsi = s[2](3);
  return in;
}

[[noreturn]] inline void throw_singular() {
  throw Error(ErrorCode::SingularFlatness,
              "thrust direction undefined (free fall or heading aligned with thrust axis)");
}

}  // namespace detail

inline RotorThrusts mixer_inverse(double collective_thrust, const Vec3 &torque,
                                  const QuadParams &params) {
  return RotorThrusts{detail::mixer_inverse<double>(collective_thrust, torque,
                                                    params.arm_length, params.torque_const)};
}

/// Rigid-body equations of motion; returns d/dt of to_vector(state).
inline StateVector dynamics(const QuadState &state, const RotorThrusts &u,
                            const QuadParams &params) {
  const Wrench w = mixer_forward(u, params);
  const Eigen::Quaterniond &q = state.attitude;
  const Eigen::Quaterniond omega_q(0.0, state.body_rate.x(), state.body_rate.y(),
                                   state.body_rate.z());
  const Eigen::Quaterniond qdot = q * omega_q;

  const Vec3 thrust_body(0.0, 0.0, w.collective_thrust);
  const Vec3 acc = params.gravity + q.toRotationMatrix() * thrust_body / params.mass;

  const Vec3 &om = state.body_rate;
  const Vec3 jw = params.inertia_diag.cwiseProduct(om);
  const Vec3 domega = (w.torque - om.cross(jw)).cwiseQuotient(params.inertia_diag);

  StateVector dx;
  dx << state.velocity, 0.5 * qdot.w(), 0.5 * qdot.x(), 0.5 * qdot.y(), 0.5 * qdot.z(), acc,
      domega;
  return dx;
}

/// Needs derivatives up to jerk (and yaw rate).
inline QuadState flat_to_state(const FlatSample &sample, const QuadParams &params) {
  if (sample.max_order < 3) throw Error(ErrorCode::InvalidArgument, "flat_to_state needs jerk");
  detail::FlatAttitude<double> att;
  if (!detail::flat_attitude(detail::flat_input(sample), params.gravity, false, att)) {
    detail::throw_singular();
  }
  QuadState s;
  s.position = sample[0].head<3>();
  s.velocity = sample[1].head<3>();
  s.attitude = Eigen::Quaterniond(att.rotation).normalized();
  s.body_rate = att.omega;
  return s;
}

/// Needs derivatives up to snap.
inline RotorThrusts flat_to_control(const FlatSample &sample, const QuadParams &params) {
  if (sample.max_order < 4) throw Error(ErrorCode::InvalidArgument, "flat_to_control needs snap");
  detail::FlatAttitude<double> att;
  RotorThrusts u;
  if (!detail::flat_thrusts(detail::flat_input(sample), params, att, u.f)) {
    detail::throw_singular();
  }
  return u;
}

inline Eigen::Matrix<double, kNumResiduals, 1> constraint_residuals(const FlatSample &sample,
                                                                    const QuadParams &params) {
  if (sample.max_order < 4) {
    throw Error(ErrorCode::InvalidArgument, "constraint_residuals needs snap");
  }
  Eigen::Matrix<double, kNumResiduals, 1> r;
  if (!detail::flat_residuals(detail::flat_input(sample), params, r)) detail::throw_singular();
  return r;
}

}  // namespace togt
