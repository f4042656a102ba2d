#pragma once

// Gate regions, containment residuals and the smooth surjective maps that
// turn gate-constrained waypoints and positive durations into unconstrained
// decision variables.

#include "togt/common.hpp"
#include "togt/geometry.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace togt {

/// Tolerance on the plane constraint of planar polygon gates.
inline constexpr double kPlaneEps = 1e-6;

struct BallGate {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;

  void validate() const {
    if (!center.allFinite()) throw Error(ErrorCode::ValidationError, "ball center not finite");
    if (!(radius >= 0.0)) throw Error(ErrorCode::ValidationError, "ball radius must be >= 0");
  }
};

/// Convex polygon (planar) or polyhedron given by its vertices. Halfspaces are
/// derived on construction; rows of A have unit norm so A p - b is a distance.
struct PolytopeGate {
  std::vector<Vec3> vertices;
  Eigen::Matrix<double, Eigen::Dynamic, 3> A;
  VecX b;
  bool is_planar = true;
  Vec3 plane_normal = Vec3::UnitZ();
  double plane_offset = 0.0;

  static PolytopeGate polygon(std::vector<Vec3> verts) {
    check_common(verts);
    const auto basis = geometry::fit_plane(verts);
    if (!basis) throw Error(ErrorCode::ValidationError, "polygon vertices are collinear");
    if (geometry::max_plane_distance(verts, *basis) > geometry::kTol) {
      throw Error(ErrorCode::ValidationError, "polygon vertices are not coplanar");
    }
    if (!geometry::in_convex_position(verts)) {
      throw Error(ErrorCode::ValidationError, "polygon vertices are not in convex position");
    }
    std::vector<Eigen::Vector2d> flat;
    for (const auto &v : verts) flat.push_back(basis->project(v));
    const auto hs = geometry::hull_halfspaces_2d(flat);

    PolytopeGate g;
    g.vertices = std::move(verts);
    g.is_planar = true;
    g.plane_normal = basis->normal;
    g.plane_offset = basis->normal.dot(basis->origin);
    g.A.resize(static_cast<Eigen::Index>(hs.size()), 3);
    g.b.resize(static_cast<Eigen::Index>(hs.size()));
    for (std::size_t k = 0; k < hs.size(); ++k) {
      const Vec3 a = hs[k].first.x() * basis->u + hs[k].first.y() * basis->w;
      const auto row = static_cast<Eigen::Index>(k);
      g.A.row(row) = a.transpose();
      g.b(row) = hs[k].second + a.dot(basis->origin);
    }
    return g;
  }

  static PolytopeGate polyhedron(std::vector<Vec3> verts) {
    check_common(verts);
    if (verts.size() < 4) throw Error(ErrorCode::ValidationError, "polyhedron needs >= 4 vertices");
    const auto basis = geometry::fit_plane(verts);
    if (!basis || geometry::max_plane_distance(verts, *basis) <= geometry::kTol) {
      throw Error(ErrorCode::ValidationError, "polyhedron vertices are coplanar");
    }
    if (!geometry::in_convex_position(verts)) {
      throw Error(ErrorCode::ValidationError, "polyhedron vertices are not in convex position");
    }
    const auto facets = geometry::hull_facets_3d(verts);
    PolytopeGate g;
    g.vertices = std::move(verts);
    g.is_planar = false;
    g.A.resize(static_cast<Eigen::Index>(facets.size()), 3);
    g.b.resize(static_cast<Eigen::Index>(facets.size()));
    for (std::size_t k = 0; k < facets.size(); ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      g.A.row(row) = facets[k].normal.transpose();
      g.b(row) = facets[k].offset;
    }
    return g;
  }

  Vec3 centroid() const { return geometry::centroid(vertices); }
  int num_vertices() const { return static_cast<int>(vertices.size()); }

 private:
  static void check_common(const std::vector<Vec3> &verts) {
    if (verts.size() < 3) throw Error(ErrorCode::ValidationError, "polytope needs >= 3 vertices");
    for (const auto &v : verts) {
      if (!v.allFinite()) throw Error(ErrorCode::ValidationError, "vertex not finite");
    }
  }
};

using Gate = std::variant<BallGate, PolytopeGate>;

inline double ball_contains(const BallGate &gate, const Vec3 &p) {
  return (p - gate.center).norm() - gate.radius;
}

inline double polytope_contains(const PolytopeGate &gate, const Vec3 &p) {
  double r = (gate.A * p - gate.b).maxCoeff();
  if (gate.is_planar) {
    r = std::max(r, std::abs(gate.plane_normal.dot(p) - gate.plane_offset) - kPlaneEps);
  }
  return r;
}

inline double contains(const Gate &gate, const Vec3 &p) {
  return std::visit(
      [&](const auto &g) {
        if constexpr (std::is_same_v<std::decay_t<decltype(g)>, BallGate>) {
          return ball_contains(g, p);
        } else {
          return polytope_contains(g, p);
        }
      },
      gate);
}

/// Center of a ball, vertex centroid of a polytope.
inline Vec3 gate_center(const Gate &gate) {
  if (const auto *b = std::get_if<BallGate>(&gate)) return b->center;
  return std::get<PolytopeGate>(gate).centroid();
}

/// Number of unconstrained parameters that map onto the gate.
inline int param_dim(const Gate &gate) {
  if (std::holds_alternative<BallGate>(gate)) return 4;
  return std::get<PolytopeGate>(gate).num_vertices();
}

struct Surjection {
  Vec3 point;
  MatX jacobian;  // 3 x param_dim
};

/// p = center + [2 radius d / (d.d + 1)]_3; the image is the closed ball.
inline Surjection ball_surject(const BallGate &gate, const Vec4 &d) {
  const double s = d.squaredNorm() + 1.0;
  const Vec3 head = d.head<3>();
  Surjection out;
  out.point = gate.center + (2.0 * gate.radius / s) * head;
  out.jacobian = MatX::Zero(3, 4);
  out.jacobian.leftCols<3>() = (2.0 * gate.radius / s) * Mat3::Identity();
  out.jacobian -= (4.0 * gate.radius / (s * s)) * head * d.transpose();
  return out;
}

/// p = sum_i w_i vertex_i with simplex weights w_i = d_i^2 / sum_j d_j^2.
/// d = 0 maps to the centroid with a zero Jacobian.
inline Surjection polytope_surject(const PolytopeGate &gate, const VecX &d) {
  const int v = gate.num_vertices();
  if (d.size() != v) throw Error(ErrorCode::DimensionMismatch, "polytope parameter size");
  Surjection out;
  out.jacobian = MatX::Zero(3, v);
  const double s = d.squaredNorm();
  if (s == 0.0) {
    out.point = gate.centroid();
    return out;
  }
  out.point = Vec3::Zero();
  for (int i = 0; i < v; ++i) out.point += (d(i) * d(i) / s) * gate.vertices[static_cast<std::size_t>(i)];
  for (int k = 0; k < v; ++k) {
    out.jacobian.col(k) = (2.0 * d(k) / s) * (gate.vertices[static_cast<std::size_t>(k)] - out.point);
  }
  return out;
}

inline Surjection surject(const Gate &gate, const VecX &d) {
  if (const auto *b = std::get_if<BallGate>(&gate)) {
    if (d.size() != 4) throw Error(ErrorCode::DimensionMismatch, "ball parameter size");
    return ball_surject(*b, d.head<4>());
  }
  return polytope_surject(std::get<PolytopeGate>(gate), d);
}

/// Parameter d with ball_surject(gate, d).point == p, for p inside the ball.
inline Vec4 ball_preimage(const BallGate &gate, const Vec3 &p) {
  const Vec3 r = p - gate.center;
  const double rho = r.norm();
  if (rho == 0.0 || gate.radius == 0.0) return Vec4::Zero();
  const double ratio = std::min(rho / gate.radius, 1.0);
  // smaller root of ratio t^2 - 2 t + ratio = 0
  const double t = (1.0 - std::sqrt(std::max(0.0, 1.0 - ratio * ratio))) / ratio;
  Vec4 d = Vec4::Zero();
  d.head<3>() = t * r / rho;
  return d;
}

struct TimeMapValue {
  double T;
  double dT_dK;
};

/// Smooth positive reparameterization of a duration, C^2 at K = 0.
inline TimeMapValue time_map(double K) {
  if (K >= 0.0) return {(0.5 * K + 1.0) * K + 1.0, K + 1.0};
  const double den = (0.5 * K - 1.0) * K + 1.0;
  return {1.0 / den, (1.0 - K) / (den * den)};
}

inline double time_map_inverse(double T) {
  if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration must be positive");
  if (T >= 1.0) return std::sqrt(2.0 * T - 1.0) - 1.0;
  return 1.0 - std::sqrt(2.0 / T - 1.0);
}

/// Ordered gates; tunnel_group holds an id per gate (-1 when standalone).
/// Consecutive gates sharing an id form one physical tunnel.
struct GateSequence {
  std::vector<Gate> gates;
  std::vector<int> tunnel_group;

  std::size_t size() const { return gates.size(); }

  void push_back(Gate g, int group = -1) {
    gates.push_back(std::move(g));
    tunnel_group.push_back(group);
  }

  void validate() const {
    if (gates.empty()) throw Error(ErrorCode::ValidationError, "gate sequence is empty");
    if (tunnel_group.size() != gates.size()) {
      throw Error(ErrorCode::DimensionMismatch, "tunnel_group size must match gates");
    }
  }
};

/// Appends entrance polygon, the prism spanned by both faces, and exit polygon
/// as one tunnel group.
inline void append_tunnel(GateSequence &seq, const std::vector<Vec3> &entrance,
                          const std::vector<Vec3> &exit, int group) {
  std::vector<Vec3> body = entrance;
  body.insert(body.end(), exit.begin(), exit.end());
  seq.push_back(PolytopeGate::polygon(entrance), group);
  seq.push_back(PolytopeGate::polyhedron(body), group);
  seq.push_back(PolytopeGate::polygon(exit), group);
}

struct ParamRange {
  int offset;
  int size;
};

/// Unconstrained variables: stacked gate parameters D and duration variables K.
struct DecisionVector {
  VecX D;
  VecX K;
  std::vector<ParamRange> offsets;

  static DecisionVector zeros(const GateSequence &seq) {
    DecisionVector dv;
    int off = 0;
    for (const auto &g : seq.gates) {
      const int n = param_dim(g);
      dv.offsets.push_back({off, n});
      off += n;
    }
    dv.D = VecX::Zero(off);
    dv.K = VecX::Zero(static_cast<Eigen::Index>(seq.size()) + 1);
    return dv;
  }

  Eigen::Index size() const { return D.size() + K.size(); }

  VecX flatten() const {
    VecX x(size());
    x << D, K;
    return x;
  }

  void assign(const VecX &x) {
    if (x.size() != size()) throw Error(ErrorCode::DimensionMismatch, "decision vector size");
    D = x.head(D.size());
    K = x.tail(K.size());
  }

  auto slice(std::size_t gate) const {
    return D.segment(offsets[gate].offset, offsets[gate].size);
  }
};

struct Decoded {
  Eigen::Matrix3Xd waypoints;  // one column per gate
  VecX T;                      // L+1 durations
  VecX dT_dK;
  std::vector<MatX> jacobians;  // dp_i / dd_i, 3 x dim
};

inline Decoded decode(const GateSequence &seq, const DecisionVector &dec) {
  seq.validate();
  const std::size_t L = seq.size();
  if (dec.offsets.size() != L || dec.K.size() != static_cast<Eigen::Index>(L) + 1) {
    throw Error(ErrorCode::DimensionMismatch, "decision vector does not match gate sequence");
  }
  Decoded out;
  out.waypoints.resize(3, static_cast<Eigen::Index>(L));
  out.jacobians.reserve(L);
  for (std::size_t i = 0; i < L; ++i) {
    if (dec.offsets[i].size != param_dim(seq.gates[i]) ||
        dec.offsets[i].offset + dec.offsets[i].size > dec.D.size()) {
      throw Error(ErrorCode::DimensionMismatch, "gate parameter slice " + std::to_string(i));
    }
    Surjection s = surject(seq.gates[i], dec.slice(i));
    out.waypoints.col(static_cast<Eigen::Index>(i)) = s.point;
    out.jacobians.push_back(std::move(s.jacobian));
  }
  out.T.resize(dec.K.size());
  out.dT_dK.resize(dec.K.size());
  for (Eigen::Index k = 0; k < dec.K.size(); ++k) {
    const auto tm = time_map(dec.K(k));
    out.T(k) = tm.T;
    out.dT_dK(k) = tm.dT_dK;
  }
  return out;
}

namespace detail {

inline PolytopeGate shrink_polytope(const PolytopeGate &g, double retreat) {
  auto empty = [] {
    return Error(ErrorCode::EmptyAfterShrink, "margin consumes the polytope gate");
  };
  if (g.is_planar) {
    const auto basis = geometry::fit_plane(g.vertices);
    std::vector<Eigen::Vector2d> flat;
    for (const auto &v : g.vertices) flat.push_back(basis->project(v));
    auto hs = geometry::hull_halfspaces_2d(flat);
    for (auto &h : hs) h.second -= retreat;
    const auto verts2 = geometry::vertices_2d(hs);
    if (verts2.size() < 3) throw empty();
    std::vector<Vec3> verts;
    for (const auto &q : verts2) verts.push_back(basis->lift(q));
    try {
      return PolytopeGate::polygon(std::move(verts));
    } catch (const Error &) {
      throw empty();
    }
  }
  std::vector<geometry::Plane> planes;
  for (Eigen::Index k = 0; k < g.A.rows(); ++k) {
    planes.push_back({g.A.row(k).transpose(), g.b(k) - retreat});
  }
  auto verts = geometry::vertices_3d(planes);
  if (verts.size() < 4) throw empty();
  try {
    return PolytopeGate::polyhedron(std::move(verts));
  } catch (const Error &) {
    throw empty();
  }
}

}  // namespace detail

/// Ball radius shrinks by the margin. Polytope edges/faces retreat by half the
/// margin so the gate width shrinks by the margin (2.4 m square, 0.3 m margin
/// gives a 2.1 m square).
inline Gate shrink_margin(const Gate &gate, double margin) {
  if (!(margin >= 0.0)) throw Error(ErrorCode::InvalidArgument, "margin must be >= 0");
  if (margin == 0.0) return gate;
  if (const auto *b = std::get_if<BallGate>(&gate)) {
    if (margin > b->radius) throw Error(ErrorCode::EmptyAfterShrink, "margin exceeds ball radius");
    return BallGate{b->center, b->radius - margin};
  }
  return detail::shrink_polytope(std::get<PolytopeGate>(gate), 0.5 * margin);
}

}  // namespace togt
