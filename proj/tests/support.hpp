#pragma once

#include "togt/optimizer.hpp"
#include "togt/trackio.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace togt::testing {

/// Axis-aligned-in-height square whose plane is normal to `normal`.
inline std::vector<Vec3> square(const Vec3 &center, const Vec3 &normal, double side) {
  const Vec3 h = normal.cross(Vec3::UnitZ()).normalized();
  const Vec3 v = Vec3::UnitZ();
  const double a = 0.5 * side;
  return {center + a * h + a * v, center - a * h + a * v, center - a * h - a * v,
          center + a * h - a * v};
}

/// Seven square gates on a wavy ellipse around the origin, facing along the
/// local tangent. Widths are 2.4 m before the 0.3 m margin.
inline TrackFile loop_track(double side = 2.4, double margin = 0.3) {
  static constexpr double kHeights[7] = {1.5, 2.5, 1.5, 3.0, 1.5, 2.0, 1.2};
  TrackFile t;
  t.quad = QuadParams::quad_a();
  t.start = Vec3(0.0, -5.0, 1.0);
  t.finish = t.start;
  t.options.margin = margin;
  for (int k = 0; k < 7; ++k) {
    const double th = -M_PI / 2 + (k + 1) * 2 * M_PI / 8;
    const double r = (k % 2) ? 1.0 : -1.0;
    const double ax = 8 + r, ay = 5 + r;
    const Vec3 c(ax * std::cos(th), ay * std::sin(th), kHeights[k]);
    const Vec3 tangent = Vec3(-ax * std::sin(th), ay * std::cos(th), 0.0).normalized();
    GateRecord g;
    g.kind = GateKind::Polygon;
    g.name = "g" + std::to_string(k);
    g.vertices = square(c, tangent, side);
    t.gates.push_back(g);
  }
  return t;
}

/// Random convex polygon: a regular n-gon with jittered radii in a random plane.
inline std::vector<Vec3> random_polygon(std::mt19937_64 &rng, const Vec3 &center, int n,
                                        double radius) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ur(0.8, 1.0);
  Vec3 normal(nd(rng), nd(rng), nd(rng));
  normal.normalize();
  Vec3 u = normal.unitOrthogonal();
  Vec3 v = normal.cross(u);
  const double phase = std::uniform_real_distribution<double>(0.0, 2 * M_PI)(rng);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    // radial jitter keeps convexity for n <= 4
    const double a = phase + 2 * M_PI * i / n;
    const double rr = radius * (n <= 4 ? ur(rng) : 1.0);
    pts.push_back(center + rr * (std::cos(a) * u + std::sin(a) * v));
  }
  return pts;
}

/// Random polyhedron: points on a sphere (always in convex position).
inline std::vector<Vec3> random_polyhedron(std::mt19937_64 &rng, const Vec3 &center, int n,
                                           double radius) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    Vec3 d(nd(rng), nd(rng), nd(rng));
    pts.push_back(center + radius * d.normalized());
  }
  return pts;
}

/// One gate of each kind, cycling ball, polygon, polyhedron.
inline Gate random_gate(std::mt19937_64 &rng, int kind, const Vec3 &center) {
  std::uniform_int_distribution<int> nv(3, 6);
  switch (kind % 3) {
    case 0: return BallGate{center, std::uniform_real_distribution<double>(0.2, 1.0)(rng)};
    case 1: return PolytopeGate::polygon(random_polygon(rng, center, nv(rng), 0.8));
    default: return PolytopeGate::polyhedron(random_polyhedron(rng, center, nv(rng) + 2, 0.8));
  }
}

/// Problem on quad_a with gates laid along a gentle line.
inline Problem random_problem(std::mt19937_64 &rng, int L, int first_kind = 0) {
  Problem pb;
  pb.params = QuadParams::quad_a();
  pb.start = Vec3(0.0, 0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (int i = 0; i < L; ++i) {
    const Vec3 c(3.0 * (i + 1), 2.0 * std::sin(i), 1.5 + nd(rng));
    pb.gates.push_back(random_gate(rng, first_kind + i, c));
  }
  pb.finish = Vec3(3.0 * (L + 1), 0.0, 1.0);
  return pb;
}

/// MINCO inputs: waypoints, durations and boundary derivatives.
struct Case {
  Eigen::Matrix3Xd P;
  VecX T;
  BoundaryCondition bc0, bcf;
};

inline double falling(int k, int d) {
  double c = 1.0;
  for (int j = 0; j < d; ++j) c *= (k - j);
  return c;
}

// Row of d-th derivative weights of [1, t, ..., t^(n-1)].
inline Eigen::RowVectorXd basis_row(int n, int d, double t) {
  Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
  for (int k = d; k < n; ++k) r(k) = falling(k, d) * std::pow(t, k - d);
  return r;
}

// Dense assembly: start/end derivatives, both-sided waypoint interpolation,
// continuity of derivatives 1..2s-2. Yaw replaces interpolation by continuity.
inline MatX dense_solution(const Case &c, int s) {
  const int L = static_cast<int>(c.P.cols());
  const int n = 2 * s;
  const int N = n * (L + 1);
  MatX C(N, 4);
  for (int dim = 0; dim < 4; ++dim) {
    MatX M = MatX::Zero(N, N);
    VecX b = VecX::Zero(N);
    int row = 0;
    for (int k = 0; k < s; ++k, ++row) {
      M.block(row, 0, 1, n) = basis_row(n, k, 0.0);
      b(row) = c.bc0.derivatives[k](dim);
    }
    for (int i = 0; i < L; ++i) {
      const int a = n * i, z = n * (i + 1);
      if (dim < 3) {
        M.block(row, a, 1, n) = basis_row(n, 0, c.T(i));
        b(row++) = c.P(dim, i);
        M.block(row, z, 1, n) = basis_row(n, 0, 0.0);
        b(row++) = c.P(dim, i);
      } else {
        M.block(row, a, 1, n) = basis_row(n, 0, c.T(i));
        M.block(row, z, 1, n) = -basis_row(n, 0, 0.0);
        ++row;
        M.block(row, a, 1, n) = basis_row(n, n - 1, c.T(i));
        M.block(row, z, 1, n) = -basis_row(n, n - 1, 0.0);
        ++row;
      }
      for (int d = 1; d <= n - 2; ++d, ++row) {
        M.block(row, a, 1, n) = basis_row(n, d, c.T(i));
        M.block(row, z, 1, n) = -basis_row(n, d, 0.0);
      }
    }
    for (int k = 0; k < s; ++k, ++row) {
      M.block(row, n * L, 1, n) = basis_row(n, k, c.T(L));
      b(row) = c.bcf.derivatives[k](dim);
    }
    C.col(dim) = M.fullPivLu().solve(b);
  }
  return C;
}

}  // namespace togt::testing
