#pragma once

// Small-vertex-count convex hull utilities used to derive gate halfspaces.
// Gates carry only a handful of vertices, so brute-force enumeration over
// vertex pairs/triples is adequate.

#include "togt/common.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace togt::geometry {

inline constexpr double kTol = 1e-9;

struct Plane {
  Vec3 normal;  // unit
  double offset;  // normal . p <= offset inside
};

struct Basis2D {
  Vec3 origin;
  Vec3 u, w, normal;

  Eigen::Vector2d project(const Vec3 &p) const {
    const Vec3 d = p - origin;
    return {d.dot(u), d.dot(w)};
  }
  Vec3 lift(const Eigen::Vector2d &q) const { return origin + q.x() * u + q.y() * w; }
};

inline Vec3 centroid(const std::vector<Vec3> &pts) {
  Vec3 c = Vec3::Zero();
  for (const auto &p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

/// Best-fit plane through the point set, or nullopt if the points are (nearly)
/// collinear. Returned normal has unit length.
inline std::optional<Basis2D> fit_plane(const std::vector<Vec3> &pts) {
  if (pts.size() < 3) return std::nullopt;
  const Vec3 c = centroid(pts);
  Mat3 cov = Mat3::Zero();
  for (const auto &p : pts) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  // eigenvalues ascending: the two largest span the plane
  if (std::sqrt(std::max(0.0, es.eigenvalues()(1))) <= kTol) return std::nullopt;
  Basis2D b;
  b.origin = c;
  b.normal = es.eigenvectors().col(0).normalized();
  b.u = es.eigenvectors().col(2).normalized();
  b.w = b.normal.cross(b.u).normalized();
  return b;
}

inline double max_plane_distance(const std::vector<Vec3> &pts, const Basis2D &b) {
  double m = 0.0;
  for (const auto &p : pts) m = std::max(m, std::abs((p - b.origin).dot(b.normal)));
  return m;
}

/// Halfspaces a.q <= c (unit a) of the 2D convex hull; empty if points are
/// collinear.
inline std::vector<std::pair<Eigen::Vector2d, double>> hull_halfspaces_2d(
    const std::vector<Eigen::Vector2d> &pts, double tol = kTol) {
  std::vector<std::pair<Eigen::Vector2d, double>> hs;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Eigen::Vector2d e = pts[j] - pts[i];
      if (e.norm() <= tol) continue;
      Eigen::Vector2d a(e.y(), -e.x());
      a.normalize();
      const double c = a.dot(pts[i]);
      bool all_le = true, all_ge = true;
      for (const auto &p : pts) {
        const double s = a.dot(p) - c;
        if (s > tol) all_le = false;
        if (s < -tol) all_ge = false;
      }
      if (all_le && all_ge) continue;  // collinear set
      if (!all_le && !all_ge) continue;
      if (!all_le) {
        a = -a;
      }
      const double off = a.dot(pts[i]);
      bool dup = false;
      for (const auto &h : hs) {
        if ((h.first - a).norm() <= 1e-9 && std::abs(h.second - off) <= 1e-9) dup = true;
      }
      if (!dup) hs.emplace_back(a, off);
    }
  }
  return hs;
}

/// Facet planes of the 3D convex hull of a full-dimensional point set; empty if
/// the points are coplanar.
inline std::vector<Plane> hull_facets_3d(const std::vector<Vec3> &pts, double tol = kTol) {
  std::vector<Plane> facets;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        Vec3 nrm = (pts[j] - pts[i]).cross(pts[k] - pts[i]);
        if (nrm.norm() <= tol) continue;
        nrm.normalize();
        const double c = nrm.dot(pts[i]);
        bool all_le = true, all_ge = true;
        for (const auto &p : pts) {
          const double s = nrm.dot(p) - c;
          if (s > tol) all_le = false;
          if (s < -tol) all_ge = false;
        }
        if (all_le == all_ge) continue;  // coplanar set or splitting plane
        if (!all_le) nrm = -nrm;
        const double off = nrm.dot(pts[i]);
        bool dup = false;
        for (const auto &f : facets) {
          if ((f.normal - nrm).norm() <= 1e-9 && std::abs(f.offset - off) <= 1e-9) dup = true;
        }
        if (!dup) facets.push_back({nrm, off});
      }
    }
  }
  return facets;
}

inline bool in_hull_2d(const std::vector<Eigen::Vector2d> &pts, const Eigen::Vector2d &q,
                       double tol = kTol) {
  if (pts.empty()) return false;
  if (pts.size() == 1) return (pts[0] - q).norm() <= tol;
  const auto hs = hull_halfspaces_2d(pts, tol);
  if (hs.empty()) {
    // collinear: segment between extreme points
    Eigen::Vector2d a = pts[0], b = pts[0];
    double best = -1.0;
    for (const auto &p : pts) {
      for (const auto &r : pts) {
        if ((p - r).norm() > best) {
          best = (p - r).norm();
          a = p;
          b = r;
        }
      }
    }
    const Eigen::Vector2d d = b - a;
    if (d.norm() <= tol) return (a - q).norm() <= tol;
    const double t = std::clamp((q - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
    return (a + t * d - q).norm() <= tol;
  }
  for (const auto &h : hs) {
    if (h.first.dot(q) - h.second > tol) return false;
  }
  return true;
}

inline bool in_hull_3d(const std::vector<Vec3> &pts, const Vec3 &q, double tol = kTol) {
  if (pts.empty()) return false;
  const auto plane = fit_plane(pts);
  if (!plane || max_plane_distance(pts, *plane) <= tol) {
    if (!plane) {
      // collinear or a single point: reuse the 2D routine along the line
      Vec3 dir = Vec3::Zero();
      for (const auto &p : pts) {
        if ((p - pts[0]).norm() > dir.norm()) dir = p - pts[0];
      }
      if (dir.norm() <= tol) return (pts[0] - q).norm() <= tol;
      const Vec3 u = dir.normalized();
      const Vec3 off = (q - pts[0]) - u * u.dot(q - pts[0]);
      if (off.norm() > tol) return false;
      std::vector<Eigen::Vector2d> line;
      for (const auto &p : pts) line.emplace_back(u.dot(p - pts[0]), 0.0);
      return in_hull_2d(line, Eigen::Vector2d(u.dot(q - pts[0]), 0.0), tol);
    }
    if (std::abs((q - plane->origin).dot(plane->normal)) > tol) return false;
    std::vector<Eigen::Vector2d> flat;
    for (const auto &p : pts) flat.push_back(plane->project(p));
    return in_hull_2d(flat, plane->project(q), tol);
  }
  for (const auto &f : hull_facets_3d(pts, tol)) {
    if (f.normal.dot(q) - f.offset > tol) return false;
  }
  return true;
}

/// True when no point lies in the convex hull of the others.
inline bool in_convex_position(const std::vector<Vec3> &pts, double tol = kTol) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<Vec3> others;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j != i) others.push_back(pts[j]);
    }
    if (in_hull_3d(others, pts[i], tol)) return false;
  }
  return true;
}

/// Vertices of {q : a_k.q <= c_k} in 2D by pairwise line intersection.
inline std::vector<Eigen::Vector2d> vertices_2d(
    const std::vector<std::pair<Eigen::Vector2d, double>> &hs, double tol = kTol) {
  std::vector<Eigen::Vector2d> out;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    for (std::size_t j = i + 1; j < hs.size(); ++j) {
      Eigen::Matrix2d m;
      m.row(0) = hs[i].first.transpose();
      m.row(1) = hs[j].first.transpose();
      if (std::abs(m.determinant()) <= 1e-12) continue;
      const Eigen::Vector2d q = m.inverse() * Eigen::Vector2d(hs[i].second, hs[j].second);
      bool ok = true;
      for (const auto &h : hs) {
        if (h.first.dot(q) - h.second > tol * std::max(1.0, q.norm())) ok = false;
      }
      if (!ok) continue;
      bool dup = false;
      for (const auto &p : out) {
        if ((p - q).norm() <= 1e-9) dup = true;
      }
      if (!dup) out.push_back(q);
    }
  }
  // counter-clockwise about the mean
  if (!out.empty()) {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto &p : out) c += p;
    c /= static_cast<double>(out.size());
    std::sort(out.begin(), out.end(), [&](const auto &a, const auto &b) {
      return std::atan2(a.y() - c.y(), a.x() - c.x()) < std::atan2(b.y() - c.y(), b.x() - c.x());
    });
  }
  return out;
}

/// Vertices of {p : n_k.p <= c_k} in 3D by triple plane intersection.
inline std::vector<Vec3> vertices_3d(const std::vector<Plane> &planes, double tol = kTol) {
  std::vector<Vec3> out;
  const std::size_t n = planes.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        Mat3 m;
        m.row(0) = planes[i].normal.transpose();
        m.row(1) = planes[j].normal.transpose();
        m.row(2) = planes[k].normal.transpose();
        if (std::abs(m.determinant()) <= 1e-12) continue;
        const Vec3 p = m.inverse() * Vec3(planes[i].offset, planes[j].offset, planes[k].offset);
        bool ok = true;
        for (const auto &pl : planes) {
          if (pl.normal.dot(p) - pl.offset > tol * std::max(1.0, p.norm())) ok = false;
        }
        if (!ok) continue;
        bool dup = false;
        for (const auto &q : out) {
          if ((p - q).norm() <= 1e-9) dup = true;
        }
        if (!dup) out.push_back(p);
      }
    }
  }
  return out;
}

}  // namespace togt::geometry
