// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "support.hpp"
#include "togt/cli.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

using namespace togt;
using togt::testing::loop_track;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const std::string &name, bool pass, const std::string &detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
}

std::string fmt(const char *f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Solved {
  std::string label;
  Problem problem;
  PlanResult result;
  double wall = 0.0;
};

Solved solve_timed(const std::string &label, const Problem &pb) {
  Solved s{label, pb, {}, 0.0};
  const auto t0 = Clock::now();
  s.result = solve(pb, OptimizerConfig{});
  s.wall = seconds_since(t0);
  return s;
}

TrackFile waypoint_variant(TrackFile t) {
  t.options.mode = PlanMode::TogtWp;
  t.options.waypoint_tolerance = 0.3;
  return t;
}

// ------------------------------------------------------------------ planning

void gate_versus_waypoint(std::vector<Solved> &suite) {
  const TrackFile loop = loop_track();
  const Solved gate = solve_timed("loop7", make_problem(loop));
  const Solved wp = solve_timed("loop7-wp", make_problem(waypoint_variant(loop)));
  const double gain = 1.0 - gate.result.total_time / wp.result.total_time;
  const bool pass = gain >= 0.05 && gate.wall < 10.0 && wp.wall < 10.0;
  report("gate_vs_waypoint", pass,
         "T gate " + fmt("%.4f", gate.result.total_time) + " s, T wp " +
             fmt("%.4f", wp.result.total_time) + " s, reduction " + fmt("%.1f", 100 * gain) +
             "% (need >= 5%), solve " + fmt("%.2f", gate.wall) + " s / " + fmt("%.2f", wp.wall) +
             " s (need < 10 s)");
  suite.push_back(gate);
  suite.push_back(wp);
}

void scaling(std::vector<Solved> &suite) {
  std::vector<double> gates, walls;
  std::string detail;
  double total = 0.0;
  for (int laps : {1, 2, 4, 8}) {
    TrackFile t = loop_track();
    t.options.laps = laps;
    Solved s = solve_timed("loop7x" + std::to_string(laps), make_problem(t));
    gates.push_back(static_cast<double>(s.problem.gates.size()));
    walls.push_back(s.wall);
    total += s.wall;
    detail += "L=" + std::to_string(s.problem.gates.size()) + " " + fmt("%.2f", s.wall) + " s, ";
    if (laps > 1) suite.push_back(std::move(s));
  }
  const double slope = cli::loglog_slope(gates, walls);
  report("scaling", slope < 1.5 && total < 300.0,
         detail + "exponent " + fmt("%.3f", slope) + " (need < 1.5), total " + fmt("%.1f", total) +
             " s (need < 300 s)");
}

Problem three_gate_problem() {
  TrackFile t = loop_track();
  t.gates.resize(3);
  t.finish = Vec3(0.0, 5.0, 1.5);
  return make_problem(t);
}

void feasibility(const std::vector<Solved> &suite) {
  bool pass = true;
  std::string detail;
  for (const auto &s : suite) {
    const QuadParams &q = s.problem.params;
    const double slack = 0.01 * (q.f_max - q.f_min);
    double fmin = 1e300, fmax = -1e300, rate = 0.0;
    for (const auto &row : sample_trajectory(s.result.spline, q, 1000.0)) {
      fmin = std::min(fmin, row.thrusts.f.minCoeff());
      fmax = std::max(fmax, row.thrusts.f.maxCoeff());
      rate = std::max(rate, row.state.body_rate.cwiseAbs().cwiseQuotient(q.omega_max).maxCoeff());
    }
    const bool ok = s.result.penalty < 1e-4 && fmin >= q.f_min - slack && fmax <= q.f_max + slack &&
                    rate <= 1.01;
    pass = pass && ok;
    detail += s.label + (ok ? "" : " (violated)") + " penalty " + fmt("%.2e", s.result.penalty) +
              " f [" + fmt("%.3f", fmin) + ", " + fmt("%.3f", fmax) + "] rate " + fmt("%.4f", rate) +
              "; ";
  }
  report("feasibility", pass, detail + "limits f in [f_min, f_max] +- 1% of range, rate <= 1.01");
}

void traversal_exactness(const std::vector<Solved> &suite) {
  double worst_contain = -1e300, worst_interp = 0.0;
  for (const auto &s : suite) {
    const auto &r = s.result;
    for (Eigen::Index i = 0; i < r.waypoints.cols(); ++i) {
      worst_contain = std::max(worst_contain, contains(s.problem.gates.gates[i], r.waypoints.col(i)));
      const Vec3 p = r.spline.eval(r.traversal_times(i), 0)[0].head<3>();
      worst_interp = std::max(worst_interp, (p - r.waypoints.col(i)).norm());
    }
  }
  report("traversal_exactness", worst_contain <= 1e-9 && worst_interp <= 1e-8,
         "max containment residual " + fmt("%.2e", worst_contain) + " (need <= 1e-9), max |p(t_i) - p_i| " +
             fmt("%.2e", worst_interp) + " m (need <= 1e-8)");
}

// ------------------------------------------------------------------ gradient

void gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int active = 0, trials = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int L = std::vector<int>{1, 3, 7}[trial % 3];
    std::mt19937_64 rng(1000 + trial);
    const Problem pb = togt::testing::random_problem(rng, L, trial % 3);
    Objective obj(pb);
    std::normal_distribution<double> nd(0.0, 0.5);
    DecisionVector dv = initialize(pb.gates, pb.start, pb.finish, 6.0);
    for (Eigen::Index i = 0; i < dv.D.size(); ++i) dv.D(i) += nd(rng);
    for (Eigen::Index i = 0; i < dv.K.size(); ++i) dv.K(i) += 0.2 * nd(rng);
    obj.freeze_sampling(dv);
    const CostReport rep = obj.evaluate(dv);
    if (!rep.ok) continue;
    ++trials;
    if (rep.penalty_term > 0.0) ++active;
    const VecX x = dv.flatten();
    VecX fd(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
      DecisionVector p = dv, m = dv;
      VecX xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      p.assign(xp);
      m.assign(xm);
      fd(k) = (obj.evaluate(p, false).total - obj.evaluate(m, false).total) / (2 * h);
    }
    worst = std::max(worst, (rep.gradient - fd).norm() / fd.norm());
  }
  const double wall = seconds_since(t0);
  report("gradient_suite", trials == 20 && worst < 1e-4 && wall < 60.0,
         std::to_string(trials) + " vectors (" + std::to_string(active) +
             " with active penalty), max relative error " + fmt("%.2e", worst) + " (need < 1e-4), " +
             fmt("%.2f", wall) + " s (need < 60 s)");
}

// ------------------------------------------------------------------ dynamics

StateVector rk4_step(const TrajectorySpline &sp, const QuadParams &q, const StateVector &x, double t,
                     double h) {
  auto f = [&](const StateVector &s, double tt) {
    const RotorThrusts u = flat_to_control(sp.eval(std::min(tt, sp.total_duration()), 4), q);
    return dynamics(from_vector(s), u, q);
  };
  const StateVector k1 = f(x, t);
  const StateVector k2 = f(x + 0.5 * h * k1, t + 0.5 * h);
  const StateVector k3 = f(x + 0.5 * h * k2, t + 0.5 * h);
  const StateVector k4 = f(x + h * k3, t + h);
  StateVector out = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  out.segment<4>(3).normalize();
  return out;
}

void dynamics_consistency() {
  const Problem pb = three_gate_problem();
  const PlanResult r = solve(pb, OptimizerConfig{});
  const TrajectorySpline &sp = r.spline;
  const double window = 0.5, h = 1e-3;
  const double total = sp.total_duration();
  double worst = 0.0;
  int windows = 0;
  for (double t0 = 0.0; t0 + window <= total + 1e-12; t0 += 0.05, ++windows) {
    StateVector x = to_vector(flat_to_state(sp.eval(t0, 4), pb.params));
    const int steps = static_cast<int>(std::lround(window / h));
    for (int k = 0; k < steps; ++k) {
      const double t = t0 + k * h;
      x = rk4_step(sp, pb.params, x, t, h);
      const Vec3 ref = sp.eval(std::min(t + h, total), 0)[0].head<3>();
      worst = std::max(worst, (x.head<3>() - ref).norm());
    }
  }
  report("dynamics_consistency", r.penalty < 1e-4 && worst <= 1e-3,
         "T " + fmt("%.4f", r.total_time) + " s, " + std::to_string(windows) +
             " windows of 0.5 s, max position deviation " + fmt("%.2e", worst) + " m (need <= 1e-3)");
}

// ------------------------------------------------------------------ gates

void surjection_suite() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd(0.0, 1.0);
  const char *names[3] = {"ball", "polygon", "polyhedron"};
  std::string detail;
  bool pass = true;
  for (int kind = 0; kind < 3; ++kind) {
    double worst = -1e300;
    for (int g = 0; g < 100; ++g) {
      const Gate gate = togt::testing::random_gate(rng, kind, Vec3(nd(rng), nd(rng), nd(rng)));
      const int n = param_dim(gate);
      for (int k = 0; k < 1000; ++k) {
        VecX d(n);
        const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-3, 3)(rng));
        for (int j = 0; j < n; ++j) d(j) = scale * nd(rng);
        worst = std::max(worst, contains(gate, surject(gate, d).point));
      }
    }
    pass = pass && worst <= 1e-9;
    detail += std::string(names[kind]) + " 1e5 samples max residual " + fmt("%.2e", worst) + "; ";
  }
  double vertex_err = 0.0;
  for (int kind = 1; kind < 3; ++kind) {
    for (int g = 0; g < 50; ++g) {
      const Gate gate = togt::testing::random_gate(rng, kind, Vec3(nd(rng), nd(rng), nd(rng)));
      const auto &poly = std::get<PolytopeGate>(gate);
      const int n = param_dim(gate);
      for (int i = 0; i < n; ++i) {
        const VecX d = VecX::Unit(n, i);
        vertex_err = std::max(vertex_err, (surject(gate, d).point - poly.vertices[static_cast<std::size_t>(i)]).norm());
      }
      vertex_err = std::max(vertex_err, (surject(gate, VecX::Zero(n)).point - poly.centroid()).norm());
    }
  }
  pass = pass && vertex_err <= 1e-12;
  report("surjection_suite", pass,
         detail + "vertex/centroid max error " + fmt("%.2e", vertex_err) + " m (need <= 1e-12)");
}

// ------------------------------------------------------------------ spline

void minco_oracle() {
  VecX T(1);
  T << 1.0;
  const auto one = construct(Eigen::Matrix3Xd(3, 0), T, BoundaryCondition::hover(Vec3::Zero(), 3),
                             BoundaryCondition::hover(Vec3::Ones(), 3));
  VecX expected(6);
  expected << 0, 0, 0, 10, -15, 6;
  double quintic = 0.0;
  for (int dim = 0; dim < 3; ++dim) {
    quintic = std::max(quintic, (one.coefficients().col(dim) - expected).cwiseAbs().maxCoeff());
  }

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ur(-3.0, 3.0), ut(0.3, 2.0);
  double banded = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    for (int L = 0; L <= 7; ++L) {
      togt::testing::Case c;
      c.P.resize(3, L);
      for (int i = 0; i < L; ++i) c.P.col(i) = Vec3(ur(rng), ur(rng), ur(rng));
      c.T.resize(L + 1);
      for (int i = 0; i <= L; ++i) c.T(i) = ut(rng);
      c.bc0.derivatives.resize(3);
      c.bcf.derivatives.resize(3);
      for (int k = 0; k < 3; ++k) {
        c.bc0.derivatives[k] = Vec4(ur(rng), ur(rng), ur(rng), ur(rng));
        c.bcf.derivatives[k] = Vec4(ur(rng), ur(rng), ur(rng), ur(rng));
      }
      const MatX dense = togt::testing::dense_solution(c, 3);
      const MatX fast = construct(c.P, c.T, c.bc0, c.bcf).coefficients();
      banded = std::max(banded, (fast - dense).cwiseAbs().maxCoeff() /
                                    std::max(1.0, dense.cwiseAbs().maxCoeff()));
    }
  }
  report("minco_oracle", quintic <= 1e-10 && banded <= 1e-10,
         "quintic max coefficient error " + fmt("%.2e", quintic) + ", banded vs dense (L <= 7) " +
             fmt("%.2e", banded) + " (need <= 1e-10)");
}

// ------------------------------------------------------------------ space

Gate enlarge(const Gate &g, double factor) {
  if (const auto *b = std::get_if<BallGate>(&g)) return BallGate{b->center, factor * b->radius};
  const auto &p = std::get<PolytopeGate>(g);
  const Vec3 c = p.centroid();
  std::vector<Vec3> v;
  for (const Vec3 &x : p.vertices) v.push_back(c + factor * (x - c));
  return p.is_planar ? PolytopeGate::polygon(v) : PolytopeGate::polyhedron(v);
}

void monotone_space() {
  double worst = -1e300;
  std::string detail;
  for (int track = 0; track < 10; ++track) {
    std::mt19937_64 rng(500 + track);
    const int L = 3 + track % 3;
    const Problem small = togt::testing::random_problem(rng, L, track);
    Problem big = small;
    for (auto &g : big.gates.gates) g = enlarge(g, 1.5);
    const double ts = solve(small, OptimizerConfig{}).total_time;
    const double tb = solve(big, OptimizerConfig{}).total_time;
    worst = std::max(worst, tb - ts);
    detail += fmt("%.3f", ts) + "->" + fmt("%.3f", tb) + " ";
  }
  report("monotone_space", worst <= 1e-3,
         "T small->enlarged x1.5: " + detail + "max increase " + fmt("%.2e", worst) + " s (need <= 1e-3)");
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  try {
    std::vector<Solved> suite;
    gate_versus_waypoint(suite);
    scaling(suite);
    suite.push_back(solve_timed("three-gate", three_gate_problem()));
    feasibility(suite);
    traversal_exactness(suite);
    gradient_suite();
    dynamics_consistency();
    surjection_suite();
    minco_oracle();
    monotone_space();
  } catch (const std::exception &e) {
    report("acceptance_run", false, std::string("exception: ") + e.what());
  }
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << " in "
            << fmt("%.1f", seconds_since(t0)) << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
