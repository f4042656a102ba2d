#pragma once

#include "togt/cost.hpp"
#include "togt/lbfgs.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace togt {

struct OptimizerConfig {
  int memory = 8;
  int max_iterations = 3000;
  double grad_tolerance = 1e-6;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  double initial_speed_guess = 3.0;  // m/s
  int restarts = 0;
  double restart_sigma = 0.3;
  std::uint64_t seed = 0;
  double output_rate = 100.0;  // Hz, sampled trajectory in PlanResult
  double stall_decrease = 1e-8;  // relative per-iteration decrease, 20 in a row
  // Penalty continuation: stage k of n solves with the problem weights divided
  // by factor^(n-1-k), warm-started from stage k-1. Only the last stage uses
  // grad_tolerance, stall_decrease and max_iterations.
  int continuation_stages = 4;
  double continuation_factor = 10.0;
  double stage_grad_tolerance = 1e-4;
  int stage_max_iterations = 500;
  double stage_stall_decrease = 1e-8;
  int stage_stall_iterations = 10;

  LbfgsParams lbfgs() const {
    LbfgsParams p;
    p.memory = memory;
    p.max_iterations = max_iterations;
    p.grad_tolerance = grad_tolerance;
    p.wolfe_c1 = wolfe_c1;
    p.wolfe_c2 = wolfe_c2;
    p.stall_decrease = stall_decrease;
    return p;
  }

  void validate() const {
    lbfgs().validate();
    if (!(initial_speed_guess > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "initial_speed_guess must be > 0");
    }
    if (restarts < 0) throw Error(ErrorCode::InvalidArgument, "restarts must be >= 0");
    if (!(output_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "output_rate must be > 0");
    if (continuation_stages < 1 || !(continuation_factor >= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "invalid penalty continuation schedule");
    }
  }
};

struct SolveDiagnostics {
  int iterations = 0;
  int evaluations = 0;
  std::vector<double> objective_trace;
  double final_grad_norm = 0.0;
  double wall_time = 0.0;  // s, over all restarts
  Termination reason = Termination::MaxIterations;
  std::uint64_t seed = 0;
  int best_restart = 0;
  std::vector<int> stage_iterations;  // per continuation stage, best restart
  std::vector<int> stage_evaluations;
};

struct TrajectoryRow {
  double t = 0.0;
  QuadState state;
  RotorThrusts thrusts;
};

struct PlanResult {
  TrajectorySpline spline;
  Eigen::Matrix3Xd waypoints;
  VecX durations;
  VecX traversal_times;
  double total_time = 0.0;
  double penalty = 0.0;
  ViolationSummary max_violation;
  DecisionVector decision;
  SolveDiagnostics diagnostics;
  std::vector<TrajectoryRow> trajectory;
};

inline constexpr double kMinSeedDistance = 0.1;  // m

/// Gate parameters at 0.1 (near centers/centroids, off the d = 0 point) and
/// durations from straight-line distances at the guessed speed.
inline DecisionVector initialize(const GateSequence &seq, const Vec3 &start, const Vec3 &finish,
                                 double speed_guess) {
  DecisionVector dv = DecisionVector::zeros(seq);
  dv.D.setConstant(0.1);
  Vec3 prev = start;
  for (std::size_t i = 0; i <= seq.size(); ++i) {
    const Vec3 next = i < seq.size() ? surject(seq.gates[i], dv.slice(i)).point : finish;
    const double dist = std::max((next - prev).norm(), kMinSeedDistance);
    dv.K(static_cast<Eigen::Index>(i)) = time_map_inverse(dist / speed_guess);
    prev = next;
  }
  return dv;
}

/// State and rotor thrusts sampled at `rate`, plus the exact gate traversal
/// instants when requested (rows stay sorted by time).
inline std::vector<TrajectoryRow> sample_trajectory(const TrajectorySpline &spline,
                                                    const QuadParams &params, double rate,
                                                    bool include_traversals = true) {
  std::vector<double> times;
  const double total = spline.total_duration();
  const auto n = static_cast<long>(std::floor(total * rate + 1e-9));
  for (long k = 0; k <= n; ++k) times.push_back(static_cast<double>(k) / rate);
  if (times.back() < total) times.push_back(total);
  if (include_traversals) {
    for (int i = 0; i + 1 < spline.num_segments(); ++i) times.push_back(spline.traversal_time(i));
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
  }
  std::vector<TrajectoryRow> rows;
  rows.reserve(times.size());
  for (double t : times) {
    const FlatSample s = spline.eval(t, 4);
    rows.push_back({t, flat_to_state(s, params), flat_to_control(s, params)});
  }
  return rows;
}

/// Minimizes total time plus penalty. The best iterate is returned even when
/// the line search fails; the reason is recorded in the diagnostics.
inline PlanResult solve(const Problem &problem, const OptimizerConfig &cfg,
                        const std::optional<DecisionVector> &warm_start = std::nullopt) {
  problem.validate();
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const DecisionVector init =
      warm_start ? *warm_start
                 : initialize(problem.gates, problem.start, problem.finish, cfg.initial_speed_guess);
  const VecX x0 = init.flatten();

  struct Run {
    LbfgsResult res;
    std::vector<int> iters, evals;
  };
  auto run = [&](const VecX &start, int &evals) {
    Run out;
    LbfgsResult &res = out.res;
    VecX x = start;
    for (int k = 0; k < cfg.continuation_stages; ++k) {
      const int remaining = cfg.continuation_stages - 1 - k;
      Problem staged = problem;
      const double scale = std::pow(cfg.continuation_factor, -remaining);
      staged.weights.thrust_weight *= scale;
      staged.weights.body_rate_weight *= scale;
      Objective objective(staged);
      DecisionVector at = init;
      at.assign(x);
      objective.freeze_sampling(at);
      auto fn = [&](const VecX &v, VecX &g) { return objective(v, g); };
      LbfgsParams lp = cfg.lbfgs();
      if (remaining > 0) {
        lp.grad_tolerance = std::max(cfg.grad_tolerance, cfg.stage_grad_tolerance);
        lp.max_iterations = std::min(cfg.max_iterations, cfg.stage_max_iterations);
        lp.stall_decrease = cfg.stage_stall_decrease;
        lp.stall_iterations = cfg.stage_stall_iterations;
      }
      res = lbfgs_minimize(fn, x, lp);
      evals += res.evaluations;
      out.iters.push_back(res.iterations);
      out.evals.push_back(res.evaluations);
      x = res.x;
    }
    return out;
  };

  int total_evals = 0;
  Run best = run(x0, total_evals);
  int best_restart = 0;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.restart_sigma);
  for (int r = 1; r <= cfg.restarts; ++r) {
    VecX xr = x0;
    for (Eigen::Index k = 0; k < xr.size(); ++k) xr(k) += noise(rng);
    Run cand = run(xr, total_evals);
    if (cand.res.f < best.res.f) {
      best = std::move(cand);
      best_restart = r;
    }
  }

  Problem reporting = problem;
  reporting.weights.bound_tightening = 0.0;
  Objective objective(reporting);
  PlanResult out;
  out.decision = init;
  out.decision.assign(best.res.x);
  CostReport rep = objective.evaluate(out.decision, false);
  if (!rep.ok) {
    objective.freeze_sampling(out.decision);
    rep = objective.evaluate(out.decision, false);
  }
  if (!rep.ok) throw Error(ErrorCode::SingularFlatness, "no evaluable iterate found");
  out.spline = objective.minco().spline();
  out.waypoints = out.spline.waypoints();
  out.durations = out.spline.durations();
  out.traversal_times.resize(static_cast<Eigen::Index>(problem.gates.size()));
  for (int i = 0; i < static_cast<int>(problem.gates.size()); ++i) {
    out.traversal_times(i) = out.spline.traversal_time(i);
  }
  out.total_time = rep.time_term;
  out.penalty = rep.penalty_term;
  out.max_violation = rep.max_violation;

  out.diagnostics.iterations = best.res.iterations;
  out.diagnostics.evaluations = total_evals;
  out.diagnostics.objective_trace = best.res.trace;
  out.diagnostics.final_grad_norm = best.res.grad_norm();
  out.diagnostics.reason = best.res.reason;
  out.diagnostics.stage_iterations = best.iters;
  out.diagnostics.stage_evaluations = best.evals;
  out.diagnostics.seed = cfg.seed;
  out.diagnostics.best_restart = best_restart;
  out.trajectory = sample_trajectory(out.spline, problem.params, cfg.output_rate);
  out.diagnostics.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace togt
