#pragma once

// Command implementations behind the `togt` executable: plan, check and
// bench. Kept in a header so the tests drive them directly.

#include "togt/optimizer.hpp"
#include "togt/trackio.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace togt::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kSolver = 2, kIo = 3 };

inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmptyAfterShrink: return kValidation;
    case ErrorCode::IoError: return kIo;
    default: return kSolver;
  }
}

inline constexpr const char *kCsvMagic = "togt-trajectory";
inline constexpr int kCsvVersion = 1;
inline constexpr const char *kCsvColumns =
    "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,f1,f2,f3,f4";

/// Overrides applied on top of the track file options.
struct TrackOverrides {
  std::optional<PlanMode> mode;
  std::optional<int> laps;
  std::optional<double> margin;
  bool strict = false;
};

struct PlanOptions {
  TrackOverrides track;
  double dt = 0.01;  // s, output sample period
  std::uint64_t seed = 0;
  int restarts = 0;
  std::string out_dir = ".";
  bool plot = false;
};

inline TrackFile load_with_overrides(const std::string &path, const TrackOverrides &o) {
  TrackFile t = load_track(path, o.strict);
  if (o.mode) t.options.mode = *o.mode;
  if (o.laps) t.options.laps = *o.laps;
  if (o.margin) t.options.margin = *o.margin;
  validate(t);
  return t;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvHeader {
  int version = kCsvVersion;
  std::map<std::string, std::string> meta;  // key=value pairs from the comment line
};

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_csv(std::ostream &out, const std::vector<TrajectoryRow> &rows,
                      const std::map<std::string, std::string> &meta = {}) {
  out << "# " << kCsvMagic << " v" << kCsvVersion;
  for (const auto &[k, v] : meta) out << ' ' << k << '=' << v;
  out << '\n' << kCsvColumns << '\n';
  for (const auto &r : rows) {
    const auto x = to_vector(r.state);
    out << format_number(r.t);
    for (int k = 0; k < 13; ++k) out << ',' << format_number(x(k));
    for (int k = 0; k < 4; ++k) out << ',' << format_number(r.thrusts.f(k));
    out << '\n';
  }
}

inline std::vector<TrajectoryRow> read_csv(std::istream &in, CsvHeader *header = nullptr) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(std::string("# ") + kCsvMagic + " v", 0) != 0) {
    throw Error(ErrorCode::ParseError, "trajectory CSV: missing version header");
  }
  CsvHeader h;
  {
    std::istringstream ss(line.substr(2 + std::string(kCsvMagic).size() + 2));
    ss >> h.version;
    if (h.version != kCsvVersion) {
      throw Error(ErrorCode::ParseError, "trajectory CSV: unsupported version " + std::to_string(h.version));
    }
    std::string kv;
    while (ss >> kv) {
      const auto eq = kv.find('=');
      if (eq != std::string::npos) h.meta[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
  }
  if (!std::getline(in, line) || line != kCsvColumns) {
    throw Error(ErrorCode::ParseError, "trajectory CSV: unexpected column header");
  }
  std::vector<TrajectoryRow> rows;
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception &) {
        throw Error(ErrorCode::ParseError, "trajectory CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (v.size() != 18) {
      throw Error(ErrorCode::ParseError, "trajectory CSV line " + std::to_string(lineno) + ": expected 18 columns");
    }
    TrajectoryRow r;
    r.t = v[0];
    StateVector x;
    for (int k = 0; k < 13; ++k) x(k) = v[static_cast<std::size_t>(1 + k)];
    r.state = from_vector(x);
    for (int k = 0; k < 4; ++k) r.thrusts.f(k) = v[static_cast<std::size_t>(14 + k)];
    rows.push_back(r);
  }
  if (header) *header = h;
  return rows;
}

// ---------------------------------------------------------------------------
// check

struct CheckItem {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckItem> items;
  bool pass() const {
    for (const auto &i : items) {
      if (!i.pass) return false;
    }
    return !items.empty();
  }
};

inline constexpr double kContainmentTol = 1e-6;  // m
inline constexpr double kLimitSlack = 0.01;      // fraction of the limit range
inline constexpr double kQuatNormTol = 1e-6;

inline CheckReport check_trajectory(const std::vector<TrajectoryRow> &rows, const GateSequence &gates,
                                    const QuadParams &params) {
  CheckReport rep;
  const std::size_t L = gates.size();

  std::vector<std::vector<double>> inside(L);
  for (std::size_t i = 0; i < L; ++i) {
    for (const auto &r : rows) {
      if (contains(gates.gates[i], r.state.position) <= kContainmentTol) inside[i].push_back(r.t);
    }
  }
  {
    CheckItem c{"gate_containment", true, ""};
    for (std::size_t i = 0; i < L; ++i) {
      if (inside[i].empty()) {
        c.pass = false;
        c.detail += (c.detail.empty() ? "no sample inside gate " : ", ") + std::to_string(i);
      }
    }
    if (c.pass) c.detail = std::to_string(L) + " gates reached";
    rep.items.push_back(c);
  }
  {
    CheckItem c{"traversal_order", true, ""};
    double last = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < L && c.pass; ++i) {
      const auto it = std::upper_bound(inside[i].begin(), inside[i].end(), last);
      if (it == inside[i].end()) {
        c.pass = false;
        c.detail = "gate " + std::to_string(i) + " not reached after gate " + std::to_string(i - (i > 0)) + " traversal";
      } else {
        last = *it;
      }
    }
    if (c.pass) c.detail = "monotone";
    rep.items.push_back(c);
  }
  {
    const double lo = params.f_min - kLimitSlack * (params.f_max - params.f_min);
    const double hi = params.f_max + kLimitSlack * (params.f_max - params.f_min);
    double fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
    for (const auto &r : rows) {
      fmin = std::min(fmin, r.thrusts.f.minCoeff());
      fmax = std::max(fmax, r.thrusts.f.maxCoeff());
    }
    const bool ok = !rows.empty() && fmin >= lo && fmax <= hi;
    rep.items.push_back({"thrust_bounds", ok,
                         "range [" + format_number(fmin) + ", " + format_number(fmax) + "] N, allowed [" +
                             format_number(lo) + ", " + format_number(hi) + "]"});
  }
  {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto &r : rows) {
      const Vec3 ratio = r.state.body_rate.cwiseAbs().cwiseQuotient(params.omega_max);
      worst = std::max(worst, ratio.maxCoeff());
    }
    const bool ok = !rows.empty() && worst <= 1.0 + kLimitSlack;
    rep.items.push_back({"body_rate_bounds", ok, "max |w|/w_max = " + format_number(worst)});
  }
  {
    double worst = 0.0;
    for (const auto &r : rows) worst = std::max(worst, std::abs(r.state.attitude.coeffs().norm() - 1.0));
    rep.items.push_back({"quaternion_norm", !rows.empty() && worst <= kQuatNormTol,
                         "max | |q| - 1 | = " + format_number(worst)});
  }
  return rep;
}

inline void print_report(std::ostream &out, const CheckReport &rep) {
  for (const auto &i : rep.items) out << (i.pass ? "PASS " : "FAIL ") << i.name << ": " << i.detail << '\n';
  out << (rep.pass() ? "all checks passed" : "check failed") << '\n';
}

// ---------------------------------------------------------------------------
// plan

inline double path_length(const TrajectorySpline &spline, double dt = 1e-3) {
  double len = 0.0;
  Vec3 prev = spline.eval(0.0, 0)[0].head<3>();
  const double total = spline.total_duration();
  const auto n = static_cast<long>(std::ceil(total / dt));
  for (long k = 1; k <= n; ++k) {
    const Vec3 p = spline.eval(std::min(total, static_cast<double>(k) * dt), 0)[0].head<3>();
    len += (p - prev).norm();
    prev = p;
  }
  return len;
}

inline nlohmann::json summary_json(const PlanResult &r, const Problem &problem, const TrackFile &track) {
  using nlohmann::json;
  double fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
  Vec3 wmax = Vec3::Zero();
  for (const auto &row : r.trajectory) {
    fmin = std::min(fmin, row.thrusts.f.minCoeff());
    fmax = std::max(fmax, row.thrusts.f.maxCoeff());
    wmax = wmax.cwiseMax(row.state.body_rate.cwiseAbs());
  }
  json j;
  j["mode"] = to_string(track.options.mode);
  j["laps"] = track.options.laps;
  j["gate_count"] = problem.gates.size();
  j["total_time"] = r.total_time;
  j["traversal_times"] = std::vector<double>(r.traversal_times.data(), r.traversal_times.data() + r.traversal_times.size());
  j["segment_durations"] = std::vector<double>(r.durations.data(), r.durations.data() + r.durations.size());
  j["path_length"] = path_length(r.spline);
  j["max_rotor_thrust"] = fmax;
  j["min_rotor_thrust"] = fmin;
  j["max_body_rate"] = {wmax.x(), wmax.y(), wmax.z()};
  j["penalty"] = r.penalty;
  j["max_violation"] = {{"thrust_low", r.max_violation.thrust_low},
                        {"thrust_high", r.max_violation.thrust_high},
                        {"body_rate", r.max_violation.body_rate}};
  json wps = json::array();
  for (Eigen::Index i = 0; i < r.waypoints.cols(); ++i) {
    wps.push_back({r.waypoints(0, i), r.waypoints(1, i), r.waypoints(2, i)});
  }
  j["waypoints"] = wps;
  const auto &d = r.diagnostics;
  j["solver"] = {{"iterations", d.iterations},
                 {"evaluations", d.evaluations},
                 {"final_grad_norm", d.final_grad_norm},
                 {"wall_time", d.wall_time},
                 {"termination", to_string(d.reason)},
                 {"seed", d.seed},
                 {"best_restart", d.best_restart},
                 {"stage_iterations", d.stage_iterations}};
  return j;
}

inline nlohmann::json plot_json(const PlanResult &r, const GateSequence &gates) {
  using nlohmann::json;
  json j;
  json trace = json::array();
  for (const auto &row : r.trajectory) {
    const Vec3 &p = row.state.position;
    trace.push_back({row.t, p.x(), p.y(), p.z()});
  }
  j["trajectory"] = trace;
  json gs = json::array();
  for (const auto &g : gates.gates) {
    if (const auto *b = std::get_if<BallGate>(&g)) {
      gs.push_back({{"type", "ball"}, {"center", detail::write_vec3(b->center)}, {"radius", b->radius}});
    } else {
      const auto &pg = std::get<PolytopeGate>(g);
      gs.push_back({{"type", pg.is_planar ? "polygon" : "polyhedron"},
                    {"vertices", detail::write_points(pg.vertices)}});
    }
  }
  j["gates"] = gs;
  return j;
}

inline OptimizerConfig optimizer_config(const PlanOptions &opt) {
  OptimizerConfig cfg;
  cfg.seed = opt.seed;
  cfg.restarts = opt.restarts;
  if (!(opt.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "--dt must be > 0");
  cfg.output_rate = 1.0 / opt.dt;
  return cfg;
}

inline std::map<std::string, std::string> csv_meta(const TrackFile &t) {
  return {{"mode", to_string(t.options.mode)},
          {"laps", std::to_string(t.options.laps)},
          {"margin", format_number(t.options.margin)}};
}

template <typename Fn>
int guarded(std::ostream &err, Fn &&fn) {
  try {
    return fn();
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error &e) {
    err << "error: IoError: " << e.what() << '\n';
    return kIo;
  }
}

inline void write_file(const std::filesystem::path &p, const std::string &content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write '" + p.string() + "'");
  f << content;
  if (!f) throw Error(ErrorCode::IoError, "write failed for '" + p.string() + "'");
}

/// Writes trajectory.csv, summary.json and, when requested, plot.json.
inline int cmd_plan(const std::string &track_path, const PlanOptions &opt, std::ostream &out,
                    std::ostream &err) {
  return guarded(err, [&] {
    const TrackFile track = load_with_overrides(track_path, opt.track);
    const OptimizerConfig cfg = optimizer_config(opt);
    const Problem problem = make_problem(track);
    const PlanResult r = solve(problem, cfg);

    const std::filesystem::path dir(opt.out_dir);
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_csv(csv, r.trajectory, csv_meta(track));
    write_file(dir / "trajectory.csv", csv.str());
    write_file(dir / "summary.json", summary_json(r, problem, track).dump(2) + "\n");
    if (opt.plot) write_file(dir / "plot.json", plot_json(r, problem.gates).dump() + "\n");

    out << "gates " << problem.gates.size() << "  T = " << format_number(r.total_time)
        << " s  penalty = " << format_number(r.penalty) << "  (" << to_string(r.diagnostics.reason)
        << ", " << r.diagnostics.iterations << " it, " << format_number(r.diagnostics.wall_time)
        << " s)\n";
    return int{kOk};
  });
}

/// Track options recorded in the CSV header are used unless overridden.
inline int cmd_check(const std::string &csv_path, const std::string &track_path,
                     const TrackOverrides &overrides, std::ostream &out, std::ostream &err) {
  return guarded(err, [&] {
    std::ifstream in(csv_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + csv_path + "'");
    CsvHeader header;
    const auto rows = read_csv(in, &header);
    TrackOverrides o = overrides;
    try {
      if (!o.mode && header.meta.count("mode")) o.mode = parse_mode(header.meta.at("mode"));
      if (!o.laps && header.meta.count("laps")) o.laps = std::stoi(header.meta.at("laps"));
      if (!o.margin && header.meta.count("margin")) o.margin = std::stod(header.meta.at("margin"));
    } catch (const std::logic_error &) {
      throw Error(ErrorCode::ParseError, "trajectory CSV: bad header metadata");
    }
    const TrackFile track = load_with_overrides(track_path, o);
    const Problem problem = make_problem(track);
    const CheckReport rep = check_trajectory(rows, problem.gates, problem.params);
    print_report(out, rep);
    return rep.pass() ? int{kOk} : int{kValidation};
  });
}

struct BenchRow {
  int laps = 0;
  int gates = 0;
  double wall_time = 0.0;
  double total_time = 0.0;
  double penalty = 0.0;
  std::string termination;
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double> &x, const std::vector<double> &y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "need >= 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

inline std::vector<BenchRow> run_bench(const TrackFile &base, const std::vector<int> &laps,
                                       const OptimizerConfig &cfg) {
  std::vector<BenchRow> rows;
  for (const int n : laps) {
    TrackFile t = base;
    t.options.laps = n;
    const Problem problem = make_problem(t);
    const PlanResult r = solve(problem, cfg);
    rows.push_back({n, static_cast<int>(problem.gates.size()), r.diagnostics.wall_time, r.total_time,
                    r.penalty, to_string(r.diagnostics.reason)});
  }
  return rows;
}

/// Solves the track for each lap count and reports wall time against gate
/// count, plus the fitted log-log slope. Writes bench.csv into out_dir.
inline int cmd_bench(const std::string &track_path, const std::vector<int> &laps,
                     const PlanOptions &opt, std::ostream &out, std::ostream &err) {
  return guarded(err, [&] {
    if (laps.empty()) throw Error(ErrorCode::InvalidArgument, "no lap counts given");
    const TrackFile track = load_with_overrides(track_path, opt.track);
    const auto rows = run_bench(track, laps, optimizer_config(opt));
    std::ostringstream csv;
    csv << "laps,gates,wall_time,total_time,penalty,termination\n";
    out << "laps  gates  wall[s]      T[s]         penalty      termination\n";
    std::vector<double> xs, ys;
    for (const auto &r : rows) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%4d  %5d  %-11.4g  %-11.6g  %-11.3g  %s\n", r.laps, r.gates,
                    r.wall_time, r.total_time, r.penalty, r.termination.c_str());
      out << buf;
      csv << r.laps << ',' << r.gates << ',' << format_number(r.wall_time) << ','
          << format_number(r.total_time) << ',' << format_number(r.penalty) << ',' << r.termination
          << '\n';
      xs.push_back(r.gates);
      ys.push_back(r.wall_time);
    }
    if (rows.size() >= 2) out << "log-log slope of wall time vs gates: " << format_number(loglog_slope(xs, ys)) << '\n';
    const std::filesystem::path dir(opt.out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "bench.csv", csv.str());
    return int{kOk};
  });
}

}  // namespace togt::cli
