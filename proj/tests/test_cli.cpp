#include "togt/cli.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace togt;
namespace fs = std::filesystem;

namespace {

const std::string kLoop = std::string(TOGT_TRACKS_DIR) + "/loop7.json";
const std::string kMixed = std::string(TOGT_TRACKS_DIR) + "/mixed.json";

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("togt_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string &args) {
  const std::string cmd = std::string(TOGT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// The loop track is planned once; every closed-loop test reads its output.
class PlannedLoop : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = scratch("loop");
    cli::PlanOptions opt;
    opt.out_dir = dir_.string();
    opt.plot = true;
    std::ostringstream out, err;
    rc_ = cli::cmd_plan(kLoop, opt, out, err);
    log_ = out.str() + err.str();
  }

  static std::vector<TrajectoryRow> rows() {
    std::ifstream in(dir_ / "trajectory.csv");
    return cli::read_csv(in);
  }

  static int check(const fs::path &csv, const std::string &track, cli::TrackOverrides o = {},
                   std::string *report = nullptr) {
    std::ostringstream out, err;
    const int rc = cli::cmd_check(csv.string(), track, o, out, err);
    if (report) *report = out.str() + err.str();
    return rc;
  }

  static inline fs::path dir_;
  static inline int rc_ = -1;
  static inline std::string log_;
};

}  // namespace

TEST(Csv, RoundTripIsByteIdentical) {
  std::vector<TrajectoryRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[i].t = 0.1 * i;
    rows[i].state.position = Vec3(1.0 / 3, -2.5e-7, 1e5 + i);
    rows[i].state.attitude = Eigen::Quaterniond(Eigen::AngleAxisd(0.2 * i, Vec3::UnitZ()));
    rows[i].state.velocity = Vec3(M_PI, 0, -1);
    rows[i].state.body_rate = Vec3(0, 1e-12, 3);
    rows[i].thrusts.f = Vec4(1, 2, 3, 4.25);
  }
  std::ostringstream a;
  cli::write_csv(a, rows, {{"mode", "togt"}, {"laps", "2"}});
  std::istringstream in(a.str());
  cli::CsvHeader h;
  const auto back = cli::read_csv(in, &h);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(h.meta.at("laps"), "2");
  EXPECT_NEAR(back[1].state.position.x(), 1.0 / 3, 1e-12);
  std::ostringstream b;
  cli::write_csv(b, back, h.meta);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "# togt-trajectory v1 laps=2 mode=togt");
}

TEST(Csv, MalformedInputReportsLine) {
  const std::string head = "# togt-trajectory v1\n" + std::string(cli::kCsvColumns) + "\n";
  const std::string good = "0,0,0,1,1,0,0,0,0,0,0,0,0,0,2,2,2,2\n";
  auto message = [](const std::string &text) {
    std::istringstream in(text);
    try {
      cli::read_csv(in);
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), ErrorCode::ParseError);
      return e.message();
    }
    return std::string("no error");
  };
  EXPECT_NE(message("t,px\n").find("version header"), std::string::npos);
  EXPECT_NE(message("# togt-trajectory v9\n").find("version"), std::string::npos);
  EXPECT_NE(message("# togt-trajectory v1\nt,x\n").find("column header"), std::string::npos);
  EXPECT_NE(message(head + good + "0,1,2\n").find("line 4"), std::string::npos);
  EXPECT_NE(message(head + "0,0,0,1,1,0,0,0,0,0,0,0,0,0,2,2,2,x\n").find("line 3"),
            std::string::npos);
  std::istringstream ok(head + good);
  EXPECT_EQ(cli::read_csv(ok).size(), 1u);
}

TEST(Bench, LogLogSlope) {
  EXPECT_NEAR(cli::loglog_slope({1, 2, 4, 8}, {3, 6, 12, 24}), 1.0, 1e-12);
  EXPECT_NEAR(cli::loglog_slope({7, 14, 28}, {1, 4, 16}), 2.0, 1e-12);
  EXPECT_THROW(cli::loglog_slope({1}, {1}), Error);
}

TEST(ExitCodes, MapErrorKinds) {
  EXPECT_EQ(cli::exit_code_for(ErrorCode::ValidationError), cli::kValidation);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::ParseError), cli::kValidation);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::IoError), cli::kIo);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::SingularFlatness), cli::kSolver);
}

TEST(ExitCodes, Binary) {
  const fs::path dir = scratch("exit");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), cli::kValidation);
  EXPECT_EQ(run_cli("plan"), cli::kValidation);
  EXPECT_EQ(run_cli("plan " + kLoop + " --mode sideways"), cli::kValidation);
  EXPECT_EQ(run_cli("plan /nonexistent.json"), cli::kIo);
  std::ofstream(dir / "bad.json") << R"({"schema_version": 1, "start": [0, 0, 0], "gates": []})";
  EXPECT_EQ(run_cli("plan " + (dir / "bad.json").string()), cli::kValidation);
  std::ofstream(dir / "broken.json") << "{";
  EXPECT_EQ(run_cli("plan " + (dir / "broken.json").string()), cli::kValidation);
  EXPECT_EQ(run_cli("check /nonexistent.csv " + kLoop), cli::kIo);
  EXPECT_EQ(run_cli("plan " + kLoop + " --margin 5"), cli::kValidation);
}

TEST_F(PlannedLoop, PlanWritesOutputs) {
  ASSERT_EQ(rc_, 0) << log_;
  EXPECT_TRUE(fs::exists(dir_ / "trajectory.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "plot.json"));
  const auto summary = nlohmann::json::parse(slurp(dir_ / "summary.json"));
  EXPECT_EQ(summary.at("gate_count"), 7);
  EXPECT_EQ(summary.at("mode"), "togt");
  EXPECT_EQ(summary.at("traversal_times").size(), 7u);
  EXPECT_EQ(summary.at("segment_durations").size(), 8u);
  EXPECT_LT(summary.at("penalty").get<double>(), 1e-4);
  const double T = summary.at("total_time").get<double>();
  EXPECT_GT(T, 2.0);
  EXPECT_LT(T, 10.0);
  EXPECT_GT(summary.at("path_length").get<double>(), 20.0);
  for (const char *key : {"max_rotor_thrust", "min_rotor_thrust", "max_body_rate", "waypoints",
                          "max_violation", "solver"}) {
    EXPECT_TRUE(summary.contains(key)) << key;
  }
  const auto rs = rows();
  ASSERT_FALSE(rs.empty());
  EXPECT_NEAR(rs.back().t, T, 1e-9);
  EXPECT_NEAR(rs[1].t - rs[0].t, 0.01, 1e-12);
  const auto plot = nlohmann::json::parse(slurp(dir_ / "plot.json"));
  EXPECT_EQ(plot.at("gates").size(), 7u);
}

TEST_F(PlannedLoop, CheckPassesOnOwnOutput) {
  ASSERT_EQ(rc_, 0) << log_;
  std::string report;
  EXPECT_EQ(check(dir_ / "trajectory.csv", kLoop, {}, &report), 0) << report;
  EXPECT_NE(report.find("all checks passed"), std::string::npos) << report;
  EXPECT_EQ(run_cli("check " + (dir_ / "trajectory.csv").string() + " " + kLoop), 0);
}

TEST_F(PlannedLoop, CheckCatchesDoubledThrust) {
  ASSERT_EQ(rc_, 0) << log_;
  auto rs = rows();
  for (auto &r : rs) r.thrusts.f *= 2.0;
  const fs::path bad = dir_ / "doubled.csv";
  std::ofstream out(bad);
  cli::write_csv(out, rs, {{"mode", "togt"}, {"laps", "1"}, {"margin", "0.3"}});
  out.close();
  std::string report;
  EXPECT_EQ(check(bad, kLoop, {}, &report), cli::kValidation);
  EXPECT_NE(report.find("FAIL thrust_bounds"), std::string::npos) << report;
  EXPECT_NE(report.find("PASS gate_containment"), std::string::npos) << report;
}

TEST_F(PlannedLoop, CheckCatchesSwappedGateOrder) {
  ASSERT_EQ(rc_, 0) << log_;
  TrackFile t = load_track(kLoop);
  std::swap(t.gates[1], t.gates[4]);
  const fs::path swapped = dir_ / "swapped.json";
  cli::write_file(swapped, serialize_track(t));
  std::string report;
  EXPECT_EQ(check(dir_ / "trajectory.csv", swapped.string(), {}, &report), cli::kValidation);
  EXPECT_NE(report.find("FAIL traversal_order"), std::string::npos) << report;
}

TEST_F(PlannedLoop, CheckCatchesMissedGate) {
  ASSERT_EQ(rc_, 0) << log_;
  TrackFile t = load_track(kLoop);
  for (auto &v : t.gates[3].vertices) v.z() += 10.0;
  const fs::path moved = dir_ / "moved.json";
  cli::write_file(moved, serialize_track(t));
  std::string report;
  EXPECT_EQ(check(dir_ / "trajectory.csv", moved.string(), {}, &report), cli::kValidation);
  EXPECT_NE(report.find("FAIL gate_containment"), std::string::npos) << report;
}

TEST_F(PlannedLoop, ReplanIsByteIdentical) {
  ASSERT_EQ(rc_, 0) << log_;
  const fs::path a = scratch("replan_a"), b = scratch("replan_b");
  EXPECT_EQ(run_cli("plan " + kLoop + " --out-dir " + a.string()), 0);
  EXPECT_EQ(run_cli("plan " + kLoop + " --out-dir " + b.string()), 0);
  const std::string csv = slurp(a / "trajectory.csv");
  EXPECT_FALSE(csv.empty());
  EXPECT_EQ(csv, slurp(b / "trajectory.csv"));
}

TEST(Plan, WaypointModeAndOverrides) {
  const fs::path dir = scratch("wp");
  cli::PlanOptions opt;
  opt.out_dir = dir.string();
  opt.dt = 0.05;
  opt.track.mode = PlanMode::TogtWp;
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_plan(kMixed, opt, out, err), 0) << err.str();
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary.at("mode"), "togt-wp");
  EXPECT_EQ(summary.at("gate_count"), 6);  // tunnel counts three
  std::ifstream in(dir / "trajectory.csv");
  cli::CsvHeader h;
  const auto rs = cli::read_csv(in, &h);
  EXPECT_EQ(h.meta.at("mode"), "togt-wp");
  EXPECT_NEAR(rs[1].t - rs[0].t, 0.05, 1e-12);
  // the header carries the mode, so check rebuilds the same waypoint balls
  std::ostringstream cout, cerr;
  EXPECT_EQ(cli::cmd_check((dir / "trajectory.csv").string(), kMixed, {}, cout, cerr), 0)
      << cout.str() << cerr.str();
}

TEST(Bench, WritesTableAndCsv) {
  const fs::path dir = scratch("bench");
  cli::PlanOptions opt;
  opt.out_dir = dir.string();
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_bench(kLoop, {1, 2}, opt, out, err), 0) << err.str();
  EXPECT_NE(out.str().find("log-log slope"), std::string::npos);
  const std::string csv = slurp(dir / "bench.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "laps,gates,wall_time,total_time,penalty,termination");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
