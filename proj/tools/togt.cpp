#include "togt/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_track_flags(CLI::App &cmd, togt::cli::TrackOverrides &o, std::string &mode) {
  cmd.add_option("--mode", mode, "Planning mode: togt or togt-wp")
      ->check(CLI::IsMember({"togt", "togt-wp"}));
  cmd.add_option("--laps", o.laps, "Number of laps to concatenate")->check(CLI::PositiveNumber);
  cmd.add_option("--margin", o.margin, "Safety margin subtracted from gate sizes [m]")
      ->check(CLI::NonNegativeNumber);
  cmd.add_flag("--strict", o.strict, "Reject unknown keys in the track file");
}

void apply_mode(togt::cli::TrackOverrides &o, const std::string &mode) {
  if (!mode.empty()) o.mode = togt::parse_mode(mode);
}

}  // namespace

int main(int argc, char **argv) {
  namespace cli = togt::cli;
  CLI::App app{"Time-optimal gate-traversing trajectory planner"};
  app.require_subcommand(1);

  cli::PlanOptions plan;
  std::string plan_track, plan_mode;
  auto *plan_cmd = app.add_subcommand("plan", "Plan a trajectory through a track");
  plan_cmd->add_option("track", plan_track, "Track file (JSON)")->required();
  add_track_flags(*plan_cmd, plan.track, plan_mode);
  plan_cmd->add_option("--dt", plan.dt, "Output sample period [s]")->check(CLI::PositiveNumber);
  plan_cmd->add_option("--seed", plan.seed, "Seed for restart perturbations");
  plan_cmd->add_option("--restarts", plan.restarts, "Extra perturbed restarts")->check(CLI::NonNegativeNumber);
  plan_cmd->add_option("--out-dir", plan.out_dir, "Directory for trajectory.csv and summary.json");
  plan_cmd->add_flag("--plot", plan.plot, "Also write plot.json (trace and gate outlines)");

  cli::TrackOverrides check;
  std::string check_csv, check_track, check_mode;
  auto *check_cmd = app.add_subcommand("check", "Verify a planned trajectory against its track");
  check_cmd->add_option("trajectory", check_csv, "Trajectory CSV written by plan")->required();
  check_cmd->add_option("track", check_track, "Track file (JSON)")->required();
  add_track_flags(*check_cmd, check, check_mode);

  cli::PlanOptions bench;
  std::string bench_track, bench_mode;
  std::vector<int> bench_laps{1, 2, 4, 8};
  auto *bench_cmd = app.add_subcommand("bench", "Wall time against gate count over a lap sweep");
  bench_cmd->add_option("track", bench_track, "Track file (JSON)")->required();
  bench_cmd->add_option("--mode", bench_mode, "Planning mode: togt or togt-wp")
      ->check(CLI::IsMember({"togt", "togt-wp"}));
  bench_cmd->add_option("--margin", bench.track.margin, "Safety margin [m]")->check(CLI::NonNegativeNumber);
  bench_cmd->add_flag("--strict", bench.track.strict, "Reject unknown keys in the track file");
  bench_cmd->add_option("--laps", bench_laps, "Lap counts to sweep")->delimiter(',')->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed, "Seed for restart perturbations");
  bench_cmd->add_option("--restarts", bench.restarts, "Extra perturbed restarts")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--out-dir", bench.out_dir, "Directory for bench.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kValidation;
  }

  if (*plan_cmd) {
    apply_mode(plan.track, plan_mode);
    return cli::cmd_plan(plan_track, plan, std::cout, std::cerr);
  }
  if (*check_cmd) {
    apply_mode(check, check_mode);
    return cli::cmd_check(check_csv, check_track, check, std::cout, std::cerr);
  }
  apply_mode(bench.track, bench_mode);
  return cli::cmd_bench(bench_track, bench_laps, bench, std::cout, std::cerr);
}
