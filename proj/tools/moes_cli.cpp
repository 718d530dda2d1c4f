// moes: command line front end for single- and multi-objective ergodic planning.
//
//   moes plan  --config cfg.json [--out DIR] [--seed N]
//   moes moes  --config cfg.json [--mode sles|asles|scala] [--out DIR] [--seed N]
//   moes sweep --config cfg.json [--out DIR] [--seed N]
//   moes hv    FRONT.csv [--ref r1,r2,...] [--out DIR]
//   moes dist  --config cfg.json [--out DIR]

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "moes/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string mode;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_mode) {
  cmd->add_option("--config", a.config, "experiment config (JSON)")->required();
  if (with_mode)
    cmd->add_option("--mode", a.mode, "planner mode")->check(CLI::IsMember({"sles", "asles", "scala"}));
  cmd->add_option("--out", a.out, "output directory (overrides the config)");
  cmd->add_option("--seed", a.seed, "random seed (overrides the config)");
}

moes::Experiment load(const CommonArgs& a) {
  moes::ExperimentConfig cfg = moes::load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (!a.mode.empty()) cfg.mode = moes::planner_mode_from_string(a.mode);
  if (!a.out.empty()) cfg.output = a.out;
  return moes::build_experiment(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-objective ergodic search"};
  app.require_subcommand(1);

  CommonArgs plan_args, moes_args, sweep_args, dist_args;
  auto* plan = app.add_subcommand("plan", "single ergodic trajectory for one map or a fixed weight");
  add_common(plan, plan_args, false);
  auto* moes_cmd = app.add_subcommand("moes", "approximate the Pareto front over the weight space");
  add_common(moes_cmd, moes_args, true);
  auto* sweep = app.add_subcommand("sweep", "adaptive runs over a list of step sizes");
  add_common(sweep, sweep_args, false);
  auto* dist = app.add_subcommand("dist", "pairwise map distance table");
  add_common(dist, dist_args, false);

  std::string front_path, hv_out;
  std::vector<double> ref;
  auto* hv = app.add_subcommand("hv", "hypervolume of a front CSV");
  hv->add_option("front", front_path, "front CSV (moes front.csv or plain objective columns)")->required();
  hv->add_option("--ref", ref, "reference point, default (1,...,1)")->delimiter(',');
  hv->add_option("--out", hv_out, "also write hypervolume.json here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) {
      const auto ex = load(plan_args);
      const auto r = moes::run_plan(ex);
      moes::write_plan(ex.config.output, ex, r);
      std::cout << moes::plan_summary(ex, r).dump(2) << '\n';
    } else if (*moes_cmd) {
      const auto ex = load(moes_args);
      const auto r = moes::run_moes(ex, ex.config.mode);
      moes::write_moes(ex.config.output, ex, r);
      std::cout << "mode " << moes::to_string(r.mode) << ": " << r.archive.records.size() << " episodes, "
                << moes::total_iterations(r.archive.records) << " iterations, hypervolume "
                << moes::num(r.hypervolume) << '\n';
    } else if (*sweep) {
      const auto ex = load(sweep_args);
      const auto rows = moes::run_sweep(ex, &ex.config.output);
      auto out = moes::open_output(ex.config.output / "sweep.csv");
      moes::write_sweep_csv(out, rows);
      moes::write_sweep_csv(std::cout, rows);
    } else if (*dist) {
      const auto ex = load(dist_args);
      if (!dist_args.out.empty()) {
        auto out = moes::open_output(ex.config.output / "distances.csv");
        moes::write_distance_csv(out, ex);
      }
      moes::write_distance_csv(std::cout, ex);
    } else if (*hv) {
      if (!std::filesystem::exists(front_path)) throw std::runtime_error("front file not found: " + front_path);
      const auto summary = moes::run_hv(moes::read_front_csv(front_path), ref);
      if (!hv_out.empty()) moes::write_json(std::filesystem::path(hv_out) / "hypervolume.json", summary);
      std::cout << summary.dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "moes: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
