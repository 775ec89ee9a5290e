#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "tacmap/experiment.hpp"

using namespace tacmap;

namespace {

void print_summary(const RunResult& result, const std::string& out) {
  const auto& s = result.summary;
  std::printf("frames %zu, touches %d\n", result.frames.size(), s.touches);
  std::printf("chamfer distance: depth only %.3f mm2, final %.3f mm2\n", s.depth_only_cd_mm2, s.final_cd_mm2);
  if (s.convergence_touch)
    std::printf("converged at touch %d\n", *s.convergence_touch);
  else
    std::printf("no convergence within the run\n");
  std::printf("outputs in %s\n", out.c_str());
}

int run_and_emit(const ExperimentConfig& config) {
  const auto result = run_experiment(config);
  emit_outputs(result, config, config.output_dir);
  print_summary(result, config.output_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental visuo-tactile shape mapping"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string config_path;
  std::uint64_t seed = 0;
  int snapshots = -1;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "Simulate a depth view followed by touches");
  run->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "Override the run seed");
  run->add_option("--snapshots", snapshots, "Mesh snapshot interval in touches (0 disables)");
  run->add_option("--out", out_dir, "Output directory");

  std::string records;
  auto* replay = app.add_subcommand("replay", "Re-run the pipeline on recorded measurements");
  replay->add_option("--records", records, "Records directory")->required()->check(CLI::ExistingDirectory);
  replay->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", out_dir, "Output directory");

  std::size_t max_obs = 1000;
  auto* compare = app.add_subcommand("compare-gp", "Compare the spatial graph against an exact GP");
  compare->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  compare->add_option("--max-observations", max_obs, "Observation cap for the exact GP");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  std::string stage = "load config";
  try {
    ExperimentConfig config = load_config(config_path);
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (*run) {
      if (*seed_opt) config.seed = seed;
      if (snapshots >= 0) config.snapshot_interval = snapshots;
      stage = "validate config";
      config.validate();
      stage = "run";
      return run_and_emit(config);
    }
    if (*replay) {
      config.mode = RunMode::Replay;
      config.records_dir = records;
      config.save_records = false;
      stage = "validate config";
      config.validate();
      stage = "replay";
      return run_and_emit(config);
    }
    stage = "compare-gp";
    const auto cmp = compare_with_full_gp(config, max_obs);
    std::printf("observations %zu (touches %d)\n", cmp.observations, cmp.touches);
    std::printf("nodes compared %zu\n", cmp.divergence.nodes_compared);
    std::printf("phi divergence: max %.6e m, mean %.6e m\n", cmp.divergence.max_abs_phi, cmp.divergence.mean_abs_phi);
    return 0;
  } catch (const StepError& e) {
    std::fprintf(stderr, "error [%s/%s]: %s\n", stage.c_str(), e.step().c_str(), e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [%s]: %s\n", stage.c_str(), e.what());
  }
  return 1;
}
