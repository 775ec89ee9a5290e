#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tacmap/depth.hpp"
#include "tacmap/gpsg.hpp"
#include "tacmap/surface.hpp"
#include "tacmap/tactile.hpp"

namespace tacmap {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure inside the run loop, tagged with the pipeline step that raised it.
class StepError : public std::runtime_error {
 public:
  StepError(std::string step, const std::string& what)
      : std::runtime_error(step + ": " + what), step_(std::move(step)) {}
  const std::string& step() const { return step_; }

 private:
  std::string step_;
};

enum class RunMode { Sim, Replay };

struct ExperimentConfig {
  // Mesh file (OBJ/PLY) or builtin:icosphere:R[,subdiv], builtin:box:X,Y,Z,
  // builtin:cylinder:R,H[,segments]. Relative paths resolve against the config file.
  std::string mesh = "builtin:icosphere:0.05";
  double mesh_scale = 1.0;

  int grid_size = 16;
  double radius_fraction = 0.15;
  double workspace_padding = 0.1;  // per-axis margin as a fraction of the object extent

  double kernel_support = 0.0;  // 0: object bbox diagonal
  double prior_phi = 0.0;       // 0: kernel support
  double prior_cov_scale = 1.0;

  SensorSpec sensor;
  ExplorationPolicy exploration;
  double sigma_tactile = 5e-4;
  double sigma_depth = 5e-3;
  std::size_t tactile_budget = 60;
  DepthConversion depth_conversion;

  bool use_depth = true;
  double camera_distance = 0.4;
  double camera_elevation_deg = 35.0;
  double camera_azimuth_deg = 30.0;
  bool hallucinate_base = false;

  bool skip_untouched_cells = true;
  bool prune = true;

  std::size_t cd_samples = 10000;
  int snapshot_interval = 30;  // 0 disables snapshots
  std::string output_dir = "out";
  bool save_records = false;
  std::string records_dir;
  std::uint64_t seed = 0;
  RunMode mode = RunMode::Sim;

  void validate() const;
};

ExperimentConfig parse_config(std::istream& in, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

// Resolves builtin: specs or loads a file.
TriangleMesh load_object_mesh(const std::string& spec, double scale);

struct ReconstructionFrame {
  int timestep = 0;
  UncertainMesh mesh;
  double cd_mm2 = 0.0;  // NaN when the reconstruction is empty
  std::size_t factors = 0;
  std::size_t samples = 0;
  double update_ms = 0.0;
  double query_ms = 0.0;
  int touches = 0;  // cumulative touches that made contact
  std::size_t trace_increases = 0;
};

struct RunSummary {
  double depth_only_cd_mm2 = 0.0;
  double final_cd_mm2 = 0.0;
  std::optional<int> convergence_touch;
  int touches = 0;
  double median_factors_per_touch = 0.0;
  std::size_t trace_increases = 0;
};

struct RunResult {
  std::vector<ReconstructionFrame> frames;
  RunSummary summary;
};

using FrameObserver = std::function<void(const ReconstructionFrame&, const GpsgGraph&)>;

RunResult run_experiment(const ExperimentConfig& config, const FrameObserver& observer = {});

// First touch t >= 1 after which each of the next `window` touches changes CD by
// less than `tolerance` (relative).
std::optional<int> convergence_touch(const std::vector<ReconstructionFrame>& frames, double tolerance = 0.02,
                                     int window = 5);

RunSummary summarize(const std::vector<ReconstructionFrame>& frames);

struct GpComparison {
  DivergenceReport divergence;
  std::size_t observations = 0;
  int touches = 0;
};

// Runs the pipeline with as many touches as fit in `max_observations` samples
// and compares the graph against the exact GP on the same measurements.
GpComparison compare_with_full_gp(const ExperimentConfig& config, std::size_t max_observations = 1000);

// metrics.csv, timings.csv, summary.txt and mesh_tNNN.ply snapshots.
void emit_outputs(const RunResult& result, const ExperimentConfig& config, const std::string& dir);

}  // namespace tacmap
