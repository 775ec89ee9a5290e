#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tacmap/experiment.hpp"
#include "tacmap/mesh_query.hpp"

using namespace tacmap;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "/tmp");
}

ExperimentConfig small_run(std::uint64_t seed = 0) {
  ExperimentConfig c;
  c.seed = seed;
  c.exploration.touch_count = 8;
  c.cd_samples = 2000;
  c.snapshot_interval = 0;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tacmap_test_" + name);
  fs::remove_all(dir);
  return dir;
}

ReconstructionFrame frame_with(int t, double cd) {
  ReconstructionFrame f;
  f.timestep = t;
  f.cd_mm2 = cd;
  return f;
}

}  // namespace

TEST_CASE("config sections, aliases and defaults") {
  const auto c = parse(
      "mesh = builtin:box:0.06,0.06,0.12\n"
      "seed = 7\n"
      "[grid]\nsize = 12\npadding = 0.3\n"
      "[noise]\ntactile = 1e-3\n"
      "[exploration]\ntouches = 20\nmode = ring\n"
      "[run]\nsave_records = true\n");
  CHECK(c.mesh == "builtin:box:0.06,0.06,0.12");
  CHECK(c.seed == 7);
  CHECK(c.grid_size == 12);
  CHECK(c.workspace_padding == 0.3);
  CHECK(c.sigma_tactile == 1e-3);
  CHECK(c.exploration.touch_count == 20);
  CHECK(c.exploration.mode == ExplorationMode::RingGrid);
  CHECK(c.save_records);
  CHECK(c.radius_fraction == 0.15);
  CHECK(c.sigma_depth == 5e-3);
}

TEST_CASE("config errors are reported") {
  CHECK_THROWS_AS(parse("[grid]\nsize = 16\nspacing = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("colour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse("[grid]\nsize = many\n"), ConfigError);
  CHECK_THROWS_AS(parse("[grid]\nsize = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[exploration]\nmode = spiral\n"), ConfigError);
  CHECK_THROWS_AS(parse("[object]\nmesh = missing_file.obj\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nmode = replay\nrecords = nowhere\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("builtin object meshes") {
  const auto sphere = load_object_mesh("builtin:icosphere:0.05", 1.0);
  CHECK(sphere.is_watertight());
  for (const auto& v : sphere.vertices) CHECK(v.norm() == doctest::Approx(0.05));
  const auto box = load_object_mesh("builtin:box:0.06,0.06,0.12", 2.0);
  CHECK(box.bounds().extent().isApprox(Vec3(0.12, 0.12, 0.24)));
  CHECK(load_object_mesh("builtin:cylinder:0.03,0.1", 1.0).is_watertight());
  CHECK_THROWS_AS(load_object_mesh("builtin:torus:1", 1.0), ConfigError);
  CHECK_THROWS_AS(load_object_mesh("builtin:box:1,2", 1.0), ConfigError);
}

TEST_CASE("convergence point") {
  std::vector<ReconstructionFrame> frames = {frame_with(0, 100), frame_with(1, 50), frame_with(2, 20),
                                             frame_with(3, 10)};
  for (int t = 4; t <= 12; ++t) frames.push_back(frame_with(t, 10.0 * (1.0 - 0.001 * (t - 3))));
  CHECK(convergence_touch(frames) == 3);
  CHECK(convergence_touch(frames, 0.02, 20) == std::nullopt);

  // Timestep 0 never counts, even when the early curve is flat.
  std::vector<ReconstructionFrame> flat;
  for (int t = 0; t <= 6; ++t) flat.push_back(frame_with(t, 5.0));
  CHECK(convergence_touch(flat) == 1);

  std::vector<ReconstructionFrame> gaps = flat;
  gaps[3].cd_mm2 = std::nan("");
  CHECK(convergence_touch(gaps) == std::nullopt);
  CHECK(convergence_touch({}) == std::nullopt);
}

TEST_CASE("depth-only run gives a single frame") {
  auto c = small_run();
  c.exploration.touch_count = 0;
  const auto result = run_experiment(c);
  REQUIRE(result.frames.size() == 1);
  const auto& f = result.frames.front();
  CHECK(f.timestep == 0);
  CHECK(f.factors > 0);
  CHECK(!f.mesh.empty());
  CHECK(std::isfinite(f.cd_mm2));
  CHECK(result.summary.touches == 0);
}

TEST_CASE("touches reduce the error and keep uncertainty monotone") {
  auto c = small_run(3);
  c.exploration.touch_count = 20;
  int observed = 0;
  const auto result = run_experiment(c, [&](const ReconstructionFrame& f, const GpsgGraph& g) {
    CHECK(g.dirty_count() == 0);
    CHECK(f.timestep == observed++);
  });
  REQUIRE(result.frames.size() == 21);
  CHECK(result.summary.final_cd_mm2 < result.summary.depth_only_cd_mm2);
  CHECK(result.summary.trace_increases == 0);
  CHECK(result.summary.touches == 20);
  for (const auto& f : result.frames) CHECK(f.mesh.attribute.size() == f.mesh.vertex_count());
}

TEST_CASE("empty result writes header-only tables") {
  const auto dir = scratch("empty");
  RunResult empty;
  emit_outputs(empty, small_run(), dir.string());
  CHECK(slurp(dir / "metrics.csv") == "timestep,cd_mm2,factors,samples,touches,faces\n");
  CHECK(slurp(dir / "timings.csv") == "timestep,update_ms,query_ms\n");
  CHECK(fs::exists(dir / "summary.txt"));
  fs::remove_all(dir);
}

TEST_CASE("snapshots follow the interval") {
  const auto dir = scratch("snap");
  RunResult result;
  for (int t = 0; t <= 60; ++t) result.frames.push_back(frame_with(t, 1.0));
  result.frames[30].mesh = make_icosphere(0.05, 1);
  auto c = small_run();
  c.snapshot_interval = 30;
  emit_outputs(result, c, dir.string());
  std::vector<std::string> plys;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".ply") plys.push_back(e.path().filename().string());
  std::sort(plys.begin(), plys.end());
  CHECK(plys == std::vector<std::string>{"mesh_t000.ply", "mesh_t030.ply", "mesh_t060.ply"});
  CHECK(load_mesh((dir / "mesh_t030.ply").string()).face_count() == make_icosphere(0.05, 1).face_count());
  fs::remove_all(dir);
}

TEST_CASE("identical configs give identical metrics") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  const auto c = small_run(11);
  emit_outputs(run_experiment(c), c, a.string());
  emit_outputs(run_experiment(c), c, b.string());
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  const auto other = small_run(12);
  const auto o = scratch("det_o");
  emit_outputs(run_experiment(other), other, o.string());
  CHECK(slurp(a / "metrics.csv") != slurp(o / "metrics.csv"));
  for (const auto& d : {a, b, o}) fs::remove_all(d);
}

TEST_CASE("replay reproduces the recorded run") {
  const auto rec = scratch("rec"), rep = scratch("rep");
  auto c = small_run(5);
  c.save_records = true;
  c.output_dir = rec.string();
  emit_outputs(run_experiment(c), c, rec.string());
  REQUIRE(fs::exists(rec / "records" / "touches.rec"));
  REQUIRE(fs::exists(rec / "records" / "depth.png"));

  auto r = small_run(5);
  r.mode = RunMode::Replay;
  r.records_dir = (rec / "records").string();
  emit_outputs(run_experiment(r), r, rep.string());
  CHECK(slurp(rec / "metrics.csv") == slurp(rep / "metrics.csv"));
  fs::remove_all(rec);
  fs::remove_all(rep);
}

TEST_CASE("hemisphere exploration stays above the floor") {
  MeshQuery sphere(make_icosphere(0.05, 4));
  ExplorationPolicy p;
  p.touch_count = 30;
  p.min_z = 0.0;
  for (const auto& pose : sample_sensor_poses(sphere, p)) CHECK(pose.translation.z() > -1e-3);
  p.min_z = 1.0;
  CHECK_THROWS_AS(sample_sensor_poses(sphere, p), SimulationError);
}

TEST_CASE("exact GP comparison stays within the observation cap") {
  auto c = small_run();
  const auto cmp = compare_with_full_gp(c, 800);
  CHECK(cmp.observations <= 800);
  CHECK(cmp.observations > 0);
  CHECK(cmp.divergence.nodes_compared > 0);
  CHECK(std::isfinite(cmp.divergence.max_abs_phi));
}

TEST_CASE("run failures name their step") {
  auto c = small_run();
  c.radius_fraction = 2.0;
  try {
    run_experiment(c);
    FAIL("expected a failure");
  } catch (const StepError& e) {
    CHECK(e.step() == "init graph");
  } catch (const ConfigError&) {
    // also acceptable: rejected before the run starts
  }
}
