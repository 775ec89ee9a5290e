#include "tacmap/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "tacmap/records.hpp"

namespace tacmap {

namespace fs = std::filesystem;

namespace {

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long n = to_int(key, v);
  if (n < 0) throw ConfigError(key + ": must not be negative");
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"object.mesh", [](auto& c, auto&, auto& v) { c.mesh = v; }},
      {"object.scale", [](auto& c, auto& k, auto& v) { c.mesh_scale = to_double(k, v); }},
      {"grid.size", [](auto& c, auto& k, auto& v) { c.grid_size = static_cast<int>(to_int(k, v)); }},
      {"grid.radius_fraction", [](auto& c, auto& k, auto& v) { c.radius_fraction = to_double(k, v); }},
      {"grid.padding", [](auto& c, auto& k, auto& v) { c.workspace_padding = to_double(k, v); }},
      {"gp.kernel_support", [](auto& c, auto& k, auto& v) { c.kernel_support = to_double(k, v); }},
      {"gp.prior_phi", [](auto& c, auto& k, auto& v) { c.prior_phi = to_double(k, v); }},
      {"gp.prior_cov_scale", [](auto& c, auto& k, auto& v) { c.prior_cov_scale = to_double(k, v); }},
      {"sensor.width_px", [](auto& c, auto& k, auto& v) { c.sensor.width_px = static_cast<int>(to_int(k, v)); }},
      {"sensor.height_px", [](auto& c, auto& k, auto& v) { c.sensor.height_px = static_cast<int>(to_int(k, v)); }},
      {"sensor.patch_width", [](auto& c, auto& k, auto& v) { c.sensor.patch_width_m = to_double(k, v); }},
      {"sensor.patch_height", [](auto& c, auto& k, auto& v) { c.sensor.patch_height_m = to_double(k, v); }},
      {"sensor.max_depth", [](auto& c, auto& k, auto& v) { c.sensor.max_depth_m = to_double(k, v); }},
      {"sensor.contact_threshold", [](auto& c, auto& k, auto& v) { c.sensor.contact_threshold_m = to_double(k, v); }},
      {"sensor.pixel_noise", [](auto& c, auto& k, auto& v) { c.sensor.pixel_noise_m = to_double(k, v); }},
      {"sensor.press_depth", [](auto& c, auto& k, auto& v) { c.sensor.press_depth_m = to_double(k, v); }},
      {"exploration.mode",
       [](auto& c, auto& k, auto& v) {
         if (v == "uniform")
           c.exploration.mode = ExplorationMode::UniformSurface;
         else if (v == "ring")
           c.exploration.mode = ExplorationMode::RingGrid;
         else
           throw ConfigError(k + ": expected uniform or ring, got '" + v + "'");
       }},
      {"exploration.touches", [](auto& c, auto& k, auto& v) { c.exploration.touch_count = static_cast<int>(to_int(k, v)); }},
      {"exploration.ring_angles", [](auto& c, auto& k, auto& v) { c.exploration.ring_angles = static_cast<int>(to_int(k, v)); }},
      {"exploration.min_z", [](auto& c, auto& k, auto& v) { c.exploration.min_z = to_double(k, v); }},
      {"exploration.ring_heights", [](auto& c, auto& k, auto& v) { c.exploration.ring_heights = static_cast<int>(to_int(k, v)); }},
      {"noise.tactile", [](auto& c, auto& k, auto& v) { c.sigma_tactile = to_double(k, v); }},
      {"noise.depth", [](auto& c, auto& k, auto& v) { c.sigma_depth = to_double(k, v); }},
      {"decimation.tactile_budget", [](auto& c, auto& k, auto& v) { c.tactile_budget = to_count(k, v); }},
      {"decimation.depth_budget", [](auto& c, auto& k, auto& v) { c.depth_conversion.budget = to_count(k, v); }},
      {"depth.enabled", [](auto& c, auto& k, auto& v) { c.use_depth = to_bool(k, v); }},
      {"depth.distance", [](auto& c, auto& k, auto& v) { c.camera_distance = to_double(k, v); }},
      {"depth.elevation_deg", [](auto& c, auto& k, auto& v) { c.camera_elevation_deg = to_double(k, v); }},
      {"depth.azimuth_deg", [](auto& c, auto& k, auto& v) { c.camera_azimuth_deg = to_double(k, v); }},
      {"depth.normal_window_px", [](auto& c, auto& k, auto& v) { c.depth_conversion.normal_window_px = static_cast<int>(to_int(k, v)); }},
      {"depth.max_depth_jump", [](auto& c, auto& k, auto& v) { c.depth_conversion.max_depth_jump_m = to_double(k, v); }},
      {"depth.max_incidence_deg", [](auto& c, auto& k, auto& v) { c.depth_conversion.max_incidence_deg = to_double(k, v); }},
      {"depth.hallucinate_base", [](auto& c, auto& k, auto& v) { c.hallucinate_base = to_bool(k, v); }},
      {"extraction.skip_untouched", [](auto& c, auto& k, auto& v) { c.skip_untouched_cells = to_bool(k, v); }},
      {"extraction.prune", [](auto& c, auto& k, auto& v) { c.prune = to_bool(k, v); }},
      {"run.seed", [](auto& c, auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"run.mode",
       [](auto& c, auto& k, auto& v) {
         if (v == "sim")
           c.mode = RunMode::Sim;
         else if (v == "replay")
           c.mode = RunMode::Replay;
         else
           throw ConfigError(k + ": expected sim or replay, got '" + v + "'");
       }},
      {"run.records", [](auto& c, auto&, auto& v) { c.records_dir = v; }},
      {"run.save_records", [](auto& c, auto& k, auto& v) { c.save_records = to_bool(k, v); }},
      {"run.output", [](auto& c, auto&, auto& v) { c.output_dir = v; }},
      {"run.snapshot_interval", [](auto& c, auto& k, auto& v) { c.snapshot_interval = static_cast<int>(to_int(k, v)); }},
      {"run.cd_samples", [](auto& c, auto& k, auto& v) { c.cd_samples = to_count(k, v); }},
  };
  return table;
}

// Keys allowed outside any section.
const std::map<std::string, std::string>& top_level_aliases() {
  static const std::map<std::string, std::string> aliases = {
      {"mesh", "object.mesh"}, {"seed", "run.seed"}, {"output", "run.output"}};
  return aliases;
}

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

std::string spec_argument(const std::string& spec, const std::string& prefix) {
  return spec.substr(prefix.size());
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

template <typename F>
auto step(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StepError&) {
    throw;
  } catch (const std::exception& e) {
    throw StepError(name, e.what());
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (mesh.empty()) throw ConfigError("object.mesh is required");
  if (!(mesh_scale > 0.0)) throw ConfigError("object.scale must be positive");
  if (grid_size < 2) throw ConfigError("grid.size must be at least 2");
  if (!(radius_fraction > 0.0 && radius_fraction < 1.0)) throw ConfigError("grid.radius_fraction must be in (0, 1)");
  if (!(workspace_padding >= 0.0)) throw ConfigError("grid.padding must not be negative");
  if (kernel_support < 0.0 || prior_phi < 0.0) throw ConfigError("gp values must not be negative");
  if (!(prior_cov_scale > 0.0)) throw ConfigError("gp.prior_cov_scale must be positive");
  if (!(sigma_tactile > 0.0 && sigma_depth > 0.0)) throw ConfigError("noise levels must be positive");
  if (exploration.touch_count < 0) throw ConfigError("exploration.touches must not be negative");
  if (snapshot_interval < 0) throw ConfigError("run.snapshot_interval must not be negative");
  if (cd_samples == 0) throw ConfigError("run.cd_samples must be positive");
  try {
    sensor.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("sensor: ") + e.what());
  }
  if (mesh.rfind("builtin:", 0) != 0 && !fs::exists(mesh)) throw ConfigError("mesh file not found: " + mesh);
  if (mode == RunMode::Replay) {
    if (records_dir.empty()) throw ConfigError("replay mode needs run.records");
    if (!fs::exists(fs::path(records_dir) / "touches.rec"))
      throw ConfigError("no touches.rec in records directory " + records_dir);
  }
}

ExperimentConfig parse_config(std::istream& in, const std::string& base_dir) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  ExperimentConfig c;
  auto apply = [&](const std::string& key, const std::string& value) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(c, key, value);
  };
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      const auto alias = top_level_aliases().find(name);
      if (alias == top_level_aliases().end()) throw ConfigError("unknown top-level key '" + name + "'");
      apply(alias->second, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) apply(name + "." + key, leaf.data());
  }
  if (c.mesh.rfind("builtin:", 0) != 0) c.mesh = resolve(base_dir, c.mesh);
  c.records_dir = resolve(base_dir, c.records_dir);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in, fs::path(path).parent_path().string());
}

TriangleMesh load_object_mesh(const std::string& spec, double scale) {
  TriangleMesh mesh;
  if (spec.rfind("builtin:icosphere:", 0) == 0) {
    const auto args = to_list("object.mesh", spec_argument(spec, "builtin:icosphere:"));
    if (args.empty() || args.size() > 2) throw ConfigError("builtin:icosphere takes R[,subdivisions]");
    mesh = make_icosphere(args[0], args.size() > 1 ? static_cast<int>(args[1]) : 4);
  } else if (spec.rfind("builtin:box:", 0) == 0) {
    const auto args = to_list("object.mesh", spec_argument(spec, "builtin:box:"));
    if (args.size() != 3) throw ConfigError("builtin:box takes X,Y,Z");
    mesh = make_box(Vec3(args[0], args[1], args[2]));
  } else if (spec.rfind("builtin:cylinder:", 0) == 0) {
    const auto args = to_list("object.mesh", spec_argument(spec, "builtin:cylinder:"));
    if (args.size() < 2 || args.size() > 3) throw ConfigError("builtin:cylinder takes R,H[,segments]");
    mesh = make_cylinder(args[0], args[1], args.size() > 2 ? static_cast<int>(args[2]) : 64);
  } else if (spec.rfind("builtin:", 0) == 0) {
    throw ConfigError("unknown builtin mesh '" + spec + "'");
  } else {
    return load_mesh(spec, scale);
  }
  if (scale != 1.0) mesh.scale(scale);
  return mesh;
}

std::optional<int> convergence_touch(const std::vector<ReconstructionFrame>& frames, double tolerance,
                                     int window) {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].timestep < 1) continue;
    if (i + static_cast<std::size_t>(window) >= frames.size()) break;
    bool settled = true;
    for (int w = 1; w <= window && settled; ++w) {
      const double prev = frames[i + w - 1].cd_mm2, cur = frames[i + w].cd_mm2;
      settled = std::isfinite(prev) && std::isfinite(cur) && prev > 0.0 && std::abs(cur - prev) < tolerance * prev;
    }
    if (settled) return frames[i].timestep;
  }
  return std::nullopt;
}

RunSummary summarize(const std::vector<ReconstructionFrame>& frames) {
  RunSummary s;
  if (frames.empty()) return s;
  s.depth_only_cd_mm2 = frames.front().cd_mm2;
  s.final_cd_mm2 = frames.back().cd_mm2;
  s.touches = frames.back().touches;
  s.convergence_touch = convergence_touch(frames);
  std::vector<double> per_touch;
  for (const auto& f : frames) {
    s.trace_increases += f.trace_increases;
    if (f.timestep >= 1) per_touch.push_back(static_cast<double>(f.factors));
  }
  s.median_factors_per_touch = median(per_touch);
  return s;
}

RunResult run_experiment(const ExperimentConfig& config, const FrameObserver& observer) {
  config.validate();
  const MeshQuery object = step("load mesh", [&] { return MeshQuery(load_object_mesh(config.mesh, config.mesh_scale)); });
  const Aabb box = object.mesh().bounds();
  const Vec3 extent = box.extent();

  GridSpec grid;
  grid.S = config.grid_size;
  grid.bbox = {box.min - config.workspace_padding * extent, box.max + config.workspace_padding * extent};
  grid.radius_fraction = config.radius_fraction;
  grid.object_side = std::max(extent.x(), extent.y());

  KernelParams kernel;
  kernel.support = config.kernel_support > 0.0 ? config.kernel_support : box.diagonal();
  kernel.sigma_n_default = config.sigma_tactile;
  PriorSpec prior = PriorSpec::from_kernel(kernel);
  if (config.prior_phi > 0.0) prior.mean[0] = config.prior_phi;
  prior.cov *= config.prior_cov_scale;

  GpsgGraph graph = step("init graph", [&] { return GpsgGraph(grid, prior, kernel); });
  const double radius = grid.radius();
  spdlog::info("workspace S={} r={:.4f} m R={:.4f} m", grid.S, radius, kernel.support);

  ExplorationPolicy policy = config.exploration;
  policy.seed = mix(config.seed, 4);

  const auto truth = sample_surface(object.mesh(), config.cd_samples, mix(config.seed, 1));
  const std::uint64_t recon_seed = mix(config.seed, 2);

  std::optional<TouchRecordWriter> recorder;
  fs::path records_out;
  if (config.save_records && config.mode == RunMode::Sim) {
    records_out = fs::path(config.output_dir) / "records";
    fs::create_directories(records_out);
    recorder.emplace((records_out / "touches.rec").string());
  }

  RunResult result;
  int touches = 0;
  auto finish_frame = [&](int timestep, std::size_t factors, std::size_t samples, double update_ms) {
    ReconstructionFrame frame;
    frame.timestep = timestep;
    frame.factors = factors;
    frame.samples = samples;
    frame.update_ms = update_ms;
    frame.touches = touches;
    const QueryReport q = step("query", [&] { return graph.query(QuerySelection::Dirty); });
    frame.query_ms = q.wall_ms;
    frame.trace_increases = q.trace_increases;
    frame.mesh = step("extract surface", [&] {
      const SdfField field = SdfField::from_graph(graph);
      UncertainMesh mesh = marching_cubes(field, 0.0, config.skip_untouched_cells);
      if (!config.prune) return mesh;
      std::vector<Vec3> support;
      support.reserve(graph.measurements().size());
      for (const auto& m : graph.measurements()) support.push_back(m.sample.position);
      return prune_unsupported(mesh, support, radius);
    });
    frame.cd_mm2 = step("chamfer distance", [&] {
      if (frame.mesh.empty()) return std::nan("");
      const auto recon = sample_surface(frame.mesh, config.cd_samples, recon_seed);
      return chamfer_distance(recon, truth) * 1e6;
    });
    if (observer) observer(frame, graph);
    spdlog::debug("t={} cd={:.3f} mm2 factors={} faces={}", timestep, frame.cd_mm2, factors, frame.mesh.face_count());
    result.frames.push_back(std::move(frame));
  };

  // Timestep 0: the overlooking depth camera (and optional hallucinated base).
  std::vector<TactileObservation> replayed;
  if (config.mode == RunMode::Replay)
    replayed = step("read records", [&] { return read_touch_records((fs::path(config.records_dir) / "touches.rec").string()); });

  {
    std::size_t factors = 0, samples = 0;
    double update_ms = 0.0;
    if (config.use_depth) {
      const DepthMap depth = step("render depth", [&] {
        if (config.mode == RunMode::Replay) {
          const fs::path dir(config.records_dir);
          return load_depth_png((dir / "depth.png").string(), (dir / "depth.txt").string());
        }
        const double el = config.camera_elevation_deg * M_PI / 180.0, az = config.camera_azimuth_deg * M_PI / 180.0;
        const Vec3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
        const auto cam = CameraModel::look_at(box.center() + config.camera_distance * dir, box.center());
        DepthMap map = render_depthmap(object, cam, config.sigma_depth, mix(config.seed, 3));
        quantize_to_millimetres(map);
        if (recorder) save_depth_png(map, (records_out / "depth.png").string(), (records_out / "depth.txt").string());
        return map;
      });
      const auto depth_samples = step("depth samples", [&] { return depthmap_to_samples(depth, config.depth_conversion, config.sigma_depth); });
      const UpdateReport u = step("graph update", [&] { return graph.add_measurements(depth_samples, FactorSource::Depth, 0); });
      factors += u.factors_added;
      samples += depth_samples.size();
      update_ms += u.wall_ms;
    }
    if (config.hallucinate_base) {
      std::vector<RigidPose> poses;
      if (config.mode == RunMode::Replay)
        for (const auto& o : replayed) poses.push_back(o.pose);
      else if (policy.touch_count > 0)
        poses = sample_sensor_poses(object, policy, config.sensor.press_depth_m);
      // The lowest band of touches stands in for the nearest poses to the table.
      double zmin = std::numeric_limits<double>::infinity();
      for (const auto& p : poses) zmin = std::min(zmin, p.translation.z());
      std::vector<RigidPose> lowest;
      for (const auto& p : poses)
        if (p.translation.z() <= zmin + 0.1 * extent.z()) lowest.push_back(p);
      const auto base = hallucinate_base(box, lowest, 2.0 * config.sigma_depth);
      const UpdateReport u = step("graph update", [&] { return graph.add_measurements(base, FactorSource::Base, 0); });
      factors += u.factors_added;
      samples += base.size();
      update_ms += u.wall_ms;
    }
    finish_frame(0, factors, samples, update_ms);
  }

  std::vector<RigidPose> poses;
  if (config.mode == RunMode::Sim && policy.touch_count > 0)
    poses = step("plan touches", [&] { return sample_sensor_poses(object, policy, config.sensor.press_depth_m); });
  const int count = config.mode == RunMode::Replay ? static_cast<int>(replayed.size()) : static_cast<int>(poses.size());

  for (int t = 1; t <= count; ++t) {
    std::optional<TactileObservation> obs;
    if (config.mode == RunMode::Replay) {
      obs = replayed[static_cast<std::size_t>(t - 1)];
    } else {
      obs = step("render touch", [&] {
        auto o = render_tactile(object, poses[static_cast<std::size_t>(t - 1)], config.sensor, mix(config.seed, 1000 + t), t);
        if (o) {
          quantize_to_record(*o);
          if (recorder) recorder->write(*o);
        }
        return o;
      });
    }
    std::size_t factors = 0, samples = 0;
    double update_ms = 0.0;
    if (obs && obs->contact_count() > 0) {
      ++touches;
      const auto touch_samples = step("touch samples", [&] {
        return tactile_to_samples(*obs, config.sensor, Decimation{config.tactile_budget}, config.sigma_tactile);
      });
      const UpdateReport u = step("graph update", [&] { return graph.add_measurements(touch_samples, FactorSource::Tactile, t); });
      factors = u.factors_added;
      samples = touch_samples.size();
      update_ms = u.wall_ms;
    } else {
      spdlog::warn("touch {} made no contact", t);
    }
    finish_frame(t, factors, samples, update_ms);
  }
  result.summary = summarize(result.frames);
  return result;
}

GpComparison compare_with_full_gp(const ExperimentConfig& config, std::size_t max_observations) {
  ExperimentConfig c = config;
  c.snapshot_interval = 0;
  c.save_records = false;
  c.hallucinate_base = false;
  std::size_t fixed = c.use_depth ? c.depth_conversion.budget : 0;
  if (fixed > max_observations) {
    c.depth_conversion.budget = max_observations / 2;
    fixed = c.depth_conversion.budget;
  }
  const std::size_t per_touch = std::max<std::size_t>(c.tactile_budget, 1);
  c.exploration.touch_count =
      std::min(c.exploration.touch_count, static_cast<int>((max_observations - fixed) / per_touch));

  GpComparison out;
  std::optional<GpsgGraph> last;
  run_experiment(c, [&](const ReconstructionFrame& f, const GpsgGraph& g) {
    out.touches = f.touches;
    last = g;
  });
  if (!last) throw StepError("compare", "the run produced no frames");
  std::vector<GpObservation> obs;
  for (const auto& m : last->measurements()) obs.push_back(GpObservation::from_sample(m.sample));
  out.observations = obs.size();
  out.divergence = step("full GP", [&] { return compare_to_full_gp(*last, obs, {}, max_observations); });
  return out;
}

void emit_outputs(const RunResult& result, const ExperimentConfig& config, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path out(dir);
  auto open = [&](const std::string& name) {
    std::ofstream os(out / name);
    if (!os) throw StepError("emit outputs", "cannot write " + (out / name).string());
    return os;
  };
  {
    auto os = open("metrics.csv");
    os << "timestep,cd_mm2,factors,samples,touches,faces\n";
    for (const auto& f : result.frames)
      os << fmt::format("{},{:.6f},{},{},{},{}\n", f.timestep, f.cd_mm2, f.factors, f.samples, f.touches,
                        f.mesh.face_count());
  }
  {
    auto os = open("timings.csv");
    os << "timestep,update_ms,query_ms\n";
    for (const auto& f : result.frames) os << fmt::format("{},{:.4f},{:.4f}\n", f.timestep, f.update_ms, f.query_ms);
  }
  if (config.snapshot_interval > 0)
    for (const auto& f : result.frames)
      if (f.timestep % config.snapshot_interval == 0)
        save_ply(f.mesh, (out / fmt::format("mesh_t{:03d}.ply", f.timestep)).string());
  {
    const auto& s = result.summary;
    auto os = open("summary.txt");
    os << fmt::format("frames={}\ntouches={}\ndepth_only_cd_mm2={:.6f}\nfinal_cd_mm2={:.6f}\n", result.frames.size(),
                      s.touches, s.depth_only_cd_mm2, s.final_cd_mm2);
    os << "convergence_touch=" << (s.convergence_touch ? std::to_string(*s.convergence_touch) : "none") << "\n";
    os << fmt::format("median_factors_per_touch={:.1f}\ntrace_increases={}\n", s.median_factors_per_touch,
                      s.trace_increases);
  }
}

}  // namespace tacmap
