#include "tacmap/tactile.hpp"

#include <algorithm>
#include <map>
#include <random>

#include <spdlog/spdlog.h>

namespace tacmap {

void SensorSpec::validate() const {
  if (width_px < 2 || height_px < 2) throw SimulationError("sensor needs at least 2x2 pixels");
  if (!(patch_width_m > 0 && patch_height_m > 0 && max_depth_m > 0))
    throw SimulationError("sensor dimensions must be positive");
  if (contact_threshold_m < 0 || pixel_noise_m < 0 || press_depth_m < 0)
    throw SimulationError("sensor thresholds must be non-negative");
}

Eigen::Vector2d SensorSpec::pixel_position(int col, int row) const {
  return {((col + 0.5) / width_px - 0.5) * patch_width_m, ((row + 0.5) / height_px - 0.5) * patch_height_m};
}

std::size_t TactileObservation::contact_count() const {
  return static_cast<std::size_t>(std::count_if(contact.begin(), contact.end(), [](auto c) { return c != 0; }));
}

// ---------------------------------------------------------------------------

namespace {

std::vector<RigidPose> uniform_surface_poses(const MeshQuery& mesh, const ExplorationPolicy& policy,
                                             double press_depth) {
  const auto n = static_cast<std::size_t>(policy.touch_count);
  const std::size_t candidate_count = std::max<std::size_t>(4000, 50 * n);
  auto candidates = sample_surface(mesh.mesh(), candidate_count, policy.seed);
  std::erase_if(candidates, [&](const Vec3& p) { return p.z() < policy.min_z; });
  if (candidates.empty()) throw SimulationError("no surface above exploration.min_z");

  // Farthest-point ordering spreads the touches evenly over the surface.
  std::vector<double> nearest(candidates.size(), std::numeric_limits<double>::infinity());
  std::vector<RigidPose> poses;
  poses.reserve(n);
  std::size_t pick = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3& s = candidates[pick];
    const Vec3 normal = mesh.closest_normal(s);
    poses.push_back(RigidPose::from_z_axis(-normal, s - press_depth * normal));
    double farthest = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      nearest[i] = std::min(nearest[i], (candidates[i] - s).squaredNorm());
      if (nearest[i] > farthest) {
        farthest = nearest[i];
        pick = i;
      }
    }
  }
  return poses;
}

std::vector<RigidPose> ring_grid_poses(const MeshQuery& mesh, const ExplorationPolicy& policy,
                                       double press_depth) {
  const Aabb box = mesh.mesh().bounds();
  const Vec3 c = box.center();
  const double far = box.diagonal() + 1.0;
  std::vector<RigidPose> poses;
  for (int h = 0; h < policy.ring_heights; ++h) {
    const double z = box.min.z() + (h + 0.5) / policy.ring_heights * box.extent().z();
    for (int a = 0; a < policy.ring_angles; ++a) {
      const double angle = 2.0 * M_PI * a / policy.ring_angles;
      const Vec3 inward(-std::cos(angle), -std::sin(angle), 0.0);
      const Ray ray{Vec3(c.x(), c.y(), z) - far * inward, inward};
      const auto hit = mesh.raycast(ray);
      if (!hit) {
        spdlog::warn("ring pose (angle {}, height {}) misses the object; skipped", a, h);
        continue;
      }
      poses.push_back(RigidPose::from_z_axis(inward, hit->point + press_depth * inward));
    }
  }
  return poses;
}

}  // namespace

std::vector<RigidPose> sample_sensor_poses(const MeshQuery& mesh, const ExplorationPolicy& policy,
                                           double press_depth) {
  if (policy.touch_count < 1) throw SimulationError("touch_count must be at least 1");
  if (!mesh.watertight()) throw SimulationError("pose sampling requires a watertight mesh");
  if (policy.mode == ExplorationMode::RingGrid) return ring_grid_poses(mesh, policy, press_depth);
  return uniform_surface_poses(mesh, policy, press_depth);
}

std::optional<TactileObservation> render_tactile(const MeshQuery& mesh, const RigidPose& pose,
                                                 const SensorSpec& spec, std::uint64_t noise_seed,
                                                 int timestep) {
  spec.validate();
  TactileObservation obs;
  obs.pose = pose;
  obs.width = spec.width_px;
  obs.height = spec.height_px;
  obs.timestep = timestep;
  const auto pixels = static_cast<std::size_t>(spec.width_px) * spec.height_px;
  obs.heightmap.assign(pixels, 0.0f);
  obs.contact.assign(pixels, 0);

  // Rays start behind the gel plane so surfaces that cross it are entered from outside.
  const double backoff = 3.0 * spec.max_depth_m + spec.press_depth_m;
  const Vec3 z = pose.z_axis();
  std::vector<double> penetration(pixels, 0.0);
  bool any = false;
  for (int row = 0; row < spec.height_px; ++row) {
    for (int col = 0; col < spec.width_px; ++col) {
      const auto xy = spec.pixel_position(col, row);
      const Vec3 start = pose.apply(Vec3(xy.x(), xy.y(), -backoff));
      const auto hit = mesh.raycast(Ray{start, z}, backoff);
      if (!hit) continue;
      const double depth = hit->front_face ? backoff - hit->distance : spec.max_depth_m;
      if (depth <= 0.0) continue;
      penetration[static_cast<std::size_t>(row) * spec.width_px + col] = depth;
      any = true;
    }
  }
  if (!any) return std::nullopt;

  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, spec.pixel_noise_m);
  for (std::size_t i = 0; i < pixels; ++i) {
    double d = penetration[i];
    if (d <= 0.0) continue;
    if (spec.pixel_noise_m > 0.0) d += noise(rng);
    d = std::clamp(d, 0.0, spec.max_depth_m);
    obs.heightmap[i] = static_cast<float>(d);
  }
  for (std::size_t i = 0; i < pixels; ++i)
    obs.contact[i] = obs.heightmap[i] > spec.contact_threshold_m ? 1 : 0;
  if (obs.contact_count() == 0) return std::nullopt;
  return obs;
}

// ---------------------------------------------------------------------------

std::vector<SurfaceSample> decimate_samples(std::span<const SurfaceSample> samples, std::size_t budget,
                                            double initial_voxel, double* voxel_out) {
  if (budget == 0 || samples.size() <= budget) {
    if (voxel_out) *voxel_out = 0.0;
    return {samples.begin(), samples.end()};
  }
  Aabb box;
  for (const auto& s : samples) box.extend(s.position);
  double voxel = initial_voxel > 0.0 ? initial_voxel : box.diagonal() / std::sqrt(double(budget));

  using Key = std::array<long, 3>;
  struct Accumulator {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    double sigma = 0.0;
    int count = 0;
  };
  for (;;) {
    std::map<Key, Accumulator> grid;
    for (const auto& s : samples) {
      const Vec3 rel = (s.position - box.min) / voxel;
      auto& acc = grid[{static_cast<long>(rel.x()), static_cast<long>(rel.y()), static_cast<long>(rel.z())}];
      acc.position += s.position;
      acc.normal += s.normal;
      acc.sigma = std::max(acc.sigma, s.noise_sigma);
      ++acc.count;
    }
    std::vector<SurfaceSample> out;
    for (const auto& [key, acc] : grid) {
      const double nn = acc.normal.norm();
      if (nn < 1e-12) continue;
      const SurfaceSample merged{acc.position / acc.count, acc.normal / nn, acc.sigma};
      const bool crowded = std::any_of(out.begin(), out.end(), [&](const SurfaceSample& kept) {
        return (kept.position - merged.position).norm() < voxel;
      });
      if (!crowded) out.push_back(merged);
    }
    if (out.size() <= budget) {
      if (voxel_out) *voxel_out = voxel;
      return out;
    }
    voxel *= 1.1;
  }
}

std::vector<SurfaceSample> tactile_to_samples(const TactileObservation& obs, const SensorSpec& spec,
                                              const Decimation& decimation, double noise_sigma) {
  if (obs.contact_count() == 0) throw SimulationError("tactile observation has an empty contact mask");
  if (!(noise_sigma > 0.0)) throw SimulationError("noise sigma must be positive");
  const double px = spec.patch_width_m / obs.width;
  const double py = spec.patch_height_m / obs.height;
  // Pixels at the penetration cap are not on the surface.
  const double saturated = spec.max_depth_m * (1.0 - 1e-6);

  auto usable = [&](int c, int r) {
    return c >= 0 && r >= 0 && c < obs.width && r < obs.height && obs.in_contact(c, r);
  };
  // Central difference where both neighbours are in contact, one-sided otherwise.
  auto derivative = [&](int c, int r, int dc, int dr, double pitch, double& out) {
    const bool fwd = usable(c + dc, r + dr), bwd = usable(c - dc, r - dr);
    if (fwd && bwd)
      out = (obs.depth(c + dc, r + dr) - obs.depth(c - dc, r - dr)) / (2.0 * pitch);
    else if (fwd)
      out = (obs.depth(c + dc, r + dr) - obs.depth(c, r)) / pitch;
    else if (bwd)
      out = (obs.depth(c, r) - obs.depth(c - dc, r - dr)) / pitch;
    else
      return false;
    return true;
  };

  std::vector<SurfaceSample> raw;
  raw.reserve(obs.contact_count());
  for (int r = 0; r < obs.height; ++r) {
    for (int c = 0; c < obs.width; ++c) {
      if (!obs.in_contact(c, r)) continue;
      const double h = obs.depth(c, r);
      if (h >= saturated) continue;
      double hx, hy;
      if (!derivative(c, r, 1, 0, px, hx) || !derivative(c, r, 0, 1, py, hy)) continue;
      const auto xy = spec.pixel_position(c, r);
      // The surface sits at sensor z = -h; the solid lies towards +z.
      const Vec3 local_normal = -Vec3(hx, hy, 1.0).normalized();
      raw.push_back({obs.pose.apply(Vec3(xy.x(), xy.y(), -h)), obs.pose.rotate(local_normal), noise_sigma});
    }
  }
  if (raw.empty()) throw SimulationError("no contact pixel has a usable gradient");
  const double area = static_cast<double>(raw.size()) * px * py;
  const double voxel = decimation.budget ? 0.8 * std::sqrt(area / static_cast<double>(decimation.budget)) : 0.0;
  return decimate_samples(raw, decimation.budget, voxel);
}

std::vector<SurfaceSample> hallucinate_base(const Aabb& object_box, std::span<const RigidPose> nearest_poses,
                                            double noise_sigma) {
  std::vector<SurfaceSample> out;
  out.reserve(nearest_poses.size());
  for (const auto& pose : nearest_poses) {
    Vec3 p = pose.translation;
    p.x() = std::clamp(p.x(), object_box.min.x(), object_box.max.x());
    p.y() = std::clamp(p.y(), object_box.min.y(), object_box.max.y());
    p.z() = object_box.min.z();
    out.push_back({p, Vec3(0, 0, -1), noise_sigma});
  }
  return out;
}

}  // namespace tacmap
