#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "tacmap/geometry.hpp"
#include "tacmap/mesh_query.hpp"

namespace tacmap {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gel sensing area and rendering parameters. Defaults give a 640x480 image
/// over 2.66 cm² with 4:3 aspect and a 1 mm penetration cap.
struct SensorSpec {
  int width_px = 640;
  int height_px = 480;
  double patch_width_m = 0.018833;
  double patch_height_m = 0.014125;
  double max_depth_m = 1e-3;
  double contact_threshold_m = 1e-5;
  double pixel_noise_m = 5e-5;
  double press_depth_m = 5e-4;

  void validate() const;
  double pixel_pitch_x() const { return patch_width_m / width_px; }
  double pixel_pitch_y() const { return patch_height_m / height_px; }
  /// Sensor-frame (x, y) of a pixel center; the patch is centered on the pose origin.
  Eigen::Vector2d pixel_position(int col, int row) const;
};

/// Penetration depth image and contact mask for one touch. The pose z-axis
/// points from the sensor into the object; the gel surface is the z = 0 plane.
struct TactileObservation {
  RigidPose pose;
  int width = 0;
  int height = 0;
  std::vector<float> heightmap;       // row-major, metres
  std::vector<std::uint8_t> contact;  // row-major, 0/1
  int timestep = 0;

  std::size_t contact_count() const;
  float depth(int col, int row) const { return heightmap[static_cast<std::size_t>(row) * width + col]; }
  bool in_contact(int col, int row) const { return contact[static_cast<std::size_t>(row) * width + col] != 0; }
};

enum class ExplorationMode { UniformSurface, RingGrid };

struct ExplorationPolicy {
  ExplorationMode mode = ExplorationMode::UniformSurface;
  int touch_count = 60;
  std::uint64_t seed = 0;
  int ring_angles = 8;
  int ring_heights = 5;
  double min_z = -std::numeric_limits<double>::infinity();  // uniform mode: no touches below this height
};

/// Output budget for voxel-grid decimation. budget == 0 keeps every point.
struct Decimation {
  std::size_t budget = 60;
};

/// Sensor poses with z antiparallel to the outward surface normal, pressed
/// `press_depth` into the surface (uniform mode), or approaching the vertical
/// axis of the bounding box horizontally (ring mode). Deterministic in `policy.seed`.
std::vector<RigidPose> sample_sensor_poses(const MeshQuery& mesh, const ExplorationPolicy& policy,
                                           double press_depth = 5e-4);

/// Geometric stand-in for the image-to-heightmap model. Returns nullopt when no
/// pixel is in contact.
std::optional<TactileObservation> render_tactile(const MeshQuery& mesh, const RigidPose& pose,
                                                 const SensorSpec& spec, std::uint64_t noise_seed,
                                                 int timestep = 0);

/// Back-projects contact pixels to world-frame surface samples with outward
/// normals from height-map gradients, then voxel-decimates to the budget.
std::vector<SurfaceSample> tactile_to_samples(const TactileObservation& obs, const SensorSpec& spec,
                                              const Decimation& decimation, double noise_sigma);

/// Samples on the table plane below touches, normals pointing down. Positions
/// are the touch positions projected to the box floor and clamped to its footprint.
std::vector<SurfaceSample> hallucinate_base(const Aabb& object_box, std::span<const RigidPose> nearest_poses,
                                            double noise_sigma);

/// Voxel-grid averaging of oriented points (noise sigma is the voxel maximum) followed by a minimum-spacing pass
/// at the voxel size. The voxel grows until at most `budget` samples remain.
/// Returns the voxel size used through `voxel_out` when non-null.
std::vector<SurfaceSample> decimate_samples(std::span<const SurfaceSample> samples, std::size_t budget,
                                            double initial_voxel, double* voxel_out = nullptr);

}  // namespace tacmap
