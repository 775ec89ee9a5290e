#pragma once

#include <cstdint>
#include <vector>

#include "tacmap/geometry.hpp"
#include "tacmap/mesh_query.hpp"
#include "tacmap/tactile.hpp"

namespace tacmap {

/// Pinhole camera. Camera frame: x right, y down, z forward; pixel centers at
/// integer coordinates.
struct CameraModel {
  RigidPose pose;  // camera -> world
  int width = 640;
  int height = 480;
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;

  /// Camera at `eye` looking at `target`, with image "up" as close to world +z as possible.
  static CameraModel look_at(const Vec3& eye, const Vec3& target, int width = 640, int height = 480,
                             double focal = 525.0);
  Vec3 pixel_direction(int col, int row) const;  // camera frame, z = 1
};

struct DepthMap {
  CameraModel camera;
  std::vector<float> depth;  // row-major z-depth in metres, 0 = no return

  float at(int col, int row) const { return depth[static_cast<std::size_t>(row) * camera.width + col]; }
  std::size_t valid_count() const;
  Vec3 back_project(int col, int row) const;  // world frame
};

/// Ray-cast depth image with additive Gaussian noise on hits.
DepthMap render_depthmap(const MeshQuery& mesh, const CameraModel& camera, double noise_sigma,
                         std::uint64_t seed);

struct DepthConversion {
  std::size_t budget = 500;
  int normal_window_px = 8;  // half-width of the plane-fit window
  double max_depth_jump_m = 0.02;
  double max_incidence_deg = 75.0;  // grazing returns beyond this are dropped
};

/// World-frame samples with camera-facing normals from a least-squares plane
/// fit over neighbouring pixels. Pixels without usable neighbours or seen at
/// grazing incidence are dropped; throws if nothing survives.
std::vector<SurfaceSample> depthmap_to_samples(const DepthMap& map, const DepthConversion& conversion,
                                               double noise_sigma);

/// Rounds depths to whole millimetres, the resolution of the 16-bit PNG format.
void quantize_to_millimetres(DepthMap& map);

}  // namespace tacmap
