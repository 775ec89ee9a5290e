#include "tacmap/depth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Cholesky>

namespace tacmap {

CameraModel CameraModel::look_at(const Vec3& eye, const Vec3& target, int width, int height, double focal) {
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  const Vec3 forward = (target - eye).normalized();
  Vec3 up = Vec3::UnitZ();
  if (std::abs(forward.dot(up)) > 0.999) up = Vec3::UnitY();
  const Vec3 down = -(up - up.dot(forward) * forward).normalized();
  cam.pose.rotation.col(0) = down.cross(forward);
  cam.pose.rotation.col(1) = down;
  cam.pose.rotation.col(2) = forward;
  cam.pose.translation = eye;
  return cam;
}

Vec3 CameraModel::pixel_direction(int col, int row) const {
  return {(col - cx) / fx, (row - cy) / fy, 1.0};
}

std::size_t DepthMap::valid_count() const {
  return static_cast<std::size_t>(std::count_if(depth.begin(), depth.end(), [](float d) { return d > 0.0f; }));
}

Vec3 DepthMap::back_project(int col, int row) const {
  return camera.pose.apply(static_cast<double>(at(col, row)) * camera.pixel_direction(col, row));
}

DepthMap render_depthmap(const MeshQuery& mesh, const CameraModel& camera, double noise_sigma, std::uint64_t seed) {
  DepthMap map;
  map.camera = camera;
  map.depth.assign(static_cast<std::size_t>(camera.width) * camera.height, 0.0f);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  for (int row = 0; row < camera.height; ++row) {
    for (int col = 0; col < camera.width; ++col) {
      const Vec3 d = camera.pixel_direction(col, row);
      const double len = d.norm();
      const auto hit = mesh.raycast(Ray{camera.pose.translation, camera.pose.rotate(d / len)});
      if (!hit) continue;
      double z = hit->distance / len;
      if (noise_sigma > 0.0) z += noise(rng);
      map.depth[static_cast<std::size_t>(row) * camera.width + col] = static_cast<float>(std::max(z, 0.0));
    }
  }
  return map;
}

void quantize_to_millimetres(DepthMap& map) {
  for (auto& d : map.depth) d = static_cast<float>(std::round(static_cast<double>(d) * 1000.0) / 1000.0);
}

std::vector<SurfaceSample> depthmap_to_samples(const DepthMap& map, const DepthConversion& conversion,
                                               double noise_sigma) {
  if (!(noise_sigma > 0.0)) throw SimulationError("noise sigma must be positive");
  const auto& cam = map.camera;
  const int w = std::max(1, conversion.normal_window_px);
  auto valid = [&](int c, int r) { return c >= 0 && r >= 0 && c < cam.width && r < cam.height && map.at(c, r) > 0.0f; };

  // Camera-frame back-projections, computed once.
  std::vector<Vec3> local(map.depth.size(), Vec3::Zero());
  for (int r = 0; r < cam.height; ++r)
    for (int c = 0; c < cam.width; ++c)
      if (valid(c, r))
        local[static_cast<std::size_t>(r) * cam.width + c] = static_cast<double>(map.at(c, r)) * cam.pixel_direction(c, r);

  const double min_cos = std::cos(conversion.max_incidence_deg * M_PI / 180.0);
  std::vector<SurfaceSample> raw;
  double footprint = 0.0;
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      if (!valid(c, r)) continue;
      const float depth = map.at(c, r);
      // Least-squares plane z = a + b x + c y over the window; noise lives in depth, so regress on it.
      Eigen::Matrix3d AtA = Eigen::Matrix3d::Zero();
      Vec3 Atz = Vec3::Zero();
      int count = 0;
      for (int dr = -w; dr <= w; ++dr)
        for (int dc = -w; dc <= w; ++dc) {
          const int nc = c + dc, nr = r + dr;
          if (!valid(nc, nr) || std::abs(map.at(nc, nr) - depth) > conversion.max_depth_jump_m) continue;
          const Vec3& q = local[static_cast<std::size_t>(nr) * cam.width + nc];
          const Vec3 row(1.0, q.x(), q.y());
          AtA += row * row.transpose();
          Atz += row * q.z();
          ++count;
        }
      if (count < 3) continue;
      const Eigen::LDLT<Eigen::Matrix3d> ldlt(AtA);
      if (ldlt.info() != Eigen::Success || std::abs(AtA.determinant()) < 1e-30) continue;
      const Vec3 coef = ldlt.solve(Atz);
      if (!coef.allFinite()) continue;
      Vec3 n_local(coef[1], coef[2], -1.0);
      n_local.normalize();
      const Vec3& p_local = local[static_cast<std::size_t>(r) * cam.width + c];
      const double facing = n_local.dot(-p_local.normalized());
      if (facing < min_cos) continue;
      raw.push_back({cam.pose.apply(p_local), cam.pose.rotate(n_local), noise_sigma});
      footprint += (depth / cam.fx) * (depth / cam.fy);
    }
  }
  if (raw.empty()) throw SimulationError("depth map has no pixel with usable neighbours");
  const double voxel =
      conversion.budget ? 0.8 * std::sqrt(footprint / static_cast<double>(conversion.budget)) : 0.0;
  return decimate_samples(raw, conversion.budget, voxel);
}

}  // namespace tacmap
