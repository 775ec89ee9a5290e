#pragma once

#include <optional>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "tacmap/geometry.hpp"

namespace tacmap {

struct RayHit {
  double distance = 0.0;
  Vec3 point;
  Vec3 face_normal;  // unit, oriented against the ray direction
  std::uint32_t face = 0;
  bool front_face = true;  // ray enters the solid through this face
};

struct ClosestPoint {
  Vec3 point;
  double distance = 0.0;
  std::uint32_t face = 0;
};

/// Owns a mesh together with its bounding-volume hierarchy. Immutable once
/// built; all queries are const and safe to call concurrently.
class MeshQuery {
 public:
  explicit MeshQuery(TriangleMesh mesh);

  const TriangleMesh& mesh() const { return mesh_; }
  bool watertight() const { return watertight_; }

  /// Nearest hit with distance in (0, t_max].
  std::optional<RayHit> raycast(const Ray& ray,
                                double t_max = std::numeric_limits<double>::infinity()) const;
  /// Same contract as raycast, testing every triangle.
  std::optional<RayHit> raycast_brute_force(const Ray& ray) const;
  /// Number of surface crossings along the whole positive ray.
  int count_crossings(const Ray& ray) const;

  ClosestPoint closest_point(const Vec3& p) const;
  double unsigned_distance(const Vec3& p) const { return closest_point(p).distance; }

  /// Negative inside. Sign is the majority vote of ray parity along three
  /// fixed, jittered directions. Throws GeometryError if the mesh is not watertight.
  double signed_distance(const Vec3& p) const;

  /// Outward normal of the face closest to p.
  Vec3 closest_normal(const Vec3& p) const;

 private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: offset into order_, inner: right child
    std::uint32_t count = 0;  // 0 for inner nodes
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids);
  bool intersect_triangle(std::uint32_t face, const Ray& ray, double& t) const;

  TriangleMesh mesh_;
  bool watertight_ = false;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
  std::vector<Aabb> face_boxes_;
};

/// Symmetric squared Chamfer distance (m²):
/// mean_a min_b |a-b|² + mean_b min_a |a-b|². Throws on empty input.
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);

/// Static 3-D k-d tree over a point set for nearest-neighbour queries.
class PointIndex {
 public:
  explicit PointIndex(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  /// Index and squared distance of the nearest point. Index is size() when empty.
  std::pair<std::size_t, double> nearest(const Vec3& q) const;

 private:
  struct Node {
    std::uint32_t begin, end;
    std::uint32_t left = 0, right = 0;  // 0 means leaf
    int axis = 0;
    double split = 0.0;
  };
  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, const Vec3& q, std::size_t& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Uniform hash grid over points for fixed-radius queries.
class RadiusIndex {
 public:
  RadiusIndex(std::span<const Vec3> points, double radius);

  /// True if some indexed point lies within the radius of `q`.
  bool any_within(const Vec3& q) const;
  double radius() const { return radius_; }

 private:
  struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey&) const = default;
  };
  struct CellHash {
    std::size_t operator()(const CellKey& k) const noexcept;
  };
  CellKey key(const Vec3& p) const;

  double radius_;
  std::vector<Vec3> points_;
  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> cells_;
};

}  // namespace tacmap
