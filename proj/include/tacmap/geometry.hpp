#pragma once

#include <array>
#include <cstdint>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace tacmap {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box. Default-constructed boxes are empty (min > max).
struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  bool empty() const { return (min.array() > max.array()).any(); }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double diagonal() const { return extent().norm(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Aabb padded(double margin) const {
    return {min - Vec3::Constant(margin), max + Vec3::Constant(margin)};
  }
};

/// Rigid transform mapping sensor/camera-frame points into the world frame.
struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidPose identity() { return {}; }

  /// Builds a pose whose z-axis is `z_axis`; x is chosen deterministically.
  static RigidPose from_z_axis(const Vec3& z_axis, const Vec3& origin);

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 rotate(const Vec3& v) const { return rotation * v; }
  RigidPose inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
  RigidPose operator*(const RigidPose& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }
  Vec3 x_axis() const { return rotation.col(0); }
  Vec3 y_axis() const { return rotation.col(1); }
  Vec3 z_axis() const { return rotation.col(2); }

  /// Orthonormal with det +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length

  /// Normalizes `direction`; throws GeometryError on a zero vector.
  static Ray make(const Vec3& origin, const Vec3& direction);
  Vec3 at(double t) const { return origin + t * direction; }
};

/// A surface point with outward unit normal and the noise level of its source.
struct SurfaceSample {
  Vec3 position;
  Vec3 normal;
  double noise_sigma = 0.0;

  bool is_valid() const {
    return std::abs(normal.norm() - 1.0) <= 1e-6 && noise_sigma > 0.0 &&
           position.allFinite();
  }
};

using Face = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec3> normals;      // optional, per vertex
  std::vector<double> attribute;  // optional, per vertex (SDF std-dev on outputs)

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  bool empty() const { return faces.empty(); }

  Vec3 face_normal(std::size_t f) const;  // unit, right-handed winding
  double face_area(std::size_t f) const;
  double surface_area() const;
  Aabb bounds() const;

  /// Throws GeometryError if indices are out of range, a face has area below
  /// `min_area`, or optional arrays have the wrong length.
  void validate(double min_area = 1e-12) const;

  /// Every undirected edge shared by exactly two faces.
  bool is_watertight() const;
  std::size_t edge_count() const;
  long euler_characteristic() const {
    return static_cast<long>(vertices.size()) - static_cast<long>(edge_count()) +
           static_cast<long>(faces.size());
  }

  void transform(const RigidPose& pose);
  void scale(double factor);
};

// Procedural solids, outward-oriented and watertight.
TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero());
TriangleMesh make_box(const Vec3& extents, const Vec3& center = Vec3::Zero());
TriangleMesh make_cylinder(double radius, double height, int segments,
                           const Vec3& center = Vec3::Zero());

/// Load OBJ or PLY (ASCII or binary little-endian). Coordinates are multiplied by `scale`.
TriangleMesh load_mesh(const std::string& path, double scale = 1.0);
void save_obj(const TriangleMesh& mesh, const std::string& path);
/// Binary little-endian PLY; writes the per-vertex attribute as float "uncertainty" when present.
void save_ply(const TriangleMesh& mesh, const std::string& path, bool binary = true);

/// `count` points uniformly distributed over the mesh surface by area.
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

}  // namespace tacmap
