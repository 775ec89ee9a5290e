#include "tacmap/mesh_query.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tacmap {

namespace {

constexpr std::uint32_t kLeafSize = 4;

// Slab test; returns entry distance or +inf on a miss.
double ray_box(const Aabb& box, const Vec3& origin, const Vec3& inv_dir, double t_max) {
  double t0 = 0.0, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    if (std::isinf(inv_dir[a])) {
      // Ray parallel to this slab.
      if (origin[a] < box.min[a] || origin[a] > box.max[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double near = (box.min[a] - origin[a]) * inv_dir[a];
    double far = (box.max[a] - origin[a]) * inv_dir[a];
    if (near > far) std::swap(near, far);
    if (near > t0) t0 = near;
    if (far < t1) t1 = far;
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  return t0;
}

double box_distance2(const Aabb& box, const Vec3& p) {
  const Vec3 d = (box.min - p).cwiseMax(p - box.max).cwiseMax(0.0);
  return d.squaredNorm();
}

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace

MeshQuery::MeshQuery(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  mesh_.validate();
  watertight_ = mesh_.is_watertight();
  const auto n = static_cast<std::uint32_t>(mesh_.faces.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  face_boxes_.resize(n);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t f = 0; f < n; ++f) {
    for (auto v : mesh_.faces[f]) face_boxes_[f].extend(mesh_.vertices[v]);
    centroids[f] = face_boxes_[f].center();
  }
  nodes_.reserve(2 * n / kLeafSize + 1);
  build(0, n, centroids);
}

std::uint32_t MeshQuery::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, centroid_box;
  for (auto i = begin; i < end; ++i) {
    box.extend(face_boxes_[order_[i]]);
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[index].box = box;
  if (end - begin <= kLeafSize) {
    nodes_[index].first = begin;
    nodes_[index].count = end - begin;
    return index;
  }
  int axis = 0;
  centroid_box.extent().maxCoeff(&axis);
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centroids[a][axis] != centroids[b][axis])
                       return centroids[a][axis] < centroids[b][axis];
                     return a < b;
                   });
  build(begin, mid, centroids);
  const auto right = build(mid, end, centroids);
  nodes_[index].first = right;
  nodes_[index].count = 0;
  return index;
}

// Möller–Trumbore. Writes t for any hit with t > 0. Barycentric bounds are
// slightly inclusive so rays through shared edges and vertices cannot slip between faces.
bool MeshQuery::intersect_triangle(std::uint32_t face, const Ray& ray, double& t) const {
  const auto& f = mesh_.faces[face];
  const Vec3& v0 = mesh_.vertices[f[0]];
  const Vec3 e1 = mesh_.vertices[f[1]] - v0;
  const Vec3 e2 = mesh_.vertices[f[2]] - v0;
  const Vec3 p = ray.direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-300) return false;
  const double inv = 1.0 / det;
  const Vec3 s = ray.origin - v0;
  constexpr double kEps = 1e-10;
  const double u = s.dot(p) * inv;
  if (u < -kEps || u > 1.0 + kEps) return false;
  const Vec3 q = s.cross(e1);
  const double v = ray.direction.dot(q) * inv;
  if (v < -kEps || u + v > 1.0 + kEps) return false;
  t = e2.dot(q) * inv;
  return t > 0.0;
}

namespace {

RayHit make_hit(const TriangleMesh& mesh, const Ray& ray, std::uint32_t face, double t) {
  RayHit hit;
  hit.distance = t;
  hit.point = ray.at(t);
  hit.face = face;
  const Vec3 n = mesh.face_normal(face);
  hit.front_face = n.dot(ray.direction) < 0.0;
  hit.face_normal = hit.front_face ? n : Vec3(-n);
  return hit;
}

}  // namespace

std::optional<RayHit> MeshQuery::raycast(const Ray& ray, double t_max) const {
  const Vec3 inv_dir = ray.direction.cwiseInverse();
  double best_t = t_max;
  std::uint32_t best_face = 0;
  bool found = false;
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (ray_box(node.box, ray.origin, inv_dir, best_t) == std::numeric_limits<double>::infinity())
      continue;
    if (node.count > 0) {
      for (auto i = node.first; i < node.first + node.count; ++i) {
        double t;
        const auto f = order_[i];
        if (intersect_triangle(f, ray, t) &&
            (t < best_t || (t == best_t && found && f < best_face))) {
          best_t = t;
          best_face = f;
          found = true;
        }
      }
    } else {
      const auto self = static_cast<std::uint32_t>(&node - nodes_.data());
      stack[top++] = node.first;
      stack[top++] = self + 1;
    }
  }
  if (!found) return std::nullopt;
  return make_hit(mesh_, ray, best_face, best_t);
}

std::optional<RayHit> MeshQuery::raycast_brute_force(const Ray& ray) const {
  double best_t = std::numeric_limits<double>::infinity();
  std::uint32_t best_face = 0;
  bool found = false;
  for (std::uint32_t f = 0; f < mesh_.faces.size(); ++f) {
    double t;
    if (intersect_triangle(f, ray, t) && t < best_t) {
      best_t = t;
      best_face = f;
      found = true;
    }
  }
  if (!found) return std::nullopt;
  return make_hit(mesh_, ray, best_face, best_t);
}

int MeshQuery::count_crossings(const Ray& ray) const {
  const Vec3 inv_dir = ray.direction.cwiseInverse();
  const double inf = std::numeric_limits<double>::infinity();
  int crossings = 0;
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (ray_box(node.box, ray.origin, inv_dir, inf) == inf) continue;
    if (node.count > 0) {
      for (auto i = node.first; i < node.first + node.count; ++i) {
        double t;
        if (intersect_triangle(order_[i], ray, t)) ++crossings;
      }
    } else {
      const auto self = static_cast<std::uint32_t>(&node - nodes_.data());
      stack[top++] = node.first;
      stack[top++] = self + 1;
    }
  }
  return crossings;
}

ClosestPoint MeshQuery::closest_point(const Vec3& p) const {
  ClosestPoint best;
  double best_d2 = std::numeric_limits<double>::infinity();
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const auto index = stack[--top];
    const Node& node = nodes_[index];
    if (box_distance2(node.box, p) > best_d2) continue;
    if (node.count > 0) {
      for (auto i = node.first; i < node.first + node.count; ++i) {
        const auto f = order_[i];
        const auto& t = mesh_.faces[f];
        const Vec3 c = closest_on_triangle(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                           mesh_.vertices[t[2]]);
        const double d2 = (c - p).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best.point = c;
          best.face = f;
        }
      }
    } else {
      // Visit the nearer child first.
      const auto left = index + 1, right = node.first;
      const double dl = box_distance2(nodes_[left].box, p);
      const double dr = box_distance2(nodes_[right].box, p);
      if (dl < dr) {
        stack[top++] = right;
        stack[top++] = left;
      } else {
        stack[top++] = left;
        stack[top++] = right;
      }
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

Vec3 MeshQuery::closest_normal(const Vec3& p) const {
  return mesh_.face_normal(closest_point(p).face);
}

double MeshQuery::signed_distance(const Vec3& p) const {
  if (!watertight_) throw GeometryError("signed distance requires a watertight mesh");
  static const Vec3 kDirections[3] = {Vec3(0.5773, 0.5812, 0.5735).normalized(),
                                      Vec3(-0.6211, 0.3129, -0.7185).normalized(),
                                      Vec3(0.1732, -0.9213, 0.3481).normalized()};
  int inside_votes = 0;
  for (const auto& d : kDirections)
    if (count_crossings(Ray{p, d}) % 2 == 1) ++inside_votes;
  const double dist = unsigned_distance(p);
  return inside_votes >= 2 ? -dist : dist;
}

// ---------------------------------------------------------------------------

PointIndex::PointIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / 8 + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::uint32_t PointIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= 8) return index;
  Aabb box;
  for (auto i = begin; i < end; ++i) box.extend(points_[order_[i]]);
  int axis = 0;
  box.extent().maxCoeff(&axis);
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[index].left = left;
  nodes_[index].right = right;
  nodes_[index].axis = axis;
  nodes_[index].split = split;
  return index;
}

void PointIndex::search(std::uint32_t index, const Vec3& q, std::size_t& best, double& best_d2) const {
  const Node& node = nodes_[index];
  if (node.left == 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      const double d2 = (points_[order_[i]] - q).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = order_[i];
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const auto near = diff < 0 ? node.left : node.right;
  const auto far = diff < 0 ? node.right : node.left;
  search(near, q, best, best_d2);
  if (diff * diff < best_d2) search(far, q, best, best_d2);
}

std::pair<std::size_t, double> PointIndex::nearest(const Vec3& q) const {
  std::size_t best = points_.size();
  double best_d2 = std::numeric_limits<double>::infinity();
  if (!points_.empty()) search(0, q, best, best_d2);
  return {best, best_d2};
}

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw GeometryError("chamfer distance of an empty point set");
  const PointIndex index_a({a.begin(), a.end()});
  const PointIndex index_b({b.begin(), b.end()});
  double sum_ab = 0.0, sum_ba = 0.0;
  for (const auto& p : a) sum_ab += index_b.nearest(p).second;
  for (const auto& p : b) sum_ba += index_a.nearest(p).second;
  return sum_ab / static_cast<double>(a.size()) + sum_ba / static_cast<double>(b.size());
}

// ---------------------------------------------------------------------------

RadiusIndex::RadiusIndex(std::span<const Vec3> points, double radius)
    : radius_(radius), points_(points.begin(), points.end()) {
  if (!(radius > 0.0)) throw GeometryError("radius index needs a positive radius");
  for (std::uint32_t i = 0; i < points_.size(); ++i) cells_[key(points_[i])].push_back(i);
}

std::size_t RadiusIndex::CellHash::operator()(const CellKey& k) const noexcept {
  return static_cast<std::size_t>(k.x * 73856093LL ^ k.y * 19349663LL ^ k.z * 83492791LL);
}

RadiusIndex::CellKey RadiusIndex::key(const Vec3& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / radius_)),
          static_cast<std::int64_t>(std::floor(p.y() / radius_)),
          static_cast<std::int64_t>(std::floor(p.z() / radius_))};
}

bool RadiusIndex::any_within(const Vec3& q) const {
  const CellKey c = key(q);
  const double r2 = radius_ * radius_;
  for (std::int64_t dx = -1; dx <= 1; ++dx)
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dz = -1; dz <= 1; ++dz) {
        auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
        if (it == cells_.end()) continue;
        for (auto i : it->second)
          if ((points_[i] - q).squaredNorm() <= r2) return true;
      }
  return false;
}

}  // namespace tacmap
