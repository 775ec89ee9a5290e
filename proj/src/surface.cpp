#include "tacmap/surface.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "mc_tables.hpp"
#include "tacmap/mesh_query.hpp"

namespace tacmap {

namespace {

constexpr std::array<std::array<int, 3>, 8> kCorner = {{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};
constexpr std::array<std::array<int, 2>, 12> kEdge = {{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

// Keeps faces whose vertices are all kept; vertices are renumbered in order of first use.
UncertainMesh compact(const UncertainMesh& mesh, const std::vector<std::uint8_t>& keep) {
  UncertainMesh out;
  constexpr auto kUnused = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> remap(mesh.vertices.size(), kUnused);
  const bool has_attr = mesh.attribute.size() == mesh.vertices.size();
  const bool has_normals = mesh.normals.size() == mesh.vertices.size();
  for (const Face& f : mesh.faces) {
    if (!keep[f[0]] || !keep[f[1]] || !keep[f[2]]) continue;
    Face nf;
    for (int v = 0; v < 3; ++v) {
      std::uint32_t& m = remap[f[v]];
      if (m == kUnused) {
        m = static_cast<std::uint32_t>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[f[v]]);
        if (has_attr) out.attribute.push_back(mesh.attribute[f[v]]);
        if (has_normals) out.normals.push_back(mesh.normals[f[v]]);
      }
      nf[v] = m;
    }
    out.faces.push_back(nf);
  }
  return out;
}

}  // namespace

SdfField SdfField::from_graph(const GpsgGraph& graph) {
  if (graph.dirty_count() != 0) throw GraphError("graph has unsolved nodes; query before extracting");
  SdfField f;
  f.grid = graph.grid();
  const auto& nodes = graph.nodes();
  f.phi.reserve(nodes.size());
  f.variance.reserve(nodes.size());
  f.touched.reserve(nodes.size());
  for (const auto& n : nodes) {
    f.phi.push_back(n.mean[0]);
    f.variance.push_back(std::max(n.cov(0, 0), 0.0));
    f.touched.push_back(n.touched ? 1 : 0);
  }
  return f;
}

SdfField SdfField::from_function(const GridSpec& grid, const std::function<double(const Vec3&)>& fn,
                                 double variance) {
  SdfField f;
  f.grid = grid;
  const std::size_t n = grid.node_count();
  f.phi.resize(n);
  f.variance.assign(n, variance);
  f.touched.assign(n, 0);
  for (int k = 0; k < grid.S; ++k)
    for (int j = 0; j < grid.S; ++j)
      for (int i = 0; i < grid.S; ++i) f.phi[grid.index(i, j, k)] = fn(grid.position(i, j, k));
  return f;
}

void SdfField::validate() const {
  if (grid.S < 2) throw GraphError("field needs at least 2 nodes per axis");
  const std::size_t n = grid.node_count();
  if (phi.size() != n || variance.size() != n || touched.size() != n)
    throw GraphError("field arrays do not match the grid");
  for (std::size_t j = 0; j < n; ++j)
    if (!std::isfinite(phi[j]) || !std::isfinite(variance[j]) || variance[j] < 0.0)
      throw GraphError("field contains non-finite or negative-variance values");
}

namespace {

template <typename Value>
double trilinear(const GridSpec& grid, const Vec3& p, Value value) {
  const Vec3 u = ((p - grid.bbox.min).array() / grid.spacing().array())
                     .cwiseMax(0.0)
                     .cwiseMin(static_cast<double>(grid.S - 1));
  int i0[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    i0[a] = std::min(static_cast<int>(std::floor(u[a])), grid.S - 2);
    t[a] = u[a] - i0[a];
  }
  double v = 0.0;
  for (const auto& c : kCorner) {
    const double w = (c[0] ? t[0] : 1 - t[0]) * (c[1] ? t[1] : 1 - t[1]) * (c[2] ? t[2] : 1 - t[2]);
    v += w * value(grid.index(i0[0] + c[0], i0[1] + c[1], i0[2] + c[2]));
  }
  return v;
}

}  // namespace

double SdfField::trilinear_phi(const Vec3& p) const {
  return trilinear(grid, p, [&](std::size_t j) { return phi[j]; });
}

double SdfField::trilinear_std(const Vec3& p) const {
  return trilinear(grid, p, [&](std::size_t j) { return std::sqrt(variance[j]); });
}

UncertainMesh marching_cubes(const SdfField& field, double iso, bool require_touched) {
  field.validate();
  const GridSpec& g = field.grid;
  const int S = g.S;
  UncertainMesh mesh;
  // Vertex id per lattice edge, keyed by (lower node, axis).
  std::vector<std::uint32_t> edge_vertex(3 * g.node_count(), std::numeric_limits<std::uint32_t>::max());

  auto vertex_on_edge = [&](std::size_t na, std::size_t nb, int axis) {
    const std::size_t lo = std::min(na, nb), hi = std::max(na, nb);
    std::uint32_t& slot = edge_vertex[3 * lo + axis];
    if (slot != std::numeric_limits<std::uint32_t>::max()) return slot;
    const double pa = field.phi[lo], pb = field.phi[hi];
    const double t = std::clamp((iso - pa) / (pb - pa), 0.0, 1.0);
    const Vec3 xa = g.position(lo % S, (lo / S) % S, lo / (static_cast<std::size_t>(S) * S));
    Vec3 x = xa;
    x[axis] += t * g.spacing()[axis];
    slot = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(x);
    mesh.attribute.push_back((1 - t) * std::sqrt(field.variance[lo]) + t * std::sqrt(field.variance[hi]));
    return slot;
  };

  for (int k = 0; k + 1 < S; ++k)
    for (int j = 0; j + 1 < S; ++j)
      for (int i = 0; i + 1 < S; ++i) {
        std::array<std::size_t, 8> node;
        int cube = 0;
        bool reached = true;
        for (int c = 0; c < 8; ++c) {
          node[c] = g.index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
          if (field.phi[node[c]] < iso) cube |= 1 << c;
          reached = reached && field.touched[node[c]];
        }
        if (require_touched && !reached) continue;
        if (cube == 0 || cube == 255) continue;
        const signed char* tri = detail::kTriTable[cube];
        for (int t = 0; tri[t] >= 0; t += 3) {
          Face f;
          for (int v = 0; v < 3; ++v) {
            const auto& e = kEdge[tri[t + v]];
            const int a = e[0], b = e[1];
            int axis = 0;
            while (kCorner[a][axis] == kCorner[b][axis]) ++axis;
            f[v] = vertex_on_edge(node[a], node[b], axis);
          }
          // The table winds faces with normals toward the inside; flip to face increasing φ.
          std::swap(f[1], f[2]);
          if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) continue;
          mesh.faces.push_back(f);
          if (mesh.face_area(mesh.faces.size() - 1) <= 0.0) mesh.faces.pop_back();
        }
      }
  return compact(mesh, std::vector<std::uint8_t>(mesh.vertices.size(), 1));
}

UncertainMesh prune_unsupported(const UncertainMesh& mesh, std::span<const Vec3> measurements, double radius) {
  if (measurements.empty() || mesh.vertices.empty()) return {};
  const RadiusIndex index(measurements, radius);
  std::vector<std::uint8_t> supported(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) supported[v] = index.any_within(mesh.vertices[v]);
  return compact(mesh, supported);
}

}  // namespace tacmap
