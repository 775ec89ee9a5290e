#pragma once

#include <functional>
#include <span>
#include <vector>

#include "tacmap/gpsg.hpp"

namespace tacmap {

// φ mean and variance sampled on the graph lattice.
struct SdfField {
  GridSpec grid;
  std::vector<double> phi;
  std::vector<double> variance;
  std::vector<std::uint8_t> touched;

  // The graph must have no dirty nodes (call query first).
  static SdfField from_graph(const GpsgGraph& graph);
  static SdfField from_function(const GridSpec& grid, const std::function<double(const Vec3&)>& f,
                                double variance = 0.0);

  void validate() const;
  double trilinear_phi(const Vec3& p) const;
  double trilinear_std(const Vec3& p) const;
};

// Extracted surface; `attribute` holds the per-vertex φ standard deviation.
using UncertainMesh = TriangleMesh;

// Zero-level set (or `iso`) of the field. Faces are wound so their normals
// point toward increasing φ. Empty when the field has no crossing. With
// `require_touched`, cells with a corner no measurement reached are skipped.
UncertainMesh marching_cubes(const SdfField& field, double iso = 0.0, bool require_touched = false);

// Drops vertices farther than `radius` from every measurement, the faces that
// use them, and any vertex left without a face.
UncertainMesh prune_unsupported(const UncertainMesh& mesh, std::span<const Vec3> measurements, double radius);

}  // namespace tacmap
