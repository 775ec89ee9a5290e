#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "tacmap/kernel.hpp"

namespace tacmap {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// S³ lattice of query nodes spanning `bbox` (corners included).
struct GridSpec {
  int S = 16;
  Aabb bbox;
  double radius_fraction = 0.15;
  double object_side = 0.0;  // metres; the association radius is radius_fraction * object_side

  void validate() const;
  double radius() const { return radius_fraction * object_side; }
  std::size_t node_count() const { return static_cast<std::size_t>(S) * S * S; }
  Vec3 spacing() const { return bbox.extent() / static_cast<double>(S - 1); }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * S + j) * S + i;
  }
  Vec3 position(int i, int j, int k) const;
};

struct PriorSpec {
  Vec4 mean;
  Mat4 cov;

  // b = (R, 0, 0, 0), Σb = diag(R³, 6R, 6R, 6R).
  static PriorSpec from_kernel(const KernelParams& params);
  void validate() const;
};

enum class FactorSource : std::uint8_t { Depth, Tactile, Base, Prior };
const char* to_string(FactorSource s);

struct GaussianFactor {
  std::size_t node = 0;
  Vec4 mean;
  Mat4 cov;
  FactorSource source = FactorSource::Tactile;
  int timestep = 0;
};

// Unary factor on a node from conditioning the GP on one measurement.
// Covariance is symmetrised and its eigenvalues floored at `eig_floor`.
GaussianFactor make_factor(const SurfaceSample& sample, const Vec3& node_position, const KernelParams& params,
                           double eig_floor = 1e-10);

struct QueryNode {
  Vec3 position;
  Vec4 eta;
  Mat4 lambda;
  std::uint32_t factor_count = 0;
  bool touched = false;
  // cache, valid when the node is not dirty
  Vec4 mean;
  Mat4 cov;
};

struct LoggedMeasurement {
  SurfaceSample sample;
  FactorSource source;
  int timestep;
};

struct UpdateReport {
  std::size_t factors_added = 0;
  std::size_t nodes_dirtied = 0;
  std::size_t dropped = 0;
  double wall_ms = 0.0;
};

struct QueryReport {
  std::size_t solves = 0;
  std::size_t trace_increases = 0;  // nodes whose trace(cov) grew since their last solve
  double wall_ms = 0.0;
};

enum class QuerySelection { All, Dirty };

class GpsgGraph {
 public:
  GpsgGraph(GridSpec grid, PriorSpec prior, KernelParams kernel);

  const GridSpec& grid() const { return grid_; }
  const PriorSpec& prior() const { return prior_; }
  const KernelParams& kernel() const { return kernel_; }
  const std::vector<QueryNode>& nodes() const { return nodes_; }
  const QueryNode& node(std::size_t j) const { return nodes_.at(j); }
  const std::vector<LoggedMeasurement>& measurements() const { return log_; }
  std::size_t dirty_count() const { return dirty_.size(); }

  // Indices of nodes within the association radius of `p`, in ascending order.
  std::vector<std::size_t> nodes_within_radius(const Vec3& p) const;

  UpdateReport add_measurements(std::span<const SurfaceSample> samples, FactorSource source, int timestep);
  void add_factor(const GaussianFactor& factor);

  // Re-solves dirty nodes (or all) and refreshes the cache; clean nodes cost nothing.
  QueryReport query(QuerySelection selection = QuerySelection::Dirty);

  void save_checkpoint(const std::filesystem::path& path) const;
  static GpsgGraph load_checkpoint(const std::filesystem::path& path);

 private:
  void fuse(std::size_t j, const Mat4& info, const Vec4& info_mean);
  void mark_dirty(std::size_t j);

  GridSpec grid_;
  PriorSpec prior_;
  KernelParams kernel_;
  std::vector<QueryNode> nodes_;
  std::vector<double> solved_trace_;
  std::vector<std::uint8_t> is_dirty_;
  std::vector<std::size_t> dirty_;
  std::vector<LoggedMeasurement> log_;
};

struct DivergenceReport {
  double max_abs_phi = 0.0;
  double mean_abs_phi = 0.0;
  std::size_t nodes_compared = 0;
};

// φ discrepancy between the graph and an exact GP over the same observations,
// evaluated at the given nodes (touched nodes when `nodes` is empty).
DivergenceReport compare_to_full_gp(GpsgGraph& graph, std::span<const GpObservation> observations,
                                    std::span<const std::size_t> nodes = {}, std::size_t cap = 2000);

}  // namespace tacmap
