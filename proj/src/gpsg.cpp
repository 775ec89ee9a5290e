#include "tacmap/gpsg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

namespace tacmap {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

constexpr char kCheckpointMagic[8] = {'G', 'P', 'S', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw GraphError("checkpoint truncated");
  return v;
}

template <typename M>
void put_matrix(std::ostream& os, const M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(os, m.data()[i]);
}

template <typename M>
void get_matrix(std::istream& is, M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get<double>(is);
}

}  // namespace

void GridSpec::validate() const {
  if (S < 2) throw GraphError("grid needs at least 2 nodes per axis");
  if (bbox.empty() || (bbox.extent().array() <= 0.0).any()) throw GraphError("grid bbox is degenerate");
  if (!(radius_fraction > 0.0 && radius_fraction < 1.0)) throw GraphError("radius fraction must be in (0, 1)");
  if (!(object_side > 0.0)) throw GraphError("object side length must be positive");
}

Vec3 GridSpec::position(int i, int j, int k) const {
  return bbox.min + spacing().cwiseProduct(Vec3(i, j, k));
}

PriorSpec PriorSpec::from_kernel(const KernelParams& params) {
  return {Vec4(params.support, 0.0, 0.0, 0.0), prior_block(params)};
}

void PriorSpec::validate() const {
  if (!(mean[0] > 0.0)) throw GraphError("prior SDF value must be positive (empty space)");
  Eigen::LLT<Mat4> llt(cov);
  if (llt.info() != Eigen::Success || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * cov.norm())
    throw GraphError("prior covariance must be symmetric positive definite");
}

const char* to_string(FactorSource s) {
  switch (s) {
    case FactorSource::Depth: return "depth";
    case FactorSource::Tactile: return "tactile";
    case FactorSource::Base: return "base";
    case FactorSource::Prior: return "prior";
  }
  return "unknown";
}

GaussianFactor make_factor(const SurfaceSample& sample, const Vec3& node_position, const KernelParams& params,
                           double eig_floor) {
  const GpPosterior post = condition_on_one(GpObservation::from_sample(sample), node_position, params);
  GaussianFactor f;
  f.mean = post.mean;
  // Every eigenvalue above the floor: nothing to clamp.
  if (Eigen::LLT<Mat4>(post.cov - eig_floor * Mat4::Identity()).info() == Eigen::Success) {
    f.cov = post.cov;
    return f;
  }
  Eigen::SelfAdjointEigenSolver<Mat4> es(post.cov);
  const Vec4 eig = es.eigenvalues().cwiseMax(eig_floor);
  f.cov = es.eigenvectors() * eig.asDiagonal() * es.eigenvectors().transpose();
  f.cov = 0.5 * (f.cov + f.cov.transpose()).eval();
  return f;
}

GpsgGraph::GpsgGraph(GridSpec grid, PriorSpec prior, KernelParams kernel)
    : grid_(std::move(grid)), prior_(std::move(prior)), kernel_(kernel) {
  grid_.validate();
  prior_.validate();
  kernel_.validate();
  const Mat4 info = prior_.cov.inverse();
  const Vec4 info_mean = info * prior_.mean;
  nodes_.resize(grid_.node_count());
  for (int k = 0; k < grid_.S; ++k)
    for (int j = 0; j < grid_.S; ++j)
      for (int i = 0; i < grid_.S; ++i) {
        QueryNode& n = nodes_[grid_.index(i, j, k)];
        n.position = grid_.position(i, j, k);
        n.eta = info_mean;
        n.lambda = info;
        n.mean = prior_.mean;
        n.cov = prior_.cov;
      }
  solved_trace_.assign(nodes_.size(), prior_.cov.trace());
  is_dirty_.assign(nodes_.size(), 0);
}

std::vector<std::size_t> GpsgGraph::nodes_within_radius(const Vec3& p) const {
  const double r = grid_.radius();
  const Vec3 h = grid_.spacing();
  const Vec3 lo = ((p - grid_.bbox.min).array() - r) / h.array();
  const Vec3 hi = ((p - grid_.bbox.min).array() + r) / h.array();
  int lo_i[3], hi_i[3];
  for (int a = 0; a < 3; ++a) {
    lo_i[a] = std::max(0, static_cast<int>(std::ceil(lo[a] - 1e-9)));
    hi_i[a] = std::min(grid_.S - 1, static_cast<int>(std::floor(hi[a] + 1e-9)));
  }
  std::vector<std::size_t> out;
  for (int k = lo_i[2]; k <= hi_i[2]; ++k)
    for (int j = lo_i[1]; j <= hi_i[1]; ++j)
      for (int i = lo_i[0]; i <= hi_i[0]; ++i) {
        const std::size_t idx = grid_.index(i, j, k);
        if ((nodes_[idx].position - p).squaredNorm() <= r * r) out.push_back(idx);
      }
  return out;
}

void GpsgGraph::mark_dirty(std::size_t j) {
  if (!is_dirty_[j]) {
    is_dirty_[j] = 1;
    dirty_.push_back(j);
  }
}

void GpsgGraph::fuse(std::size_t j, const Mat4& info, const Vec4& info_mean) {
  QueryNode& n = nodes_[j];
  n.lambda += info;
  n.eta += info_mean;
  ++n.factor_count;
  n.touched = true;
  mark_dirty(j);
}

void GpsgGraph::add_factor(const GaussianFactor& factor) {
  if (factor.node >= nodes_.size()) throw GraphError("factor refers to a node outside the grid");
  const Eigen::LLT<Mat4> llt(factor.cov);
  if (llt.info() != Eigen::Success) throw GraphError("factor covariance is not positive definite");
  const Mat4 info = llt.solve(Mat4::Identity());
  fuse(factor.node, 0.5 * (info + info.transpose()), info * factor.mean);
}

UpdateReport GpsgGraph::add_measurements(std::span<const SurfaceSample> samples, FactorSource source,
                                         int timestep) {
  const auto start = Clock::now();
  UpdateReport report;
  const std::size_t dirty_before = dirty_.size();
  for (const auto& s : samples) {
    if (!grid_.bbox.contains(s.position)) {
      ++report.dropped;
      continue;
    }
    log_.push_back({s, source, timestep});
    for (std::size_t j : nodes_within_radius(s.position)) {
      GaussianFactor f = make_factor(s, nodes_[j].position, kernel_);
      f.node = j;
      f.source = source;
      f.timestep = timestep;
      add_factor(f);
      ++report.factors_added;
    }
  }
  report.nodes_dirtied = dirty_.size() - dirty_before;
  report.wall_ms = elapsed_ms(start);
  if (report.dropped)
    spdlog::warn("t={}: dropped {} {} samples outside the workspace", timestep, report.dropped, to_string(source));
  return report;
}

QueryReport GpsgGraph::query(QuerySelection selection) {
  const auto start = Clock::now();
  QueryReport report;
  auto solve = [&](std::size_t j) {
    QueryNode& n = nodes_[j];
    const Eigen::LLT<Mat4> llt(n.lambda);
    if (llt.info() != Eigen::Success) throw GraphError("node information matrix lost positive definiteness");
    n.cov = llt.solve(Mat4::Identity());
    n.cov = 0.5 * (n.cov + n.cov.transpose()).eval();
    n.mean = llt.solve(n.eta);
    const double trace = n.cov.trace();
    if (trace > solved_trace_[j] * (1.0 + 1e-9)) ++report.trace_increases;
    solved_trace_[j] = trace;
    ++report.solves;
  };
  if (selection == QuerySelection::All) {
    for (std::size_t j = 0; j < nodes_.size(); ++j) solve(j);
  } else {
    std::sort(dirty_.begin(), dirty_.end());
    for (std::size_t j : dirty_) solve(j);
  }
  for (std::size_t j : dirty_) is_dirty_[j] = 0;
  dirty_.clear();
  report.wall_ms = elapsed_ms(start);
  return report;
}

void GpsgGraph::save_checkpoint(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw GraphError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put(os, kCheckpointVersion);
  put<std::int32_t>(os, grid_.S);
  put_matrix(os, grid_.bbox.min);
  put_matrix(os, grid_.bbox.max);
  put(os, grid_.radius_fraction);
  put(os, grid_.object_side);
  put(os, kernel_.support);
  put(os, kernel_.sigma_n_default);
  put_matrix(os, prior_.mean);
  put_matrix(os, prior_.cov);
  for (const auto& n : nodes_) {
    put_matrix(os, n.eta);
    put_matrix(os, n.lambda);
    put(os, n.factor_count);
    put<std::uint8_t>(os, n.touched ? 1 : 0);
  }
  if (!os) throw GraphError("failed writing checkpoint " + path.string());
}

GpsgGraph GpsgGraph::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw GraphError("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(magic, magic + 8, kCheckpointMagic)) throw GraphError("not a graph checkpoint");
  if (get<std::uint32_t>(is) != kCheckpointVersion) throw GraphError("unsupported checkpoint version");
  GridSpec grid;
  grid.S = get<std::int32_t>(is);
  get_matrix(is, grid.bbox.min);
  get_matrix(is, grid.bbox.max);
  grid.radius_fraction = get<double>(is);
  grid.object_side = get<double>(is);
  KernelParams kernel;
  kernel.support = get<double>(is);
  kernel.sigma_n_default = get<double>(is);
  PriorSpec prior;
  get_matrix(is, prior.mean);
  get_matrix(is, prior.cov);
  GpsgGraph g(grid, prior, kernel);
  for (std::size_t j = 0; j < g.nodes_.size(); ++j) {
    auto& n = g.nodes_[j];
    get_matrix(is, n.eta);
    get_matrix(is, n.lambda);
    n.factor_count = get<std::uint32_t>(is);
    n.touched = get<std::uint8_t>(is) != 0;
    if (n.factor_count) g.mark_dirty(j);
  }
  g.query(QuerySelection::Dirty);
  return g;
}

DivergenceReport compare_to_full_gp(GpsgGraph& graph, std::span<const GpObservation> observations,
                                    std::span<const std::size_t> nodes, std::size_t cap) {
  if (observations.size() > cap)
    throw GraphError("full-GP comparison limited to " + std::to_string(cap) + " observations");
  graph.query(QuerySelection::Dirty);
  std::vector<std::size_t> selected(nodes.begin(), nodes.end());
  if (selected.empty())
    for (std::size_t j = 0; j < graph.nodes().size(); ++j)
      if (graph.node(j).touched) selected.push_back(j);
  DivergenceReport report;
  if (selected.empty()) return report;
  const FullGp gp(observations, graph.kernel());
  double sum = 0.0;
  for (std::size_t j : selected) {
    const auto& n = graph.node(j);
    const double diff = std::abs(n.mean[0] - gp.mean(n.position)[0]);
    report.max_abs_phi = std::max(report.max_abs_phi, diff);
    sum += diff;
  }
  report.nodes_compared = selected.size();
  report.mean_abs_phi = sum / static_cast<double>(selected.size());
  return report;
}

}  // namespace tacmap
