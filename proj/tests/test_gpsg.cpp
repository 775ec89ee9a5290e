#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "tacmap/gpsg.hpp"

using namespace tacmap;

namespace {

GridSpec cube_grid(int S, double half, double side) {
  GridSpec g;
  g.S = S;
  g.bbox = {Vec3::Constant(-half), Vec3::Constant(half)};
  g.object_side = side;
  return g;
}

SurfaceSample random_sample(std::mt19937_64& rng, double half, double sigma) {
  std::uniform_real_distribution<double> u(-half, half);
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 normal(n(rng), n(rng), n(rng));
  return {Vec3(u(rng), u(rng), u(rng)), normal.normalized(), sigma};
}

std::vector<SurfaceSample> sphere_samples(std::size_t count, double radius, double sigma) {
  auto pts = sample_surface(make_icosphere(radius, 4), count, 11);
  std::vector<SurfaceSample> out;
  for (auto& p : pts) out.push_back({p, p.normalized(), sigma});
  return out;
}

}  // namespace

TEST_CASE("grid geometry and prior installation") {
  GridSpec g = cube_grid(2, 0.5, 1.0);
  PriorSpec prior{Vec4(0.1, 0, 0, 0), Mat4::Identity()};
  GpsgGraph graph(g, prior, KernelParams{1.0, 1e-3});
  REQUIRE(graph.nodes().size() == 8);
  for (const auto& n : graph.nodes()) {
    CHECK((n.mean - Vec4(0.1, 0, 0, 0)).norm() == 0.0);
    CHECK((n.cov - Mat4::Identity()).norm() == 0.0);
  }
  auto report = graph.query(QuerySelection::All);
  CHECK(report.solves == 8);
  for (const auto& n : graph.nodes()) CHECK((n.mean - Vec4(0.1, 0, 0, 0)).norm() < 1e-15);

  GridSpec big = cube_grid(16, 0.1, 0.2);
  CHECK(big.node_count() == 4096);
  CHECK(big.radius() == doctest::Approx(0.03));
}

TEST_CASE("invalid specs are rejected") {
  KernelParams k{1.0, 1e-3};
  auto prior = PriorSpec::from_kernel(k);
  CHECK_THROWS_AS(GpsgGraph(cube_grid(1, 0.5, 1.0), prior, k), GraphError);
  CHECK_THROWS_AS(GpsgGraph(cube_grid(4, 0.5, 0.0), prior, k), GraphError);
  PriorSpec negative{Vec4(-0.1, 0, 0, 0), Mat4::Identity()};
  CHECK_THROWS_AS(GpsgGraph(cube_grid(4, 0.5, 1.0), negative, k), GraphError);
}

TEST_CASE("factor at the sample itself reproduces the observation") {
  KernelParams k{0.2, 1e-3};
  SurfaceSample s{Vec3(0.01, 0.02, 0.0), Vec3(0, 0, 1), 1e-9};
  auto f = make_factor(s, s.position, k);
  CHECK((f.mean - Vec4(0, 0, 0, 1)).norm() < 1e-9);
  CHECK(f.cov.cwiseAbs().maxCoeff() < 1e-9);
  Eigen::SelfAdjointEigenSolver<Mat4> es(f.cov);
  CHECK(es.eigenvalues().minCoeff() >= 1e-10 * (1 - 1e-6));
}

TEST_CASE("factor sign follows the tangent plane") {
  KernelParams k{10.0, 1e-3};
  std::mt19937_64 rng(9);
  const double r = 0.03;
  for (int i = 0; i < 100; ++i) {
    auto s = random_sample(rng, 0.05, 5e-4);
    Vec3 offset = random_sample(rng, 1.0, 0).normal * r;
    const double side = s.normal.dot(offset);
    if (std::abs(side) < 1e-3 * r) continue;
    auto f = make_factor(s, s.position + offset, k);
    CHECK((f.mean[0] > 0) == (side > 0));
  }
}

TEST_CASE("factor equals the exact single-observation posterior") {
  KernelParams k{0.17, 1e-3};
  std::mt19937_64 rng(13);
  for (int i = 0; i < 20; ++i) {
    auto s = random_sample(rng, 0.05, 5e-4);
    const Vec3 q = s.position + random_sample(rng, 1.0, 0).normal * 0.02;
    auto f = make_factor(s, q, k);
    auto obs = GpObservation::from_sample(s);
    auto full = full_gp_posterior(std::span(&obs, 1), std::span(&q, 1), k)[0];
    CHECK((f.mean - full.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((f.cov - full.cov).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("radius census matches brute force") {
  GridSpec g = cube_grid(16, 0.1, 0.2);
  KernelParams k{0.35, 1e-3};
  GpsgGraph graph(g, PriorSpec::from_kernel(k), k);
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p = random_sample(rng, 0.1, 0).position;
    std::vector<std::size_t> brute;
    for (std::size_t j = 0; j < graph.nodes().size(); ++j)
      if ((graph.node(j).position - p).norm() <= g.radius()) brute.push_back(j);
    CHECK(graph.nodes_within_radius(p) == brute);
  }
  // A sample on a node with r equal to one spacing touches the node and its 6 face neighbours.
  GridSpec unit = cube_grid(5, 2.0, 1.0 / 0.15);
  GpsgGraph small(unit, PriorSpec::from_kernel(k), k);
  SurfaceSample s{Vec3::Zero(), Vec3(0, 0, 1), 1e-3};
  CHECK(small.add_measurements(std::span(&s, 1), FactorSource::Tactile, 1).factors_added == 7);
}

TEST_CASE("fusing a factor twice keeps the mean and shrinks the variance") {
  GridSpec g = cube_grid(4, 0.05, 0.1);
  KernelParams k{0.17, 1e-3};
  PriorSpec weak{Vec4(0.17, 0, 0, 0), 1e6 * prior_block(k)};
  GpsgGraph graph(g, weak, k);
  auto f = make_factor({Vec3(0.01, 0, 0), Vec3(1, 0, 0), 5e-4}, graph.node(5).position, k);
  f.node = 5;
  graph.add_factor(f);
  graph.query();
  const QueryNode once = graph.node(5);
  graph.add_factor(f);
  graph.query();
  const QueryNode& twice = graph.node(5);
  CHECK((twice.mean - once.mean).norm() < 1e-6 * once.mean.norm() + 1e-9);
  for (int c = 0; c < 4; ++c) CHECK(twice.cov(c, c) < once.cov(c, c));
}

TEST_CASE("information fusion equals the dense least-squares minimiser") {
  std::mt19937_64 rng(101);
  for (int inst = 0; inst < 20; ++inst) {
    GridSpec g = cube_grid(4, 0.05, 0.1);
    KernelParams k{0.17, 1e-3};
    GpsgGraph graph(g, PriorSpec::from_kernel(k), k);
    std::uniform_int_distribution<std::size_t> pick(0, graph.nodes().size() - 1);
    std::vector<GaussianFactor> factors;
    for (int f = 0; f < 50; ++f) {
      auto s = random_sample(rng, 0.05, 2e-3);
      const std::size_t j = pick(rng);
      auto fac = make_factor(s, s.position + 0.3 * (graph.node(j).position - s.position), k);
      fac.node = j;
      factors.push_back(fac);
      graph.add_factor(fac);
    }
    graph.query(QuerySelection::All);

    // Whitened residual rows for every factor and every node prior, solved jointly.
    const std::size_t n = graph.nodes().size();
    const std::size_t rows = 4 * (n + factors.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, 4 * n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    std::size_t row = 0;
    auto add_term = [&](std::size_t node, const Vec4& mean, const Mat4& cov) {
      const Mat4 W = Eigen::LLT<Mat4>(cov).matrixL().solve(Mat4::Identity());
      A.block<4, 4>(row, 4 * node) = W;
      b.segment<4>(row) = W * mean;
      row += 4;
    };
    for (std::size_t j = 0; j < n; ++j) add_term(j, graph.prior().mean, graph.prior().cov);
    for (const auto& f : factors) add_term(f.node, f.mean, f.cov);
    const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);

    double worst = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      worst = std::max(worst, (graph.node(j).mean - x.segment<4>(4 * j)).cwiseAbs().maxCoeff());
      scale = std::max(scale, x.segment<4>(4 * j).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-9 * scale);
  }
}

TEST_CASE("arrival order does not change the fused information") {
  GridSpec g = cube_grid(6, 0.06, 0.12);
  KernelParams k{0.2, 1e-3};
  auto samples = sphere_samples(80, 0.04, 5e-4);
  GpsgGraph a(g, PriorSpec::from_kernel(k), k);
  a.add_measurements(samples, FactorSource::Tactile, 1);
  std::shuffle(samples.begin(), samples.end(), std::mt19937_64(4));
  GpsgGraph b(g, PriorSpec::from_kernel(k), k);
  b.add_measurements(samples, FactorSource::Tactile, 1);
  for (std::size_t j = 0; j < a.nodes().size(); ++j) {
    const auto &na = a.node(j), &nb = b.node(j);
    CHECK((na.lambda - nb.lambda).norm() <= 1e-9 * na.lambda.norm());
    CHECK((na.eta - nb.eta).norm() <= 1e-9 * std::max(na.eta.norm(), 1.0));
    CHECK(na.factor_count == nb.factor_count);
  }
}

TEST_CASE("nodes out of reach keep the prior exactly") {
  GridSpec g = cube_grid(10, 0.1, 0.2);
  KernelParams k{0.35, 1e-3};
  GpsgGraph graph(g, PriorSpec::from_kernel(k), k);
  std::vector<SurfaceSample> samples{{Vec3(0.05, 0.05, 0.05), Vec3(0, 0, 1), 5e-4},
                                     {Vec3(0.06, 0.04, 0.05), Vec3(0, 1, 0), 5e-4}};
  graph.add_measurements(samples, FactorSource::Tactile, 1);
  graph.query(QuerySelection::All);
  std::size_t far = 0;
  for (const auto& n : graph.nodes()) {
    const bool near = std::any_of(samples.begin(), samples.end(), [&](const SurfaceSample& s) {
      return (s.position - n.position).norm() <= g.radius();
    });
    CHECK(near == n.touched);
    if (!near) {
      CHECK(n.mean == graph.prior().mean);
      ++far;
    }
  }
  CHECK(far > 900);
}

TEST_CASE("query cache contract and monotone uncertainty") {
  GridSpec g = cube_grid(16, 0.08, 0.1);
  KernelParams k{0.28, 1e-3};
  GpsgGraph graph(g, PriorSpec::from_kernel(k), k);
  auto samples = sphere_samples(300, 0.05, 5e-4);
  std::vector<double> trace(graph.nodes().size());
  for (std::size_t j = 0; j < trace.size(); ++j) trace[j] = graph.node(j).cov.trace();
  for (int t = 0; t < 5; ++t) {
    auto batch = std::span(samples).subspan(60 * t, 60);
    auto upd = graph.add_measurements(batch, FactorSource::Tactile, t + 1);
    CHECK(upd.factors_added > 0);
    auto q = graph.query();
    CHECK(q.solves == upd.nodes_dirtied);
    CHECK(q.trace_increases == 0);
    CHECK(graph.query().solves == 0);
    for (std::size_t j = 0; j < trace.size(); ++j) {
      const double now = graph.node(j).cov.trace();
      CHECK(now <= trace[j] * (1 + 1e-12));
      trace[j] = now;
    }
  }
}

TEST_CASE("samples outside the workspace are dropped") {
  GridSpec g = cube_grid(4, 0.05, 0.1);
  KernelParams k{0.17, 1e-3};
  GpsgGraph graph(g, PriorSpec::from_kernel(k), k);
  std::vector<SurfaceSample> s{{Vec3(0.2, 0, 0), Vec3(1, 0, 0), 1e-3}, {Vec3(0, 0, 0), Vec3(1, 0, 0), 1e-3}};
  auto r = graph.add_measurements(s, FactorSource::Depth, 0);
  CHECK(r.dropped == 1);
  CHECK(graph.measurements().size() == 1);
}

TEST_CASE("checkpoint round trip") {
  GridSpec g = cube_grid(8, 0.08, 0.1);
  KernelParams k{0.28, 1e-3};
  GpsgGraph graph(g, PriorSpec::from_kernel(k), k);
  auto samples = sphere_samples(100, 0.05, 5e-4);
  graph.add_measurements(samples, FactorSource::Tactile, 1);
  graph.query();
  const auto path = std::filesystem::temp_directory_path() / "tacmap_graph.ckpt";
  graph.save_checkpoint(path);
  auto back = GpsgGraph::load_checkpoint(path);
  REQUIRE(back.nodes().size() == graph.nodes().size());
  for (std::size_t j = 0; j < graph.nodes().size(); ++j) {
    CHECK(back.node(j).lambda == graph.node(j).lambda);
    CHECK(back.node(j).mean == graph.node(j).mean);
    CHECK(back.node(j).touched == graph.node(j).touched);
  }
  std::filesystem::remove(path);
  std::ofstream(path) << "nope";
  CHECK_THROWS_AS(GpsgGraph::load_checkpoint(path), GraphError);
  std::filesystem::remove(path);
}

TEST_CASE("single measurement with a weak prior matches the full GP") {
  GridSpec g = cube_grid(16, 0.08, 0.1);
  KernelParams k{0.28, 1e-3};
  PriorSpec weak = PriorSpec::from_kernel(k);
  weak.cov *= 1e6;
  GpsgGraph graph(g, weak, k);
  SurfaceSample s{Vec3(0.011, -0.004, 0.023), Vec3(0.3, 0.1, 0.9).normalized(), 5e-4};
  graph.add_measurements(std::span(&s, 1), FactorSource::Tactile, 1);
  auto obs = GpObservation::from_sample(s);
  auto report = compare_to_full_gp(graph, std::span(&obs, 1));
  CHECK(report.nodes_compared > 0);
  CHECK(report.max_abs_phi < 1e-6);
}

TEST_CASE("zero observations give zero divergence") {
  GridSpec g = cube_grid(4, 0.05, 0.1);
  KernelParams k{0.17, 1e-3};
  GpsgGraph graph(g, PriorSpec::from_kernel(k), k);
  auto report = compare_to_full_gp(graph, {});
  CHECK(report.nodes_compared == 0);
  CHECK(report.max_abs_phi == 0.0);
}

TEST_CASE("sphere zero crossing tracks the full GP") {
  const double radius = 0.05;
  GridSpec g = cube_grid(16, 0.075, 0.1);
  KernelParams k{0.26, 1e-3};
  GpsgGraph graph(g, PriorSpec::from_kernel(k), k);
  auto samples = sphere_samples(200, radius, 5e-4);
  graph.add_measurements(samples, FactorSource::Tactile, 1);
  graph.query();
  std::vector<GpObservation> obs;
  for (auto& s : samples) obs.push_back(GpObservation::from_sample(s));
  FullGp gp(obs, k);

  // Along the coordinate axes, crossings between lattice nodes by linear interpolation.
  const int c = 7;  // the lattice has no centre node at S=16; use the node row nearest the origin
  double graph_r = 0, full_r = 0;
  for (int i = c; i + 1 < g.S; ++i) {
    const auto &a = graph.node(g.index(i, c, c)), &b = graph.node(g.index(i + 1, c, c));
    if (a.mean[0] < 0 && b.mean[0] >= 0) {
      const double t = a.mean[0] / (a.mean[0] - b.mean[0]);
      graph_r = (a.position + t * (b.position - a.position)).norm();
    }
    const double fa = gp.mean(a.position)[0], fb = gp.mean(b.position)[0];
    if (fa < 0 && fb >= 0) {
      const double t = fa / (fa - fb);
      full_r = (a.position + t * (b.position - a.position)).norm();
    }
  }
  REQUIRE(full_r > 0);
  REQUIRE(graph_r > 0);
  CHECK(std::abs(graph_r - full_r) <= 0.05 * full_r);
}
