#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "tacmap/geometry.hpp"

namespace tacmap {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

class GpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thin-plate covariance k(d) = 2d³ - 3Rd² + R³ on [φ, ∂x φ, ∂y φ, ∂z φ].
struct KernelParams {
  double support = 1.0;           // R, metres; at least the largest expected pairwise distance
  double sigma_n_default = 5e-4;  // metres

  void validate() const;
};

/// Covariance block between [φ, ∇φ](xi) (rows) and [φ, ∇φ](xj) (columns).
/// At zero separation this is diag(R³, 6R, 6R, 6R).
Mat4 kernel_block(const Vec3& xi, const Vec3& xj, const KernelParams& params);

/// Prior covariance of one location, diag(R³, 6R, 6R, 6R).
Mat4 prior_block(const KernelParams& params);

/// A surface observation: φ = 0 with the outward normal as gradient.
struct GpObservation {
  Vec3 position;
  Vec4 target;
  double sigma_n = 0.0;

  static GpObservation from_sample(const SurfaceSample& s);
};

struct GpPosterior {
  Vec4 mean;
  Mat4 cov;
};

/// Conditional of a query location given a single observation, with the
/// full 4x4 Schur complement: μ = k*i (kii + σ²I)⁻¹ y, Σ = k** - k*i (kii + σ²I)⁻¹ ki*.
GpPosterior condition_on_one(const GpObservation& obs, const Vec3& query, const KernelParams& params);

/// Exact GP regression over all observations (O(N³) factorisation). Used as
/// the reference the spatial graph is checked against.
class FullGp {
 public:
  FullGp(std::span<const GpObservation> observations, const KernelParams& params);

  std::size_t size() const { return positions_.size(); }
  Vec4 mean(const Vec3& query) const;
  GpPosterior posterior(const Vec3& query) const;

 private:
  Eigen::MatrixXd cross_covariance(const Vec3& query) const;  // 4N x 4

  KernelParams params_;
  std::vector<Vec3> positions_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;  // (K + Σn)⁻¹ Y
};

/// Posterior mean and covariance at each query. Throws GpError when the
/// observation count exceeds `cap` or the Gram matrix is not positive definite.
std::vector<GpPosterior> full_gp_posterior(std::span<const GpObservation> observations,
                                           std::span<const Vec3> queries, const KernelParams& params,
                                           std::size_t cap = 2000);

}  // namespace tacmap
