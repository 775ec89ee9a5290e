#include "tacmap/kernel.hpp"

#include <string>

namespace tacmap {

void KernelParams::validate() const {
  if (!(support > 0.0)) throw GpError("kernel support R must be positive");
  if (!(sigma_n_default > 0.0)) throw GpError("default sigma_n must be positive");
}

Mat4 kernel_block(const Vec3& xi, const Vec3& xj, const KernelParams& params) {
  const double R = params.support;
  const Vec3 r = xi - xj;
  const double d = r.norm();
  Mat4 k;
  k(0, 0) = 2.0 * d * d * d - 3.0 * R * d * d + R * R * R;
  // dk/dd / d, the common factor of the first derivatives.
  const double g = 6.0 * d - 6.0 * R;
  for (int a = 0; a < 3; ++a) {
    k(0, 1 + a) = -g * r[a];  // ∂k/∂xj
    k(1 + a, 0) = g * r[a];   // ∂k/∂xi
  }
  // ∂²k/∂xi_a ∂xj_b = -6 r_a r_b / d - (6d - 6R) δ_ab; the first term vanishes as d -> 0.
  const double inv_d = d > 0.0 ? 1.0 / d : 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) k(1 + a, 1 + b) = -6.0 * r[a] * r[b] * inv_d - (a == b ? g : 0.0);
  return k;
}

Mat4 prior_block(const KernelParams& params) {
  const double R = params.support;
  return Vec4(R * R * R, 6.0 * R, 6.0 * R, 6.0 * R).asDiagonal();
}

GpObservation GpObservation::from_sample(const SurfaceSample& s) {
  GpObservation obs;
  obs.position = s.position;
  obs.target << 0.0, s.normal;
  obs.sigma_n = s.noise_sigma;
  return obs;
}

GpPosterior condition_on_one(const GpObservation& obs, const Vec3& query, const KernelParams& params) {
  Mat4 k_ii = kernel_block(obs.position, obs.position, params);
  k_ii.diagonal().array() += obs.sigma_n * obs.sigma_n;
  const Mat4 k_qi = kernel_block(query, obs.position, params);
  const Eigen::LLT<Mat4> llt(k_ii);
  if (llt.info() != Eigen::Success) throw GpError("observation covariance is not positive definite");
  GpPosterior post;
  post.mean = k_qi * llt.solve(obs.target);
  post.cov = kernel_block(query, query, params) - k_qi * llt.solve(k_qi.transpose());
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

FullGp::FullGp(std::span<const GpObservation> observations, const KernelParams& params) : params_(params) {
  params_.validate();
  const auto n = observations.size();
  positions_.reserve(n);
  for (const auto& o : observations) positions_.push_back(o.position);
  if (n == 0) return;

  Eigen::MatrixXd K(4 * n, 4 * n);
  Eigen::VectorXd Y(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    Y.segment<4>(4 * i) = observations[i].target;
    for (std::size_t j = i; j < n; ++j) {
      const Mat4 block = kernel_block(observations[i].position, observations[j].position, params_);
      K.block<4, 4>(4 * i, 4 * j) = block;
      K.block<4, 4>(4 * j, 4 * i) = block.transpose();
    }
    const double s2 = observations[i].sigma_n * observations[i].sigma_n;
    K.block<4, 4>(4 * i, 4 * i).diagonal().array() += s2;
  }
  llt_.compute(K);
  if (llt_.info() != Eigen::Success || !(llt_.rcond() > 1e-15))
    throw GpError("Gram matrix is not positive definite (duplicate observations without noise?)");
  alpha_ = llt_.solve(Y);
}

Eigen::MatrixXd FullGp::cross_covariance(const Vec3& query) const {
  Eigen::MatrixXd ks(4 * positions_.size(), 4);
  for (std::size_t i = 0; i < positions_.size(); ++i)
    ks.block<4, 4>(4 * i, 0) = kernel_block(positions_[i], query, params_);
  return ks;
}

Vec4 FullGp::mean(const Vec3& query) const {
  if (positions_.empty()) return Vec4::Zero();
  Vec4 m = Vec4::Zero();
  for (std::size_t i = 0; i < positions_.size(); ++i)
    m += kernel_block(positions_[i], query, params_).transpose() * alpha_.segment<4>(4 * i);
  return m;
}

GpPosterior FullGp::posterior(const Vec3& query) const {
  GpPosterior post;
  const Mat4 prior = kernel_block(query, query, params_);
  if (positions_.empty()) {
    post.mean = Vec4::Zero();
    post.cov = prior;
    return post;
  }
  const Eigen::MatrixXd ks = cross_covariance(query);
  post.mean = ks.transpose() * alpha_;
  const Eigen::MatrixXd v = llt_.matrixL().solve(ks);
  post.cov = prior - v.transpose() * v;
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

std::vector<GpPosterior> full_gp_posterior(std::span<const GpObservation> observations,
                                           std::span<const Vec3> queries, const KernelParams& params,
                                           std::size_t cap) {
  if (observations.size() > cap)
    throw GpError("full GP limited to " + std::to_string(cap) + " observations, got " +
                  std::to_string(observations.size()));
  const FullGp gp(observations, params);
  std::vector<GpPosterior> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(gp.posterior(q));
  return out;
}

}  // namespace tacmap
