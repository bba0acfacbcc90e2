#include "fcnet/gp.hpp"

#include "fcnet/error.hpp"

#include <algorithm>
#include <cmath>

namespace fcnet {

GaussianProcess::GaussianProcess(double length_scale, double signal_variance,
                                 double noise_variance)
    : length_scale_(length_scale),
      signal_variance_(signal_variance),
      noise_variance_(noise_variance) {
  if (!(length_scale > 0.0) || !(signal_variance > 0.0) || noise_variance < 0.0) {
    throw UsageError("GP length scale and signal variance must be positive");
  }
}

double GaussianProcess::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  const double d2 = (a - b).squaredNorm();
  return signal_variance_ * std::exp(-0.5 * d2 / (length_scale_ * length_scale_));
}

void GaussianProcess::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0 || x.rows() != y.size()) {
    throw UsageError("GP needs one target per observation");
  }
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double k = kernel(x.row(i).transpose(), x.row(j).transpose());
      gram(i, j) = k;
      gram(j, i) = k;
    }
  }
  gram.diagonal().array() += noise_variance_;

  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd k = gram;
    k.diagonal().array() += jitter;
    chol_.compute(k);
    if (chol_.info() == Eigen::Success &&
        (chol_.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
      x_ = x;
      alpha_ = chol_.solve(y);
      return;
    }
    jitter = jitter == 0.0 ? 1e-10 * signal_variance_ : jitter * 100.0;
  }
  throw NumericError("GP Gram matrix is not positive definite");
}

GaussianProcess::Posterior GaussianProcess::predict(const Eigen::VectorXd& point) const {
  if (x_.rows() == 0) return {0.0, signal_variance_};
  Eigen::VectorXd k_star(x_.rows());
  for (Eigen::Index i = 0; i < x_.rows(); ++i) k_star(i) = kernel(x_.row(i).transpose(), point);
  Posterior post;
  post.mean = k_star.dot(alpha_);
  const Eigen::VectorXd v = chol_.matrixL().solve(k_star);
  post.variance = std::max(0.0, signal_variance_ - v.squaredNorm());
  return post;
}

double expected_improvement(double mean, double sd, double best) {
  const double gain = mean - best;
  if (!(sd > 1e-12)) return std::max(gain, 0.0);
  const double z = gain / sd;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return std::max(0.0, gain * cdf + sd * pdf);
}

double GaussianProcess::expected_improvement(const Eigen::VectorXd& point,
                                             double best) const {
  const auto post = predict(point);
  return fcnet::expected_improvement(post.mean, std::sqrt(post.variance), best);
}

}  // namespace fcnet
