#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace fcnet {

/// Zero-mean GP regression with a squared-exponential kernel
///   k(x, x') = signal_variance * exp(-|x - x'|^2 / (2 * length_scale^2))
/// and fixed hyperparameters.
class GaussianProcess {
 public:
  struct Posterior {
    double mean = 0.0;
    double variance = 0.0;
  };

  explicit GaussianProcess(double length_scale = 0.2, double signal_variance = 1.0,
                           double noise_variance = 1e-6);

  /// Rows of `x` are observation points. Retries with growing diagonal
  /// jitter when the Gram matrix is not numerically positive definite and
  /// throws NumericError if that still fails.
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

  Posterior predict(const Eigen::VectorXd& point) const;

  /// Expected improvement over `best` for a maximization problem.
  double expected_improvement(const Eigen::VectorXd& point, double best) const;

  double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  Eigen::Index size() const { return x_.rows(); }

 private:
  double length_scale_;
  double signal_variance_;
  double noise_variance_;
  Eigen::MatrixXd x_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
};

/// EI for maximization given a Gaussian predictive (mean, sd).
double expected_improvement(double mean, double sd, double best);

}  // namespace fcnet
