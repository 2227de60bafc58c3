#pragma once

#include <Eigen/Dense>

namespace dpaudit {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct LogisticFit {
  Eigen::VectorXd theta;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
};

struct LogisticOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-8;
};

/// Minimizes sum_i log(1 + exp(-s_i theta^T x_i)) + (l2_sum/2) ||theta||^2
///            + linear_term^T theta
/// with s_i = 2 y_i - 1. The penalty is in "sum" form (unnormalized loss);
/// an averaged formulation with ridge lambda corresponds to
/// l2_sum = n * lambda. Damped Newton; deterministic for fixed inputs.
LogisticFit fit_logistic(const Eigen::MatrixXd& x, const std::vector<int>& y, double l2_sum,
                         const LogisticOptions& opts = {}, const Eigen::VectorXd* linear_term = nullptr);

}  // namespace dpaudit
