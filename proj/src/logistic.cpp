#include "dpaudit/logistic.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dpaudit {

namespace {

double objective(const Eigen::MatrixXd& x, const std::vector<int>& y, double l2_sum,
                 const Eigen::VectorXd* linear_term, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd margins = x * theta;
  double obj = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double s = y[static_cast<size_t>(i)] == 1 ? 1.0 : -1.0;
    const double m = s * margins(i);
    // log(1 + exp(-m)) without overflow
    obj += (m > 0.0) ? std::log1p(std::exp(-m)) : (-m + std::log1p(std::exp(m)));
  }
  obj += 0.5 * l2_sum * theta.squaredNorm();
  if (linear_term) obj += linear_term->dot(theta);
  return obj;
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& x, const std::vector<int>& y, double l2_sum,
                         const LogisticOptions& opts, const Eigen::VectorXd* linear_term) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (y.size() != static_cast<size_t>(n)) throw std::invalid_argument("fit_logistic: label size mismatch");
  if (!(l2_sum >= 0.0)) throw std::invalid_argument("fit_logistic: l2_sum must be >= 0");

  LogisticFit fit;
  fit.theta = Eigen::VectorXd::Zero(d);
  double obj = objective(x, y, l2_sum, linear_term, fit.theta);

  Eigen::VectorXd grad(d), probs(n);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const Eigen::VectorXd margins = x * fit.theta;
    for (Eigen::Index i = 0; i < n; ++i) probs(i) = sigmoid(margins(i));
    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      grad += (probs(i) - static_cast<double>(y[static_cast<size_t>(i)])) * x.row(i).transpose();
    grad += l2_sum * fit.theta;
    if (linear_term) grad += *linear_term;

    fit.iterations = iter;
    if (grad.lpNorm<Eigen::Infinity>() < opts.gradient_tol) {
      fit.converged = true;
      break;
    }

    Eigen::MatrixXd hess = l2_sum * Eigen::MatrixXd::Identity(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = std::max(probs(i) * (1.0 - probs(i)), 1e-12);
      hess.noalias() += w * (x.row(i).transpose() * x.row(i));
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("fit_logistic: Hessian factorization failed");
    const Eigen::VectorXd step = ldlt.solve(grad);

    // Backtracking keeps the iteration monotone when far from the optimum.
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::VectorXd cand = fit.theta - t * step;
      const double cand_obj = objective(x, y, l2_sum, linear_term, cand);
      if (cand_obj <= obj + 1e-12 * std::fabs(obj)) {
        fit.theta = cand;
        obj = cand_obj;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      fit.converged = grad.lpNorm<Eigen::Infinity>() < 1e-5;
      break;
    }
  }
  if (!fit.converged) {
    // Final gradient check: Newton may land exactly on tolerance at the cap.
    const Eigen::VectorXd margins = x * fit.theta;
    Eigen::VectorXd g = l2_sum * fit.theta;
    for (Eigen::Index i = 0; i < n; ++i)
      g += (sigmoid(margins(i)) - static_cast<double>(y[static_cast<size_t>(i)])) * x.row(i).transpose();
    if (linear_term) g += *linear_term;
    fit.converged = g.lpNorm<Eigen::Infinity>() < opts.gradient_tol;
  }
  fit.objective = obj;
  return fit;
}

}  // namespace dpaudit
