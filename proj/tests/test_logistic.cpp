#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "dpaudit/logistic.hpp"

using namespace dpaudit;

namespace {

// Two separable clusters on the first axis.
void separable_toy(Eigen::MatrixXd* x, std::vector<int>* y) {
  *x = Eigen::MatrixXd(6, 2);
  (*x) << -2.0, 0.3, -1.5, -0.2, -1.8, 0.1, 2.0, -0.3, 1.6, 0.2, 1.9, 0.0;
  *y = {0, 0, 0, 1, 1, 1};
}

}  // namespace

TEST_CASE("logistic fit on separable data") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  separable_toy(&x, &y);
  const LogisticFit fit = fit_logistic(x, y, 1e-3);
  CHECK(fit.converged);
  CHECK(fit.theta(0) > 0.0);  // positive class sits at positive x1
  CHECK(fit.theta.allFinite());
  for (int i = 0; i < 6; ++i) {
    const double p = sigmoid(x.row(i).dot(fit.theta));
    CHECK((p > 0.5) == (y[static_cast<size_t>(i)] == 1));
  }
}

TEST_CASE("ridge keeps separable weights bounded") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  separable_toy(&x, &y);
  const LogisticFit weak = fit_logistic(x, y, 1e-3);
  const LogisticFit strong = fit_logistic(x, y, 10.0);
  CHECK(strong.theta.norm() < weak.theta.norm());
  CHECK(strong.theta.norm() < 1.0);
}

TEST_CASE("fit is deterministic and has near-zero gradient at the optimum") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  separable_toy(&x, &y);
  const LogisticFit a = fit_logistic(x, y, 0.5);
  const LogisticFit b = fit_logistic(x, y, 0.5);
  CHECK(a.theta == b.theta);

  Eigen::VectorXd grad = 0.5 * a.theta;
  for (int i = 0; i < 6; ++i)
    grad += (sigmoid(x.row(i).dot(a.theta)) - y[static_cast<size_t>(i)]) * x.row(i).transpose();
  CHECK(grad.lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("linear perturbation term shifts the optimum per its stationarity condition") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  separable_toy(&x, &y);
  Eigen::VectorXd b(2);
  b << 0.7, -0.3;
  const LogisticFit fit = fit_logistic(x, y, 1.0, {}, &b);
  CHECK(fit.converged);
  Eigen::VectorXd grad = 1.0 * fit.theta + b;
  for (int i = 0; i < 6; ++i)
    grad += (sigmoid(x.row(i).dot(fit.theta)) - y[static_cast<size_t>(i)]) * x.row(i).transpose();
  CHECK(grad.lpNorm<Eigen::Infinity>() < 1e-7);

  const LogisticFit plain = fit_logistic(x, y, 1.0);
  CHECK((fit.theta - plain.theta).norm() > 1e-3);
}

TEST_CASE("label size mismatch is rejected") {
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  std::vector<int> y = {0};
  CHECK_THROWS(fit_logistic(x, y, 1.0));
}
