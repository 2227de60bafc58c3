#include "dpaudit/mechanisms.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "dpaudit/logistic.hpp"
#include "dpaudit/rng.hpp"

namespace dpaudit {

namespace {

constexpr std::uint64_t kTagStructure = 0x5752F5;
constexpr std::uint64_t kTagLabels = 0x1EAF;

double width(const std::pair<double, double>& b) { return b.second - b.first; }

// Stable content hash of one row; shared rows of neighboring datasets map to
// the same tree regardless of their index.
std::uint64_t hash_row(const Eigen::MatrixXd& x, Eigen::Index i, int label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001B3ULL;
  };
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::uint64_t bits;
    const double v = x(i, j);
    std::memcpy(&bits, &v, sizeof(bits));
    feed(bits);
  }
  feed(static_cast<std::uint64_t>(label));
  return mix64(h);
}

Eigen::VectorXd gamma_norm_noise(Eigen::Index dim, double norm_shape_scale, Rng& rng) {
  // Direction uniform on the sphere, norm ~ Gamma(dim, norm_shape_scale).
  Eigen::VectorXd dir(dim);
  double nrm = 0.0;
  do {
    for (Eigen::Index i = 0; i < dim; ++i) dir(i) = rng.normal();
    nrm = dir.norm();
  } while (nrm < 1e-12);
  dir /= nrm;
  const double magnitude = rng.gamma(static_cast<double>(dim)) * norm_shape_scale;
  return magnitude * dir;
}

// Rows rescaled into the unit L2 ball; the 2/(n lambda) sensitivity bound
// for the regularized minimizer assumes this geometry.
Eigen::MatrixXd scale_rows(const Dataset& data, double* scale_out) {
  const double scale = std::max(data.l2_radius, 1e-12);
  if (scale_out) *scale_out = scale;
  return data.features / scale;
}

}  // namespace

const char* to_string(MechanismKind k) {
  switch (k) {
    case MechanismKind::LaplaceMean: return "laplace_mean";
    case MechanismKind::GaussianNB: return "gaussian_nb";
    case MechanismKind::LogRegOutput: return "logreg_output";
    case MechanismKind::LogRegObjective: return "logreg_objective";
    case MechanismKind::RandomForest: return "random_forest";
  }
  return "unknown";
}

MechanismKind mechanism_kind_from_string(const std::string& s) {
  if (s == "laplace_mean") return MechanismKind::LaplaceMean;
  if (s == "gaussian_nb") return MechanismKind::GaussianNB;
  if (s == "logreg_output") return MechanismKind::LogRegOutput;
  if (s == "logreg_objective") return MechanismKind::LogRegObjective;
  if (s == "random_forest") return MechanismKind::RandomForest;
  throw std::invalid_argument("unknown mechanism kind: " + s);
}

double laplace_noise(double scale, std::uint64_t seed) {
  if (!(scale > 0.0)) throw std::invalid_argument("laplace_noise: scale must be > 0");
  Rng rng(seed);
  return rng.laplace(scale);
}

std::size_t exponential_choice(const std::vector<double>& utilities, double epsilon, double sensitivity,
                               std::uint64_t seed) {
  if (utilities.empty()) throw std::invalid_argument("exponential_choice: need at least one candidate");
  if (!(epsilon > 0.0) || !(sensitivity > 0.0))
    throw std::invalid_argument("exponential_choice: epsilon and sensitivity must be > 0");
  double max_e = -std::numeric_limits<double>::infinity();
  std::vector<double> exponents(utilities.size());
  for (std::size_t i = 0; i < utilities.size(); ++i) {
    if (!std::isfinite(utilities[i])) throw std::invalid_argument("exponential_choice: utilities must be finite");
    exponents[i] = epsilon * utilities[i] / (2.0 * sensitivity);
    max_e = std::max(max_e, exponents[i]);
  }
  double total = 0.0;
  for (double& e : exponents) {
    e = std::exp(e - max_e);
    total += e;
  }
  Rng rng(seed);
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    acc += exponents[i];
    if (u < acc) return i;
  }
  return exponents.size() - 1;
}

Eigen::VectorXd laplace_mean_release(const Dataset& data, const PrivacySpec& spec, std::uint64_t seed,
                                     double noise_multiplier) {
  const Eigen::Index n = data.n(), d = data.dim();
  Rng rng(seed);
  Eigen::VectorXd out(d);
  // One replacement moves every coordinate of the mean by up to w_j/n, so the
  // joint L1 sensitivity is d-fold; scale accordingly.
  for (Eigen::Index j = 0; j < d; ++j) {
    const double w = width(data.bounds[static_cast<size_t>(j)]);
    const double scale = static_cast<double>(d) * w / (static_cast<double>(n) * spec.epsilon);
    out(j) = data.features.col(j).mean() + rng.laplace(scale * noise_multiplier);
  }
  return out;
}

NBModel nb_ml_estimates(const Dataset& data) {
  const Eigen::Index d = data.dim();
  NBModel m;
  m.mu = Eigen::MatrixXd::Zero(2, d);
  m.sigma2 = Eigen::MatrixXd::Zero(2, d);
  long counts[2] = {data.class_count(0), data.class_count(1)};
  for (int y = 0; y < 2; ++y) {
    if (counts[y] < 2) throw std::invalid_argument("train_dp_nb: each class needs at least 2 points");
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (data.labels[static_cast<size_t>(i)] != y) continue;
      m.mu.row(y) += data.features.row(i);
    }
    m.mu.row(y) /= static_cast<double>(counts[y]);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (data.labels[static_cast<size_t>(i)] != y) continue;
      const Eigen::VectorXd diff = data.features.row(i).transpose() - m.mu.row(y).transpose();
      m.sigma2.row(y) += diff.array().square().matrix().transpose();
    }
    m.sigma2.row(y) /= static_cast<double>(counts[y]);  // ML (biased) estimate
    m.prior(y) = static_cast<double>(counts[y]) / static_cast<double>(data.n());
  }
  return m;
}

NBModel train_dp_nb(const Dataset& data, const PrivacySpec& spec, bool leaky_counts, std::uint64_t seed,
                    double noise_multiplier) {
  const Eigen::Index d = data.dim();
  const double n = static_cast<double>(data.n());
  NBModel m = nb_ml_estimates(data);
  const double ny[2] = {static_cast<double>(data.class_count(0)), static_cast<double>(data.class_count(1))};

  const double eps_group = spec.epsilon / 3.0;
  m.budget = {eps_group, eps_group, eps_group};
  m.sensitivity.mean = Eigen::MatrixXd::Zero(2, d);
  m.sensitivity.variance = Eigen::MatrixXd::Zero(2, d);

  Rng rng(seed);

  // Each group's epsilon/3 is split across the d features. Class-conditional
  // statistics compose in parallel across classes (a row contributes to one
  // class's mean and variance), so the per-coordinate allocation is
  // eps_group/d, with n_y - 1 covering the class that loses a row.
  const double per_feature = static_cast<double>(d);
  for (int y = 0; y < 2; ++y) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double w = width(data.bounds[static_cast<size_t>(j)]);
      const double sens_mu = w / std::max(1.0, ny[y] - 1.0);
      m.sensitivity.mean(y, j) = sens_mu;
      const double scale_mu = per_feature * sens_mu / eps_group;
      m.mu(y, j) += rng.laplace(scale_mu * noise_multiplier);
    }
  }
  for (int y = 0; y < 2; ++y) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double w = width(data.bounds[static_cast<size_t>(j)]);
      const double sens_var = w * w / std::max(1.0, ny[y] - 1.0);  // (n-1)/n^2 bound with removal slack
      m.sensitivity.variance(y, j) = sens_var;
      const double scale_var = per_feature * sens_var / eps_group;
      const double floor = std::max(1e-9 * w * w, 1e-12);
      m.sigma2(y, j) = std::max(m.sigma2(y, j) + rng.laplace(scale_var * noise_multiplier), floor);
    }
  }

  // Class counts: each count carries sensitivity 1 (one row joins or leaves
  // a class), giving the prior its 1/n per-coordinate sensitivity. A label
  // flip moves both counts at once, so replace-with-flip neighbors can leak
  // up to twice this channel's budget — the same neighbor-definition
  // subtlety the forest case study exhibits, and how fielded
  // implementations behave. The forced sum-to-n is post-processing under
  // ReplaceOne; under AddRemove it pins the dataset size, which is the
  // documented leak.
  const double scale_count = 1.0 / eps_group;
  Eigen::Vector2d noisy_counts;
  for (int y = 0; y < 2; ++y) noisy_counts(y) = ny[y] + rng.laplace(scale_count * noise_multiplier);
  const double correction = (n - noisy_counts.sum()) / 2.0;
  noisy_counts.array() += correction;
  m.prior = noisy_counts / n;
  m.has_raw_counts = leaky_counts;
  if (leaky_counts) m.raw_counts = noisy_counts;
  return m;
}

LRModel fit_lr_nonprivate(const Dataset& data, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("fit_lr_nonprivate: c must be > 0");
  LRModel model;
  model.regularization_c = c;
  const Eigen::MatrixXd x = scale_rows(data, &model.feature_scale);
  LogisticOptions opts;
  const LogisticFit fit = fit_logistic(x, data.labels, 1.0 / c, opts);
  if (!fit.converged)
    throw std::runtime_error("logistic fit did not converge within " + std::to_string(opts.max_iterations) +
                             " iterations (c=" + std::to_string(c) + ")");
  model.theta = fit.theta;
  return model;
}

LRModel train_dp_lr_output(const Dataset& data, const PrivacySpec& spec, double c, std::uint64_t seed,
                           double noise_multiplier) {
  LRModel model = fit_lr_nonprivate(data, c);
  // Sensitivity of the regularized minimizer over rows in the unit ball is
  // 2/(n lambda) = 2c; the matching noise norm is Gamma(d, 2c/eps).
  Rng rng(seed);
  const Eigen::Index dim = model.theta.size();
  const double norm_scale = 2.0 * c / spec.epsilon;
  model.theta += gamma_norm_noise(dim, norm_scale * noise_multiplier, rng);
  return model;
}

LRModel train_dp_lr_objective(const Dataset& data, const PrivacySpec& spec, double c, std::uint64_t seed,
                              double noise_multiplier) {
  if (!(c > 0.0)) throw std::invalid_argument("train_dp_lr_objective: c must be > 0");
  LRModel model;
  model.regularization_c = c;
  const Eigen::MatrixXd x = scale_rows(data, &model.feature_scale);
  const Eigen::Index n = x.rows(), dim = x.cols();

  const double eps = spec.epsilon / noise_multiplier;
  const double lambda_avg = 1.0 / (static_cast<double>(n) * c);
  const double loss_curvature = 0.25;  // logistic loss
  double extra_ridge = 0.0;
  double eps_prime =
      eps - 2.0 * std::log1p(loss_curvature / (static_cast<double>(n) * lambda_avg));
  if (eps_prime <= 0.0) {
    extra_ridge = loss_curvature / (static_cast<double>(n) * (std::exp(eps / 4.0) - 1.0)) - lambda_avg;
    eps_prime = eps / 2.0;
  }

  Rng rng(seed);
  Eigen::VectorXd b = gamma_norm_noise(dim, 2.0 / eps_prime, rng);

  const double l2_sum = static_cast<double>(n) * (lambda_avg + std::max(0.0, extra_ridge));
  LogisticOptions opts;
  const LogisticFit fit = fit_logistic(x, data.labels, l2_sum, opts, &b);
  if (!fit.converged)
    throw std::runtime_error("train_dp_lr_objective: optimizer did not converge (epsilon=" +
                             std::to_string(spec.epsilon) + ", c=" + std::to_string(c) + ")");
  model.theta = fit.theta;
  return model;
}

std::vector<RFModel::Split> RFModel::path_splits(int tree, const Eigen::VectorXd& x) const {
  std::vector<Split> out;
  out.reserve(static_cast<size_t>(depth));
  std::vector<std::pair<double, double>> rect = bounds;
  std::uint64_t node = 0;
  for (int level = 0; level < depth; ++level) {
    Rng node_rng(derive_seed(structure_seed, kTagStructure, static_cast<std::uint64_t>(tree), node));
    const int feat = static_cast<int>(node_rng.uniform_index(static_cast<std::uint64_t>(bounds.size())));
    auto& iv = rect[static_cast<size_t>(feat)];
    const double thr = node_rng.uniform(iv.first, iv.second);
    out.push_back({feat, thr});
    if (x(feat) < thr) {
      iv.second = thr;
      node = 2 * node + 1;
    } else {
      iv.first = thr;
      node = 2 * node + 2;
    }
  }
  return out;
}

std::pair<long, long> RFModel::leaf_occupancy(int tree, const Eigen::VectorXd& x) const {
  const std::vector<Split> path = path_splits(tree, x);
  long c0 = 0, c1 = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (tree_of_point[static_cast<size_t>(i)] != tree) continue;
    bool same_leaf = true;
    for (const Split& s : path) {
      if ((points(i, s.feature) < s.threshold) != (x(s.feature) < s.threshold)) {
        same_leaf = false;
        break;
      }
    }
    if (!same_leaf) continue;
    if (point_labels[static_cast<size_t>(i)] == 0) ++c0;
    else ++c1;
  }
  return {c0, c1};
}

int RFModel::predict_tree(int tree, const Eigen::VectorXd& x) const {
  // Leaf index encodes the left/right path; the label draw is keyed on it so
  // any query order yields the same forest.
  std::uint64_t leaf = 0;
  {
    const std::vector<Split> path = path_splits(tree, x);
    for (const Split& s : path) leaf = 2 * leaf + (x(s.feature) < s.threshold ? 1 : 2);
  }
  const auto [c0, c1] = leaf_occupancy(tree, x);
  const std::uint64_t leaf_seed = derive_seed(label_seed, kTagLabels, static_cast<std::uint64_t>(tree), leaf);
  if (c0 == c1) {
    // Tie or empty leaf: both utilities vanish and the draw is uniform.
    Rng rng(leaf_seed);
    return rng.uniform() < 0.5 ? 0 : 1;
  }
  const int majority = c1 > c0 ? 1 : 0;
  const long excess = std::labs(c1 - c0);
  std::vector<double> utilities = {majority == 0 ? 1.0 : 0.0, majority == 1 ? 1.0 : 0.0};
  const double sensitivity = std::exp(-static_cast<double>(excess) * leaf_epsilon);
  // Underflowed sensitivity means the majority probability is 1 to double
  // precision; the draw is deterministic.
  if (sensitivity < 1e-300) return majority;
  return static_cast<int>(exponential_choice(utilities, leaf_epsilon, sensitivity, leaf_seed));
}

RFModel train_dp_rf(const Dataset& data, const PrivacySpec& spec, int num_trees, int depth,
                    NeighborDef sensitivity_convention, std::uint64_t seed, double noise_multiplier) {
  if (num_trees < 1 || depth < 1 || depth > 30) throw std::invalid_argument("train_dp_rf: bad forest shape");
  RFModel m;
  m.points = data.features;
  m.point_labels = data.labels;
  m.bounds = data.bounds;
  m.num_trees = num_trees;
  m.depth = depth;
  // A replacement is a deletion plus an insertion: the replace-one convention
  // runs the leaf rule at half the budget of the native add/remove one.
  const double eps = spec.epsilon / noise_multiplier;
  m.leaf_epsilon = sensitivity_convention == NeighborDef::ReplaceOne ? eps / 2.0 : eps;
  m.structure_seed = derive_seed(seed, 0xF0/*forest*/, 1);
  m.label_seed = derive_seed(seed, 0xF0, 2);
  m.tree_of_point.resize(static_cast<size_t>(data.n()));
  for (Eigen::Index i = 0; i < data.n(); ++i)
    m.tree_of_point[static_cast<size_t>(i)] = static_cast<int>(
        hash_row(data.features, i, data.labels[static_cast<size_t>(i)]) % static_cast<std::uint64_t>(num_trees));
  return m;
}

Eigen::Index summary_dimension(const MechanismParams& params, Eigen::Index d) {
  switch (params.kind) {
    case MechanismKind::LaplaceMean: return d;
    case MechanismKind::GaussianNB: return 4 * d + 2 + (params.nb_leaky_counts ? 2 : 0);
    case MechanismKind::LogRegOutput:
    case MechanismKind::LogRegObjective: return d;
    case MechanismKind::RandomForest: return params.rf_trees;
  }
  throw std::logic_error("summary_dimension: unknown kind");
}

SummaryVector summarize(const NBModel& model) {
  const Eigen::Index d = model.mu.cols();
  SummaryVector tau(4 * d + 2 + (model.has_raw_counts ? 2 : 0));
  Eigen::Index at = 0;
  for (int y = 0; y < 2; ++y)
    for (Eigen::Index j = 0; j < d; ++j) tau(at++) = model.mu(y, j);
  for (int y = 0; y < 2; ++y)
    for (Eigen::Index j = 0; j < d; ++j) tau(at++) = model.sigma2(y, j);
  tau(at++) = model.prior(0);
  tau(at++) = model.prior(1);
  if (model.has_raw_counts) {
    tau(at++) = model.raw_counts(0);
    tau(at++) = model.raw_counts(1);
  }
  return tau;
}

SummaryVector summarize(const LRModel& model) { return model.theta; }

SummaryVector summarize(const RFModel& model, const Eigen::VectorXd& probe) {
  SummaryVector tau(model.num_trees);
  for (int t = 0; t < model.num_trees; ++t) tau(t) = static_cast<double>(model.predict_tree(t, probe));
  return tau;
}

SummaryVector mechanism_sample(const Dataset& data, const MechanismParams& params,
                               const std::optional<Eigen::VectorXd>& probe, std::uint64_t seed) {
  switch (params.kind) {
    case MechanismKind::LaplaceMean:
      return laplace_mean_release(data, params.spec, seed, params.noise_multiplier);
    case MechanismKind::GaussianNB:
      return summarize(train_dp_nb(data, params.spec, params.nb_leaky_counts, seed, params.noise_multiplier));
    case MechanismKind::LogRegOutput:
      return summarize(
          train_dp_lr_output(data, params.spec, params.lr_c_effective(), seed, params.noise_multiplier));
    case MechanismKind::LogRegObjective:
      return summarize(
          train_dp_lr_objective(data, params.spec, params.lr_c_effective(), seed, params.noise_multiplier));
    case MechanismKind::RandomForest: {
      if (!probe) throw std::invalid_argument("mechanism_sample: random forest summary needs a probe point");
      const RFModel model = train_dp_rf(data, params.spec, params.rf_trees, params.rf_depth,
                                        params.rf_sensitivity_convention, seed, params.noise_multiplier);
      return summarize(model, *probe);
    }
  }
  throw std::logic_error("mechanism_sample: unknown kind");
}

}  // namespace dpaudit
