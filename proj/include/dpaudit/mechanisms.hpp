#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dpaudit/types.hpp"

namespace dpaudit {

enum class MechanismKind { LaplaceMean, GaussianNB, LogRegOutput, LogRegObjective, RandomForest };

const char* to_string(MechanismKind k);
MechanismKind mechanism_kind_from_string(const std::string& s);

/// Hyperparameters for the audited mechanism. `noise_multiplier` scales the
/// injected noise (0.5 halves it, doubling the effective epsilon); it exists
/// for broken-implementation fixtures and is 1.0 in production use.
struct MechanismParams {
  MechanismKind kind = MechanismKind::GaussianNB;
  PrivacySpec spec;
  double noise_multiplier = 1.0;
  bool nb_leaky_counts = false;
  double lr_c = 0.0;  // 0 selects the per-kind default (output 0.01, objective 1.0)
  int rf_trees = 15;
  int rf_depth = 10;
  NeighborDef rf_sensitivity_convention = NeighborDef::AddRemove;  // the published calibration

  double lr_c_effective() const {
    if (lr_c > 0.0) return lr_c;
    return kind == MechanismKind::LogRegObjective ? 1.0 : 0.01;
  }
};

struct NBModel {
  Eigen::MatrixXd mu;      // 2 x d, row y = class-conditional means
  Eigen::MatrixXd sigma2;  // 2 x d, clamped positive
  Eigen::Vector2d prior;   // sums to 1
  bool has_raw_counts = false;
  Eigen::Vector2d raw_counts;  // perturbed counts, forced to sum to n; leaky mode only

  struct BudgetLedger {
    double eps_means = 0.0;
    double eps_variances = 0.0;
    double eps_prior = 0.0;
    double total() const { return eps_means + eps_variances + eps_prior; }
  };
  BudgetLedger budget;

  /// Per-release sensitivities the Laplace scales were calibrated to.
  struct SensitivityLedger {
    Eigen::MatrixXd mean;      // 2 x d
    Eigen::MatrixXd variance;  // 2 x d
    double count = 1.0;        // per class count; the prior moves by 1/n
  };
  SensitivityLedger sensitivity;
};

struct LRModel {
  // Coefficients in the mechanism's working space: rows rescaled by
  // l2_radius into the unit L2 ball, no intercept.
  Eigen::VectorXd theta;
  double regularization_c = 1.0;
  double feature_scale = 1.0;  // divisor applied to rows before fitting
};

/// Random forest with data-independent structure. Splits are a pure function
/// of (structure_seed, tree, node): structure is identical for any two
/// datasets sharing bounds and seed. Rows are partitioned among trees by a
/// content hash, so one changed row touches one tree. Leaf labels are drawn
/// from the exponential mechanism keyed per leaf, lazily for empty leaves.
struct RFModel {
  Eigen::MatrixXd points;  // rows retained for leaf occupancy
  std::vector<int> point_labels;
  std::vector<int> tree_of_point;
  std::vector<std::pair<double, double>> bounds;
  int num_trees = 15;
  int depth = 10;
  double leaf_epsilon = 1.0;  // epsilon in the leaf rule after convention scaling
  std::uint64_t structure_seed = 0;
  std::uint64_t label_seed = 0;

  struct Split {
    int feature;
    double threshold;
  };

  /// Splits along x's root-to-leaf path in the given tree.
  std::vector<Split> path_splits(int tree, const Eigen::VectorXd& x) const;

  /// Leaf vote of one tree at x (0 or 1).
  int predict_tree(int tree, const Eigen::VectorXd& x) const;

  /// (count of label 0, count of label 1) inside x's leaf of the given tree.
  std::pair<long, long> leaf_occupancy(int tree, const Eigen::VectorXd& x) const;
};

/// One Laplace(0, scale) draw, deterministic given the seed.
double laplace_noise(double scale, std::uint64_t seed);

/// Samples index i with probability proportional to
/// exp(epsilon * utilities[i] / (2 * sensitivity)).
std::size_t exponential_choice(const std::vector<double>& utilities, double epsilon, double sensitivity,
                               std::uint64_t seed);

/// Per-feature mean released with Laplace noise calibrated to the joint L1
/// sensitivity under single-row replacement. The fast fixture mechanism.
Eigen::VectorXd laplace_mean_release(const Dataset& data, const PrivacySpec& spec, std::uint64_t seed,
                                     double noise_multiplier = 1.0);

/// Gaussian naive Bayes with Laplace-perturbed ML estimates; budget split
/// epsilon/3 across the mean, variance and prior groups, each group
/// calibrated jointly over the coordinates one replacement can touch.
/// Leaky mode exposes the perturbed class counts whose sum is forced to n.
NBModel train_dp_nb(const Dataset& data, const PrivacySpec& spec, bool leaky_counts, std::uint64_t seed,
                    double noise_multiplier = 1.0);

/// Non-private ML estimates (test oracle and convergence reference).
NBModel nb_ml_estimates(const Dataset& data);

/// Non-private regularized logistic fit in the mechanism's working space.
LRModel fit_lr_nonprivate(const Dataset& data, double c);

LRModel train_dp_lr_output(const Dataset& data, const PrivacySpec& spec, double c, std::uint64_t seed,
                           double noise_multiplier = 1.0);
LRModel train_dp_lr_objective(const Dataset& data, const PrivacySpec& spec, double c, std::uint64_t seed,
                              double noise_multiplier = 1.0);

RFModel train_dp_rf(const Dataset& data, const PrivacySpec& spec, int num_trees, int depth,
                    NeighborDef sensitivity_convention, std::uint64_t seed, double noise_multiplier = 1.0);

/// Dimension of the summary vector for the given parameters and feature count.
Eigen::Index summary_dimension(const MechanismParams& params, Eigen::Index feature_dim);

SummaryVector summarize(const NBModel& model);
SummaryVector summarize(const LRModel& model);
SummaryVector summarize(const RFModel& model, const Eigen::VectorXd& probe);

/// Trains the configured mechanism on `data` and returns its summary.
/// `probe` is required for RandomForest. Pure function of its arguments.
SummaryVector mechanism_sample(const Dataset& data, const MechanismParams& params,
                               const std::optional<Eigen::VectorXd>& probe, std::uint64_t seed);

}  // namespace dpaudit
