#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpaudit {

enum class NeighborDef { ReplaceOne, AddRemove };
enum class IntervalMethod { KatzLog, ClopperPearsonRatio };
enum class Phase { Search, Verify };

inline const char* to_string(NeighborDef d) {
  return d == NeighborDef::ReplaceOne ? "replace_one" : "add_remove";
}
inline const char* to_string(IntervalMethod m) {
  return m == IntervalMethod::KatzLog ? "katz_log" : "clopper_pearson_ratio";
}

/// Privacy budget (epsilon, delta). delta = 0 is the default; the estimation
/// path only supports delta = 0, delta is carried for mechanism calibration.
struct PrivacySpec {
  double epsilon = 1.0;
  double delta = 0.0;

  PrivacySpec() = default;
  PrivacySpec(double eps, double del = 0.0) : epsilon(eps), delta(del) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("PrivacySpec: epsilon must be > 0");
    if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("PrivacySpec: delta must be in [0, 1)");
  }
};

/// A binary-labeled training set plus the constraint geometry attacks and
/// mechanisms calibrate against. `bounds` is the per-feature hyper-rectangle;
/// `l2_radius` the radius of the smallest origin-centered L2 ball containing
/// all rows. Poisoned datasets keep the original constraint set, so bounds
/// are stored explicitly rather than recomputed.
struct Dataset {
  Eigen::MatrixXd features;                       // n x d
  std::vector<int> labels;                        // entries in {0,1}
  std::vector<std::pair<double, double>> bounds;  // per-feature (min, max)
  double l2_radius = 0.0;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  long class_count(int y) const {
    long c = 0;
    for (int l : labels) c += (l == y) ? 1 : 0;
    return c;
  }

  /// Builds a dataset whose constraint set is the tightest one containing the
  /// rows (bounds = per-feature min/max, radius = max row norm).
  static Dataset from_data(Eigen::MatrixXd x, std::vector<int> y) {
    Dataset d;
    d.features = std::move(x);
    d.labels = std::move(y);
    d.bounds.resize(static_cast<size_t>(d.features.cols()));
    for (Eigen::Index j = 0; j < d.features.cols(); ++j)
      d.bounds[static_cast<size_t>(j)] = {d.features.col(j).minCoeff(), d.features.col(j).maxCoeff()};
    d.l2_radius = 0.0;
    for (Eigen::Index i = 0; i < d.features.rows(); ++i)
      d.l2_radius = std::max(d.l2_radius, d.features.row(i).norm());
    d.validate();
    return d;
  }

  void validate() const {
    if (n() < 2) throw std::invalid_argument("Dataset: need at least 2 rows");
    if (labels.size() != static_cast<size_t>(n()))
      throw std::invalid_argument("Dataset: label count does not match row count");
    if (bounds.size() != static_cast<size_t>(dim()))
      throw std::invalid_argument("Dataset: bounds count does not match feature count");
    bool has0 = false, has1 = false;
    for (int l : labels) {
      if (l == 0) has0 = true;
      else if (l == 1) has1 = true;
      else throw std::invalid_argument("Dataset: labels must be 0 or 1");
    }
    if (!has0 || !has1) throw std::invalid_argument("Dataset: both classes must be present");
    constexpr double tol = 1e-9;
    for (Eigen::Index i = 0; i < n(); ++i) {
      for (Eigen::Index j = 0; j < dim(); ++j) {
        double v = features(i, j);
        const auto& b = bounds[static_cast<size_t>(j)];
        if (v < b.first - tol || v > b.second + tol)
          throw std::invalid_argument("Dataset: row " + std::to_string(i) + " outside bounds on feature " +
                                      std::to_string(j));
      }
      if (features.row(i).norm() > l2_radius + tol)
        throw std::invalid_argument("Dataset: row " + std::to_string(i) + " outside l2_radius");
    }
  }
};

/// Original/poisoned pair. `k` is the group-privacy distance under
/// `neighbor_def`: the number of row replacements (ReplaceOne) or of
/// additions plus deletions (AddRemove) separating the two datasets.
struct NeighborPair {
  Dataset original;
  Dataset poisoned;
  int k = 1;
  NeighborDef neighbor_def = NeighborDef::ReplaceOne;

  void validate() const;
};

using SummaryVector = Eigen::VectorXd;

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;  // two-sided coverage 1 - alpha
  IntervalMethod method = IntervalMethod::KatzLog;
};

/// Maps an audited epsilon to the number of rows to poison. Ranges are
/// (previous_max, eps_max] with an open lower end; epsilon above the last
/// range is uncovered and rejected.
struct KPolicy {
  struct Range {
    double eps_max;
    int k;
  };
  std::vector<Range> ranges;  // sorted by eps_max ascending

  /// k=8 for eps <= 2, k=2 for 2 < eps <= 8, k=1 for 8 < eps <= 50.
  static KPolicy paper_default() { return KPolicy{{{2.0, 8}, {8.0, 2}, {50.0, 1}}}; }

  static KPolicy constant(int k, double eps_max = 1e9) { return KPolicy{{{eps_max, k}}}; }

  bool covers(double eps) const {
    return !ranges.empty() && eps > 0.0 && eps <= ranges.back().eps_max;
  }

  int select(double eps) const {
    for (const auto& r : ranges)
      if (eps <= r.eps_max) return r.k;
    throw std::invalid_argument("KPolicy: epsilon " + std::to_string(eps) + " not covered by policy");
  }
};

struct AuditConfig {
  PrivacySpec spec;
  long samples_n = 10000;
  double alpha = 0.05;
  double min_prob_r = 0.01;  // default max(0.01, 10/N), see default_min_prob_r
  KPolicy k_policy = KPolicy::paper_default();
  std::uint64_t master_seed = 0;
  NeighborDef neighbor_def = NeighborDef::ReplaceOne;

  static double default_min_prob_r(long n) { return std::max(0.01, 10.0 / static_cast<double>(n)); }

  void validate() const {
    if (samples_n < 2) throw std::invalid_argument("AuditConfig: samples_n must be >= 2");
    if (!(alpha > 0.0 && alpha <= 0.5)) throw std::invalid_argument("AuditConfig: alpha must be in (0, 0.5]");
    if (!(min_prob_r > 0.0 && min_prob_r < 1.0))
      throw std::invalid_argument("AuditConfig: min_prob_r must be in (0, 1)");
    if (min_prob_r < 1.0 / static_cast<double>(samples_n))
      throw std::invalid_argument("AuditConfig: min_prob_r must be >= 1/samples_n");
    if (!k_policy.covers(spec.epsilon))
      throw std::invalid_argument("AuditConfig: k_policy does not cover epsilon");
  }
};

/// What the attack did: which rows were replaced/removed, the poison point,
/// and the probe location used by probe-based summaries (random forest).
struct AttackWitness {
  std::vector<long> victim_rows;
  Eigen::VectorXd x_star;
  int y_star = 0;
  int k = 1;
  Eigen::VectorXd probe;  // empty when the summary needs no probe
  std::string note;
};

struct AuditResult {
  double eps_lb = -std::numeric_limits<double>::infinity();  // already divided by k
  double threshold_t = 0.0;
  bool used_complement = false;
  long n1 = 0;
  long n0 = 0;
  long samples_n = 0;
  int k = 1;
  ConfidenceInterval interval;  // per-row interval (endpoints divided by k)
  AttackWitness witness;
};

inline void NeighborPair::validate() const {
  original.validate();
  poisoned.validate();
  if (k < 1) throw std::invalid_argument("NeighborPair: k must be >= 1");
  if (neighbor_def == NeighborDef::ReplaceOne) {
    if (original.n() != poisoned.n())
      throw std::invalid_argument("NeighborPair: ReplaceOne requires equal sizes");
    long diff = 0;
    for (Eigen::Index i = 0; i < original.n(); ++i) {
      bool same = original.labels[static_cast<size_t>(i)] == poisoned.labels[static_cast<size_t>(i)] &&
                  original.features.row(i) == poisoned.features.row(i);
      diff += same ? 0 : 1;
    }
    if (diff != k)
      throw std::invalid_argument("NeighborPair: datasets differ in " + std::to_string(diff) +
                                  " rows, expected k=" + std::to_string(k));
  } else {
    if (std::abs(original.n() - poisoned.n()) > k)
      throw std::invalid_argument("NeighborPair: AddRemove sizes differ by more than k");
  }
}

}  // namespace dpaudit
