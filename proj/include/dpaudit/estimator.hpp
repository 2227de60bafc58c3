#pragma once

#include <cstdint>
#include <optional>

#include "dpaudit/attacks.hpp"
#include "dpaudit/mechanisms.hpp"
#include "dpaudit/types.hpp"

namespace dpaudit {

/// N summaries per arm, equal counts by construction. The two phases draw
/// from disjoint seed streams (distinct phase tag in the derivation).
struct SampleBatch {
  Eigen::MatrixXd from_d;       // N x m
  Eigen::MatrixXd from_dprime;  // N x m
  Phase phase = Phase::Search;
};

struct PosteriorOptions {
  int hidden_units = 0;  // 0: logistic-loss linear model (default)
  int iterations = 300;
  double ridge = 1e-4;  // on the averaged loss
};

/// Classifier for p(D | z): standardized features followed by either a
/// linear logistic model or a one-hidden-layer network. Scores are
/// deterministic functions of the training batch (and seed, for the
/// hidden-layer initialization).
struct PosteriorModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  Eigen::VectorXd weights;  // linear path: coefficient per feature + intercept last
  int hidden_units = 0;
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0.0;
  bool degenerate = false;  // all training vectors identical: constant 1/2

  double score(const Eigen::VectorXd& z) const;
  Eigen::VectorXd scores(const Eigen::MatrixXd& z) const;
};

struct ThresholdSearchResult {
  double threshold_t = 0.0;
  double eps_lb_search = -std::numeric_limits<double>::infinity();
  long n1 = 0;
  long n0 = 0;
  bool used_complement = false;
  double c_hat = 0.0;  // denominator mass at the chosen threshold
  bool feasible = false;
};

/// 2N retrainings with per-sample derived seeds, fanned out over `workers`
/// threads; the result is identical for any worker count.
SampleBatch generate_samples(const NeighborPair& pair, const MechanismParams& params,
                             const std::optional<Eigen::VectorXd>& probe, long n, Phase phase,
                             std::uint64_t master_seed, int workers = 0);

PosteriorModel fit_posterior(const SampleBatch& batch, const PosteriorOptions& opts, std::uint64_t seed);

/// Scans every observed score as a threshold candidate, skipping candidates
/// whose denominator mass falls under min_prob_r, in both arm orders (the
/// complement test); returns the best lower bound at level alpha/2.
ThresholdSearchResult optimize_threshold(const PosteriorModel& model, const SampleBatch& batch,
                                         const AuditConfig& cfg);

/// Same search on precomputed scores p_i = p(D|z_i), p'_i = p(D|z'_i).
/// The result depends only on the order statistics of the scores.
ThresholdSearchResult optimize_threshold_scores(const Eigen::VectorXd& scores_d,
                                                const Eigen::VectorXd& scores_dprime,
                                                const AuditConfig& cfg);

/// Fresh-sample Monte Carlo verification at the frozen (model, threshold,
/// arm); n0 = 0 is clamped to 1, n1 = 0 reports no violation. The returned
/// eps_lb is divided by the pair's group distance k.
AuditResult verify_final(const NeighborPair& pair, const MechanismParams& params,
                         const std::optional<Eigen::VectorXd>& probe, const ThresholdSearchResult& search,
                         const PosteriorModel& model, const AuditConfig& cfg, int workers = 0);

/// Full pipeline: attack, sample, fit, threshold search, independent verify.
AuditResult audit_pair(const Dataset& data, const MechanismParams& mech, const AttackSpec& attack,
                       const AuditConfig& cfg, int workers = 0,
                       const PosteriorOptions& posterior = {});

}  // namespace dpaudit
