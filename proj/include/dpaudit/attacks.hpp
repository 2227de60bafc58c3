#pragma once

#include <cstdint>
#include <string>

#include "dpaudit/types.hpp"

namespace dpaudit {

enum class AttackKind { InfluencePGA, NBCornerFlip, NBMuShift, RFIsolationFlip, ClipBKD, SwapX };

const char* to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& s);

struct AttackSpec {
  AttackKind kind = AttackKind::SwapX;
  int k = 1;                   // copies to insert
  int pga_steps = 200;
  double pga_step_size = 0.0;  // absolute step length; 0 selects 0.05 * ball radius
  double surrogate_c = 1.0;    // regularization for non-private surrogate fits
};

struct AttackResult {
  NeighborPair pair;
  AttackWitness witness;
};

/// Cached pieces of the influence closed form for a converged non-private
/// fit on D: W_ii = yhat_i (1 - yhat_i) and (X^T W X + lambda I)^{-1}, in the
/// mechanism's scaled feature space.
struct InfluenceContext {
  Eigen::VectorXd w_diag;
  Eigen::MatrixXd hessian_inv;
  Eigen::VectorXd theta_hat;
  double feature_scale = 1.0;
  double l2_sum = 1.0;  // sum-form ridge coefficient (1/c)
};

InfluenceContext build_influence_context(const Dataset& data, double c);

/// Closed-form parameter change from adding one copy of (x, y):
/// (y - yhat(x)) (X^T W X + lambda I)^{-1} x, with x given in raw feature
/// units and the result in the scaled fitting space.
Eigen::VectorXd influence_vector(const InfluenceContext& ctx, const Eigen::VectorXd& x, int y);

/// Projected gradient ascent on ||influence||^2 inside the L2 ball.
AttackResult influence_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def);

/// Flips the label of the point with minimum Linf distance to the nearest
/// bounds corner (AddRemove mode removes the ranked victims instead).
AttackResult nb_corner_flip_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def);

/// Mean-only ablation: moves the corner-closest point to the farthest corner
/// without changing its label.
AttackResult nb_mu_shift_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def);

/// Flips the label of the point with maximum summed L1 distance to the rest
/// of the data; the point doubles as the probe for the per-tree summary.
/// Under AddRemove the same flipped pair counts as 2k (delete plus insert).
AttackResult rf_isolation_flip_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def);

/// Poison along the least-variance eigenvector, projected to the median row
/// norm, labeled with the surrogate's least-likely class.
AttackResult clipbkd_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def);

/// Baseline: seeded random victim rows take the features of a random
/// opposite-class row; labels unchanged.
AttackResult swap_x_attack(const Dataset& data, std::uint64_t seed, const AttackSpec& spec,
                           NeighborDef neighbor_def);

AttackResult run_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def,
                        std::uint64_t seed);

/// Number of rows to poison for the audited epsilon under the policy.
int select_k(double epsilon_th, const KPolicy& policy);

}  // namespace dpaudit
