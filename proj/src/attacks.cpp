#include "dpaudit/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "dpaudit/logistic.hpp"
#include "dpaudit/mechanisms.hpp"
#include "dpaudit/rng.hpp"

namespace dpaudit {

namespace {

constexpr double kTol = 1e-9;

/// Linf distance from a point to the nearest corner of the bounds rectangle
/// (each feature independently picks its closer side).
double corner_distance(const Dataset& data, Eigen::Index i) {
  double dist = 0.0;
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    const auto& b = data.bounds[static_cast<size_t>(j)];
    const double v = data.features(i, j);
    dist = std::max(dist, std::min(v - b.first, b.second - v));
  }
  return dist;
}

std::vector<long> rank_by(const Dataset& data, const std::function<double(Eigen::Index)>& key, bool ascending) {
  std::vector<long> idx(static_cast<size_t>(data.n()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](long a, long b) {
    const double ka = key(a), kb = key(b);
    if (ka != kb) return ascending ? ka < kb : ka > kb;
    return a < b;  // tie-break: lowest index
  });
  return idx;
}

/// Top-k ranked rows restricted to the leader's class, so replicating a
/// label flip k times flips k rows of the same class.
std::vector<long> topk_same_class(const Dataset& data, const std::vector<long>& ranked, int k) {
  const int leader_class = data.labels[static_cast<size_t>(ranked.front())];
  std::vector<long> victims;
  for (long i : ranked) {
    if (data.labels[static_cast<size_t>(i)] != leader_class) continue;
    victims.push_back(i);
    if (static_cast<int>(victims.size()) == k) break;
  }
  if (static_cast<int>(victims.size()) < k)
    throw std::invalid_argument("attack: not enough rows in the victim's class for k");
  return victims;
}

/// Poisoned dataset: the victim rows become copies of (x_star, y_star). The
/// constraint set is the original's; bounds/radius only widen if the attack
/// family works in the other geometry (ball poison may exit the rectangle).
Dataset replace_rows(const Dataset& base, const std::vector<long>& victims, const Eigen::VectorXd& x_star,
                     int y_star) {
  Dataset out = base;
  for (long v : victims) {
    out.features.row(v) = x_star.transpose();
    out.labels[static_cast<size_t>(v)] = y_star;
  }
  for (Eigen::Index j = 0; j < out.dim(); ++j) {
    auto& b = out.bounds[static_cast<size_t>(j)];
    b.first = std::min(b.first, x_star(j));
    b.second = std::max(b.second, x_star(j));
  }
  out.l2_radius = std::max(out.l2_radius, x_star.norm());
  out.validate();
  return out;
}

Dataset remove_rows(const Dataset& base, const std::vector<long>& victims) {
  std::vector<bool> drop(static_cast<size_t>(base.n()), false);
  for (long v : victims) drop[static_cast<size_t>(v)] = true;
  const Eigen::Index kept = base.n() - static_cast<Eigen::Index>(victims.size());
  Dataset out;
  out.features.resize(kept, base.dim());
  out.labels.reserve(static_cast<size_t>(kept));
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < base.n(); ++i) {
    if (drop[static_cast<size_t>(i)]) continue;
    out.features.row(at++) = base.features.row(i);
    out.labels.push_back(base.labels[static_cast<size_t>(i)]);
  }
  out.bounds = base.bounds;
  out.l2_radius = base.l2_radius;
  out.validate();
  return out;
}

void check_k(const Dataset& data, int k) {
  if (k < 1) throw std::invalid_argument("attack: k must be >= 1");
  if (k >= data.n()) throw std::invalid_argument("attack: k must be smaller than the dataset");
}

int group_distance(int copies, NeighborDef def) {
  // One in-place replacement costs two add/remove steps.
  return def == NeighborDef::ReplaceOne ? copies : 2 * copies;
}

}  // namespace

const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::InfluencePGA: return "influence_pga";
    case AttackKind::NBCornerFlip: return "nb_corner_flip";
    case AttackKind::NBMuShift: return "nb_mu_shift";
    case AttackKind::RFIsolationFlip: return "rf_isolation_flip";
    case AttackKind::ClipBKD: return "clipbkd";
    case AttackKind::SwapX: return "swap_x";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "influence_pga") return AttackKind::InfluencePGA;
  if (s == "nb_corner_flip") return AttackKind::NBCornerFlip;
  if (s == "nb_mu_shift") return AttackKind::NBMuShift;
  if (s == "rf_isolation_flip") return AttackKind::RFIsolationFlip;
  if (s == "clipbkd") return AttackKind::ClipBKD;
  if (s == "swap_x") return AttackKind::SwapX;
  throw std::invalid_argument("unknown attack kind: " + s);
}

int select_k(double epsilon_th, const KPolicy& policy) { return policy.select(epsilon_th); }

InfluenceContext build_influence_context(const Dataset& data, double c) {
  const LRModel fit = fit_lr_nonprivate(data, c);
  InfluenceContext ctx;
  ctx.theta_hat = fit.theta;
  ctx.feature_scale = fit.feature_scale;
  ctx.l2_sum = 1.0 / c;
  const Eigen::MatrixXd x = data.features / ctx.feature_scale;
  ctx.w_diag.resize(x.rows());
  Eigen::MatrixXd hess = ctx.l2_sum * Eigen::MatrixXd::Identity(x.cols(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double yhat = sigmoid(x.row(i).dot(ctx.theta_hat));
    ctx.w_diag(i) = yhat * (1.0 - yhat);
    hess.noalias() += ctx.w_diag(i) * (x.row(i).transpose() * x.row(i));
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::runtime_error("build_influence_context: singular Hessian (rank-deficient features?)");
  ctx.hessian_inv = ldlt.solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
  const double residual =
      (hess * ctx.hessian_inv - Eigen::MatrixXd::Identity(x.cols(), x.cols())).cwiseAbs().maxCoeff();
  if (!(residual < 1e-6))
    throw std::runtime_error("build_influence_context: singular Hessian (rank-deficient features?)");
  return ctx;
}

Eigen::VectorXd influence_vector(const InfluenceContext& ctx, const Eigen::VectorXd& x, int y) {
  const Eigen::VectorXd xs = x / ctx.feature_scale;
  const double yhat = sigmoid(xs.dot(ctx.theta_hat));
  return (static_cast<double>(y) - yhat) * (ctx.hessian_inv * xs);
}

AttackResult influence_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def) {
  check_k(data, spec.k);
  const InfluenceContext ctx = build_influence_context(data, spec.surrogate_c);
  const std::vector<long> ranked = rank_by(data, [&](Eigen::Index i) { return corner_distance(data, i); }, true);
  const long victim = ranked[0];
  const int y_star = 1 - data.labels[static_cast<size_t>(victim)];

  // Start at the opposite-class mean, ascend ||influence||^2, project onto
  // the data's L2 ball after every step, keep the best iterate seen.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(data.dim());
  long count = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.labels[static_cast<size_t>(i)] == y_star) {
      x += data.features.row(i).transpose();
      ++count;
    }
  }
  x /= static_cast<double>(count);

  const double radius = data.l2_radius;
  double step = spec.pga_step_size > 0.0 ? spec.pga_step_size : 0.05 * radius;
  const Eigen::MatrixXd a2 = ctx.hessian_inv * ctx.hessian_inv;

  auto objective = [&](const Eigen::VectorXd& pt) { return influence_vector(ctx, pt, y_star).squaredNorm(); };

  Eigen::VectorXd best = x;
  double best_val = objective(x);
  const double init_val = best_val;
  // Monotone projected ascent: normalized-gradient steps, halving the step
  // when the move does not improve, keeping the best iterate seen.
  for (int it = 0; it < spec.pga_steps && step > 1e-9 * radius; ++it) {
    const Eigen::VectorXd xs = best / ctx.feature_scale;
    const double m = xs.dot(ctx.theta_hat);
    const double yhat = sigmoid(m);
    const double r = static_cast<double>(y_star) - yhat;
    const double q = xs.dot(a2 * xs);
    // d/dx [ r(x)^2 q(x) ]; r' = -yhat(1-yhat) theta, q' = 2 A^2 xs
    Eigen::VectorXd grad =
        (2.0 * r * (-yhat * (1.0 - yhat)) * q) * ctx.theta_hat + (r * r * 2.0) * (a2 * xs);
    grad /= ctx.feature_scale;
    const double gnorm = grad.norm();
    if (!std::isfinite(gnorm))
      throw std::runtime_error("influence_attack: gradient ascent diverged; reduce pga_step_size");
    if (gnorm < 1e-14) break;
    Eigen::VectorXd cand = best + step * grad / gnorm;
    if (cand.norm() > radius) cand *= radius / cand.norm();
    const double val = objective(cand);
    if (val > best_val) {
      best_val = val;
      best = cand;
    } else {
      step *= 0.5;
    }
  }
  if (best_val + kTol < init_val) throw std::logic_error("influence_attack: lost the initial iterate");

  std::vector<long> victims(ranked.begin(), ranked.begin() + spec.k);
  AttackResult res;
  res.witness.victim_rows = victims;
  res.witness.x_star = best;
  res.witness.y_star = y_star;
  res.witness.k = group_distance(spec.k, neighbor_def);
  res.witness.probe = best;
  res.witness.note = "influence_pga";
  res.pair.original = data;
  res.pair.poisoned = replace_rows(data, victims, best, y_star);
  res.pair.k = res.witness.k;
  res.pair.neighbor_def = neighbor_def;
  res.pair.validate();
  return res;
}

AttackResult nb_corner_flip_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def) {
  check_k(data, spec.k);
  const std::vector<long> ranked =
      rank_by(data, [&](Eigen::Index i) { return corner_distance(data, i); }, true);
  const std::vector<long> victims = topk_same_class(data, ranked, spec.k);
  AttackResult res;
  res.pair.original = data;
  res.pair.neighbor_def = neighbor_def;
  const long v0 = victims[0];
  res.witness.victim_rows = victims;
  res.witness.note = "nb_corner_flip";
  if (neighbor_def == NeighborDef::AddRemove) {
    // Deletion pair: sizes differ, exposing mechanisms that assume fixed n.
    res.witness.x_star = data.features.row(v0).transpose();
    res.witness.y_star = data.labels[static_cast<size_t>(v0)];
    res.witness.k = spec.k;
    res.pair.poisoned = remove_rows(data, victims);
  } else {
    res.witness.x_star = data.features.row(v0).transpose();
    res.witness.y_star = 1 - data.labels[static_cast<size_t>(v0)];
    res.witness.k = spec.k;
    res.pair.poisoned = replace_rows(data, victims, res.witness.x_star, res.witness.y_star);
  }
  res.pair.k = res.witness.k;
  res.witness.probe = res.witness.x_star;
  res.pair.validate();
  return res;
}

AttackResult nb_mu_shift_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def) {
  check_k(data, spec.k);
  const std::vector<long> ranked =
      rank_by(data, [&](Eigen::Index i) { return corner_distance(data, i); }, true);
  const std::vector<long> victims = topk_same_class(data, ranked, spec.k);
  const long v0 = victims[0];
  // Farthest corner from the victim, feature by feature.
  Eigen::VectorXd far(data.dim());
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    const auto& b = data.bounds[static_cast<size_t>(j)];
    const double v = data.features(v0, j);
    far(j) = (v - b.first > b.second - v) ? b.first : b.second;
  }
  AttackResult res;
  res.witness.victim_rows = victims;
  res.witness.x_star = far;
  res.witness.y_star = data.labels[static_cast<size_t>(v0)];  // label kept: mean-only attack
  res.witness.k = group_distance(spec.k, neighbor_def);
  res.witness.probe = far;
  res.witness.note = "nb_mu_shift";
  res.pair.original = data;
  res.pair.poisoned = replace_rows(data, victims, far, res.witness.y_star);
  res.pair.k = res.witness.k;
  res.pair.neighbor_def = neighbor_def;
  res.pair.validate();
  return res;
}

AttackResult rf_isolation_flip_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def) {
  check_k(data, spec.k);
  const Eigen::Index n = data.n();
  std::vector<double> l1_sum(static_cast<size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (data.features.row(i) - data.features.row(j)).lpNorm<1>();
      l1_sum[static_cast<size_t>(i)] += d;
      l1_sum[static_cast<size_t>(j)] += d;
    }
  const std::vector<long> ranked =
      rank_by(data, [&](Eigen::Index i) { return l1_sum[static_cast<size_t>(i)]; }, false);
  const std::vector<long> victims = topk_same_class(data, ranked, spec.k);
  const long v0 = victims[0];

  AttackResult res;
  res.witness.victim_rows = victims;
  res.witness.x_star = data.features.row(v0).transpose();
  res.witness.y_star = 1 - data.labels[static_cast<size_t>(v0)];
  res.witness.k = group_distance(spec.k, neighbor_def);
  res.witness.probe = res.witness.x_star;
  res.witness.note = "rf_isolation_flip";
  res.pair.original = data;
  res.pair.poisoned = replace_rows(data, victims, res.witness.x_star, res.witness.y_star);
  res.pair.k = res.witness.k;
  res.pair.neighbor_def = neighbor_def;
  res.pair.validate();
  return res;
}

AttackResult clipbkd_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def) {
  check_k(data, spec.k);
  const Eigen::Index n = data.n(), d = data.dim();
  const Eigen::RowVectorXd mean = data.features.colwise().mean();
  const Eigen::MatrixXd centered = data.features.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("clipbkd_attack: eigendecomposition failed");
  Eigen::VectorXd v = eig.eigenvectors().col(0);  // smallest eigenvalue
  for (Eigen::Index j = 0; j < d; ++j) {
    if (std::fabs(v(j)) > 1e-12) {
      if (v(j) < 0.0) v = -v;
      break;
    }
  }

  std::vector<double> norms(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) norms[static_cast<size_t>(i)] = data.features.row(i).norm();
  std::sort(norms.begin(), norms.end());
  const double median = (n % 2 == 1) ? norms[static_cast<size_t>(n / 2)]
                                     : 0.5 * (norms[static_cast<size_t>(n / 2 - 1)] + norms[static_cast<size_t>(n / 2)]);
  const Eigen::VectorXd x_star = median * v;

  const LRModel surrogate = fit_lr_nonprivate(data, spec.surrogate_c);
  const double p1 = sigmoid((x_star / surrogate.feature_scale).dot(surrogate.theta));
  const int y_star = p1 < 0.5 ? 1 : 0;  // least likely class under the surrogate

  // Victims: smallest-norm rows, the least informative ones to sacrifice.
  const std::vector<long> ranked =
      rank_by(data, [&](Eigen::Index i) { return data.features.row(i).norm(); }, true);
  std::vector<long> victims(ranked.begin(), ranked.begin() + spec.k);

  AttackResult res;
  res.witness.victim_rows = victims;
  res.witness.x_star = x_star;
  res.witness.y_star = y_star;
  res.witness.k = group_distance(spec.k, neighbor_def);
  res.witness.probe = x_star;
  res.witness.note = "clipbkd";
  res.pair.original = data;
  res.pair.poisoned = replace_rows(data, victims, x_star, y_star);
  res.pair.k = res.witness.k;
  res.pair.neighbor_def = neighbor_def;
  res.pair.validate();
  return res;
}

AttackResult swap_x_attack(const Dataset& data, std::uint64_t seed, const AttackSpec& spec,
                           NeighborDef neighbor_def) {
  check_k(data, spec.k);
  Rng rng(derive_seed(seed, 0x5A));
  const long victim = static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(data.n())));
  const int victim_label = data.labels[static_cast<size_t>(victim)];

  std::vector<long> same_class, opposite_class;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.labels[static_cast<size_t>(i)] == victim_label) same_class.push_back(i);
    else opposite_class.push_back(i);
  }
  if (static_cast<int>(same_class.size()) < spec.k)
    throw std::invalid_argument("swap_x_attack: not enough rows in the victim's class for k");
  const long source = opposite_class[rng.uniform_index(opposite_class.size())];
  const Eigen::VectorXd x_star = data.features.row(source).transpose();

  // k victims drawn without replacement from the victim's class so every
  // poisoned row keeps its label while taking opposite-class features. Rows
  // already equal to the source would not change, so they are not eligible.
  std::vector<long> pool;
  for (long i : same_class)
    if (data.features.row(i).transpose() != x_star) pool.push_back(i);
  if (static_cast<int>(pool.size()) < spec.k)
    throw std::invalid_argument("swap_x_attack: not enough distinct rows to poison");
  std::vector<long> victims;
  if (data.features.row(victim).transpose() != x_star) {
    victims.push_back(victim);
    pool.erase(std::find(pool.begin(), pool.end(), victim));
  }
  while (static_cast<int>(victims.size()) < spec.k) {
    const std::size_t pick = rng.uniform_index(pool.size());
    victims.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<long>(pick));
  }
  std::sort(victims.begin(), victims.end());

  AttackResult res;
  res.witness.victim_rows = victims;
  res.witness.x_star = x_star;
  res.witness.y_star = victim_label;
  res.witness.k = group_distance(spec.k, neighbor_def);
  res.witness.probe = x_star;
  res.witness.note = "swap_x";
  res.pair.original = data;
  Dataset poisoned = data;
  for (long v : victims) poisoned.features.row(v) = x_star.transpose();
  poisoned.validate();
  res.pair.poisoned = std::move(poisoned);
  res.pair.k = res.witness.k;
  res.pair.neighbor_def = neighbor_def;
  res.pair.validate();
  return res;
}

AttackResult run_attack(const Dataset& data, const AttackSpec& spec, NeighborDef neighbor_def,
                        std::uint64_t seed) {
  switch (spec.kind) {
    case AttackKind::InfluencePGA: return influence_attack(data, spec, neighbor_def);
    case AttackKind::NBCornerFlip: return nb_corner_flip_attack(data, spec, neighbor_def);
    case AttackKind::NBMuShift: return nb_mu_shift_attack(data, spec, neighbor_def);
    case AttackKind::RFIsolationFlip: return rf_isolation_flip_attack(data, spec, neighbor_def);
    case AttackKind::ClipBKD: return clipbkd_attack(data, spec, neighbor_def);
    case AttackKind::SwapX: return swap_x_attack(data, seed, spec, neighbor_def);
  }
  throw std::logic_error("run_attack: unknown attack kind");
}

}  // namespace dpaudit
