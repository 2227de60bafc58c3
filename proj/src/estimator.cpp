#include "dpaudit/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "dpaudit/logistic.hpp"
#include "dpaudit/rng.hpp"
#include "dpaudit/stats.hpp"

namespace dpaudit {

namespace {

constexpr std::uint64_t kPhaseTag[2] = {0x5EA7C4, 0x7E71F1};  // search, verify

std::uint64_t phase_tag(Phase p) { return kPhaseTag[p == Phase::Search ? 0 : 1]; }

int resolve_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

SampleBatch generate_samples(const NeighborPair& pair, const MechanismParams& params,
                             const std::optional<Eigen::VectorXd>& probe, long n, Phase phase,
                             std::uint64_t master_seed, int workers) {
  if (n < 1) throw std::invalid_argument("generate_samples: n must be >= 1");
  const Eigen::Index m = summary_dimension(params, pair.original.dim());
  SampleBatch batch;
  batch.phase = phase;
  batch.from_d.resize(n, m);
  batch.from_dprime.resize(n, m);

  const int nthreads = std::min<long>(resolve_workers(workers), 2 * n);
  std::atomic<long> next{0};
  std::mutex err_mutex;
  std::string first_error;

  auto worker = [&]() {
    for (;;) {
      const long task = next.fetch_add(1);
      if (task >= 2 * n) return;
      const long idx = task / 2;
      const int arm = static_cast<int>(task % 2);
      const std::uint64_t seed =
          derive_seed(master_seed, phase_tag(phase), static_cast<std::uint64_t>(arm),
                      static_cast<std::uint64_t>(idx));
      try {
        const Dataset& source = arm == 0 ? pair.original : pair.poisoned;
        const SummaryVector tau = mechanism_sample(source, params, probe, seed);
        if (tau.size() != m) throw std::runtime_error("summary dimension mismatch");
        if (arm == 0) batch.from_d.row(idx) = tau.transpose();
        else batch.from_dprime.row(idx) = tau.transpose();
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (first_error.empty())
          first_error = std::string(e.what()) + " (sample seed " + std::to_string(seed) + ")";
        next.store(2 * n);
        return;
      }
    }
  };

  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (!first_error.empty()) throw std::runtime_error("generate_samples: " + first_error);
  return batch;
}

double PosteriorModel::score(const Eigen::VectorXd& z) const {
  if (degenerate) return 0.5;
  const Eigen::VectorXd s = (z - mean).cwiseQuotient(scale);
  if (hidden_units == 0) {
    double acc = weights(weights.size() - 1);
    acc += weights.head(s.size()).dot(s);
    return sigmoid(acc);
  }
  const Eigen::VectorXd h = ((w1 * s) + b1).array().tanh();
  return sigmoid(w2.dot(h) + b2);
}

Eigen::VectorXd PosteriorModel::scores(const Eigen::MatrixXd& z) const {
  Eigen::VectorXd out(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) out(i) = score(z.row(i).transpose());
  return out;
}

PosteriorModel fit_posterior(const SampleBatch& batch, const PosteriorOptions& opts, std::uint64_t seed) {
  const Eigen::Index n = batch.from_d.rows(), m = batch.from_d.cols();
  if (batch.from_dprime.rows() != n || batch.from_dprime.cols() != m)
    throw std::invalid_argument("fit_posterior: arm shapes differ");

  PosteriorModel model;
  model.mean = (batch.from_d.colwise().sum() + batch.from_dprime.colwise().sum()).transpose() /
               static_cast<double>(2 * n);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    var += (batch.from_d.row(i).transpose() - model.mean).array().square().matrix();
    var += (batch.from_dprime.row(i).transpose() - model.mean).array().square().matrix();
  }
  var /= static_cast<double>(2 * n);
  model.scale.resize(m);
  bool any_varying = false;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double sd = std::sqrt(var(j));
    if (sd > 1e-12) {
      model.scale(j) = sd;
      any_varying = true;
    } else {
      model.scale(j) = 1.0;
    }
  }
  if (!any_varying) {
    model.degenerate = true;
    model.weights = Eigen::VectorXd::Zero(m + 1);
    return model;
  }

  Eigen::MatrixXd x(2 * n, m + 1);
  std::vector<int> y(static_cast<size_t>(2 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i).head(m) = (batch.from_d.row(i).transpose() - model.mean).cwiseQuotient(model.scale).transpose();
    x(i, m) = 1.0;
    y[static_cast<size_t>(i)] = 1;
    x.row(n + i).head(m) =
        (batch.from_dprime.row(i).transpose() - model.mean).cwiseQuotient(model.scale).transpose();
    x(n + i, m) = 1.0;
    y[static_cast<size_t>(n + i)] = 0;
  }

  if (opts.hidden_units == 0) {
    LogisticOptions lopts;
    lopts.max_iterations = opts.iterations;
    lopts.gradient_tol = 1e-10 * static_cast<double>(2 * n);
    const LogisticFit fit = fit_logistic(x, y, opts.ridge * static_cast<double>(2 * n), lopts);
    model.weights = fit.theta;
    return model;
  }

  // One tanh hidden layer trained with plain full-batch gradient descent.
  const int h = opts.hidden_units;
  model.hidden_units = h;
  Rng rng(derive_seed(seed, 0xF17));
  model.w1.resize(h, m);
  model.b1 = Eigen::VectorXd::Zero(h);
  model.w2.resize(h);
  const double init = 1.0 / std::sqrt(static_cast<double>(m));
  for (int i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) model.w1(i, j) = init * rng.normal();
    model.w2(i) = init * rng.normal();
  }
  const double lr = 0.5;
  const double inv_n = 1.0 / static_cast<double>(2 * n);
  for (int it = 0; it < opts.iterations; ++it) {
    Eigen::MatrixXd gw1 = opts.ridge * model.w1;
    Eigen::VectorXd gb1 = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd gw2 = opts.ridge * model.w2;
    double gb2 = 0.0;
    for (Eigen::Index i = 0; i < 2 * n; ++i) {
      const Eigen::VectorXd xi = x.row(i).head(m).transpose();
      const Eigen::VectorXd hid = ((model.w1 * xi) + model.b1).array().tanh();
      const double p = sigmoid(model.w2.dot(hid) + model.b2);
      const double delta = (p - static_cast<double>(y[static_cast<size_t>(i)])) * inv_n;
      gw2 += delta * hid;
      gb2 += delta;
      const Eigen::VectorXd dh = delta * model.w2.cwiseProduct(
                                              (1.0 - hid.array().square()).matrix());
      gw1 += dh * xi.transpose();
      gb1 += dh;
    }
    model.w1 -= lr * gw1;
    model.b1 -= lr * gb1;
    model.w2 -= lr * gw2;
    model.b2 -= lr * gb2;
  }
  return model;
}

ThresholdSearchResult optimize_threshold(const PosteriorModel& model, const SampleBatch& batch,
                                         const AuditConfig& cfg) {
  if (batch.phase != Phase::Search)
    throw std::invalid_argument("optimize_threshold: expected a search-phase batch");
  return optimize_threshold_scores(model.scores(batch.from_d), model.scores(batch.from_dprime), cfg);
}

ThresholdSearchResult optimize_threshold_scores(const Eigen::VectorXd& p, const Eigen::VectorXd& pp,
                                                const AuditConfig& cfg) {
  if (p.size() != pp.size()) throw std::invalid_argument("optimize_threshold: arm sizes differ");
  const long n = p.size();

  // Sorted copies let each candidate threshold be counted by binary search:
  // n_above(v, t) = #(v > t).
  std::vector<double> ps(p.data(), p.data() + n), pps(pp.data(), pp.data() + n);
  std::sort(ps.begin(), ps.end());
  std::sort(pps.begin(), pps.end());
  auto n_above = [](const std::vector<double>& v, double t) {
    return static_cast<long>(v.end() - std::upper_bound(v.begin(), v.end(), t));
  };

  // Candidate thresholds sit between consecutive distinct observed scores
  // (ties collapse into one cut), which realizes exactly the partitions of
  // the sorted-score scan with strict ">", plus the two trivial sets. The
  // midpoint placement keeps the search symmetric under swapping the arms.
  std::vector<double> merged;
  merged.reserve(static_cast<size_t>(2 * n));
  merged.insert(merged.end(), ps.begin(), ps.end());
  merged.insert(merged.end(), pps.begin(), pps.end());
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  std::vector<double> candidates;
  candidates.reserve(merged.size() + 1);
  candidates.push_back(0.0);
  for (size_t i = 0; i + 1 < merged.size(); ++i)
    candidates.push_back(0.5 * (merged[i] + merged[i + 1]));
  candidates.push_back(1.0);

  const double n_real = static_cast<double>(n);
  ThresholdSearchResult best;
  auto consider = [&](double t, long n1, long n0, bool complement) {
    if (static_cast<double>(n0) / n_real < cfg.min_prob_r) return;  // avoid estimating probs < r
    // One-sided lower bound at alpha/2 = the 1-alpha interval's lower end.
    const double lb = katz_log_interval(n1, n0, n, cfg.alpha).lower;
    if (!best.feasible || lb > best.eps_lb_search) {
      best.feasible = true;
      best.eps_lb_search = lb;
      best.threshold_t = t;
      best.n1 = n1;
      best.n0 = n0;
      best.used_complement = complement;
      best.c_hat = static_cast<double>(n0) / n_real;
    }
  };

  for (double t : candidates) {
    const long above_d = n_above(ps, t);
    const long above_dp = n_above(pps, t);
    // S = {score > t}: numerator arm D.
    consider(t, above_d, above_dp, false);
    // Complement test: S^c = {score <= t} with the arms swapped.
    consider(t, n - above_dp, n - above_d, true);
  }
  return best;
}

AuditResult verify_final(const NeighborPair& pair, const MechanismParams& params,
                         const std::optional<Eigen::VectorXd>& probe, const ThresholdSearchResult& search,
                         const PosteriorModel& model, const AuditConfig& cfg, int workers) {
  const SampleBatch fresh = generate_samples(pair, params, probe, cfg.samples_n, Phase::Verify,
                                             cfg.master_seed, workers);
  const Eigen::VectorXd p = model.scores(fresh.from_d);
  const Eigen::VectorXd pp = model.scores(fresh.from_dprime);
  const long n = cfg.samples_n;

  long n1 = 0, n0 = 0;
  if (!search.used_complement) {
    for (long i = 0; i < n; ++i) {
      n1 += p(i) > search.threshold_t ? 1 : 0;
      n0 += pp(i) > search.threshold_t ? 1 : 0;
    }
  } else {
    for (long i = 0; i < n; ++i) {
      n1 += pp(i) <= search.threshold_t ? 1 : 0;
      n0 += p(i) <= search.threshold_t ? 1 : 0;
    }
  }

  AuditResult result;
  result.threshold_t = search.threshold_t;
  result.used_complement = search.used_complement;
  result.samples_n = n;
  result.k = pair.k;
  result.n1 = n1;
  result.n0 = n0;

  if (!search.feasible || n1 == 0) {
    // No violation detected.
    result.eps_lb = -std::numeric_limits<double>::infinity();
    result.interval = {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                       1.0 - cfg.alpha, IntervalMethod::KatzLog};
    return result;
  }
  const long n0_clamped = std::max<long>(n0, 1);
  ConfidenceInterval ci = katz_log_interval(n1, n0_clamped, n, cfg.alpha);
  const double k_real = static_cast<double>(pair.k);
  result.interval = {ci.lower / k_real, ci.upper / k_real, ci.level, ci.method};
  result.eps_lb = ci.lower / k_real;
  return result;
}

AuditResult audit_pair(const Dataset& data, const MechanismParams& mech, const AttackSpec& attack,
                       const AuditConfig& cfg, int workers, const PosteriorOptions& posterior) {
  cfg.validate();
  AttackSpec spec = attack;
  if (spec.k <= 0) spec.k = select_k(cfg.spec.epsilon, cfg.k_policy);

  AttackResult atk;
  try {
    atk = run_attack(data, spec, cfg.neighbor_def, derive_seed(cfg.master_seed, 0xA77ACC));
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("audit_pair[attack]: ") + e.what());
  }

  std::optional<Eigen::VectorXd> probe;
  if (mech.kind == MechanismKind::RandomForest) probe = atk.witness.probe;

  SampleBatch search_batch;
  try {
    search_batch = generate_samples(atk.pair, mech, probe, cfg.samples_n, Phase::Search,
                                    cfg.master_seed, workers);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("audit_pair[search-sampling]: ") + e.what());
  }

  PosteriorModel model;
  ThresholdSearchResult search;
  try {
    model = fit_posterior(search_batch, posterior, derive_seed(cfg.master_seed, 0xF17));
    search = optimize_threshold(model, search_batch, cfg);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("audit_pair[threshold-search]: ") + e.what());
  }

  try {
    AuditResult result = verify_final(atk.pair, mech, probe, search, model, cfg, workers);
    result.witness = atk.witness;
    return result;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("audit_pair[verify]: ") + e.what());
  }
}

}  // namespace dpaudit
