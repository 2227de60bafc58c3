#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpaudit/report.hpp"
#include "dpaudit/rng.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAuditError = 1;
constexpr int kExitConfigError = 2;

int cmd_audit(const std::string& config_path, std::uint64_t seed, bool seed_set, int workers,
              const std::string& out_dir) {
  dpaudit::RunConfig config;
  try {
    config = dpaudit::load_run_config(config_path);
    if (seed_set) config.master_seed = seed;
    if (!out_dir.empty()) config.out_dir = out_dir;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    const dpaudit::GridOutcome outcome = dpaudit::run_grid(config, workers);
    long failures = 0;
    for (const auto& row : outcome.rows)
      if (!row.error.empty()) ++failures;
    std::cout << "wrote " << outcome.rows.size() << " rows to " << outcome.report_path << " ("
              << failures << " failed), medians in " << outcome.medians_path << "\n";
    return outcome.any_error ? kExitAuditError : kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "audit error: " << e.what() << "\n";
    return kExitAuditError;
  }
}

int cmd_coverage(const std::vector<double>& p1, const std::vector<long>& n, double alpha, long trials,
                 std::uint64_t seed, const std::string& out_path) {
  try {
    dpaudit::coverage_report(p1, n, alpha, trials, seed, out_path);
    std::cout << "wrote coverage grid to " << out_path << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "coverage error: " << e.what() << "\n";
    return kExitAuditError;
  }
}

int cmd_inspect(const std::string& config_path, std::uint64_t seed, bool seed_set) {
  dpaudit::RunConfig config;
  try {
    config = dpaudit::load_run_config(config_path);
    if (seed_set) config.master_seed = seed;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    const dpaudit::Dataset data = dpaudit::materialize_dataset(config.dataset);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& attack : config.attacks) {
      dpaudit::AttackSpec spec = attack;
      if (spec.k <= 0) spec.k = dpaudit::select_k(config.eps_grid.front(), config.k_policy);
      const dpaudit::AttackResult res = dpaudit::run_attack(
          data, spec, config.neighbor_def, dpaudit::derive_seed(config.master_seed, 0xA77ACC));
      nlohmann::json w;
      w["attack"] = dpaudit::to_string(spec.kind);
      w["victim_rows"] = res.witness.victim_rows;
      w["x_star"] = std::vector<double>(res.witness.x_star.data(),
                                        res.witness.x_star.data() + res.witness.x_star.size());
      w["y_star"] = res.witness.y_star;
      w["k"] = res.witness.k;
      w["neighbor_def"] = dpaudit::to_string(config.neighbor_def);
      w["note"] = res.witness.note;
      out.push_back(std::move(w));
    }
    std::cout << out.dump(2) << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "inspect error: " << e.what() << "\n";
    return kExitAuditError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpaudit: empirical (eps, delta)-differential-privacy auditing for ML mechanisms"};
  app.require_subcommand(1);

  std::string config_path, out_dir, coverage_out = "coverage.csv";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
  double alpha = 0.05;
  long trials = 10000;
  std::vector<double> p1_grid = {0.01, 0.02, 0.05};
  std::vector<long> n_grid = {1000, 10000, 50000};

  auto* audit = app.add_subcommand("audit", "run the configured audit grid and write reports");
  audit->add_option("--config", config_path, "JSON run configuration")->required();
  audit->add_option("--seed", seed, "override the master seed")->each([&](const std::string&) { seed_set = true; });
  audit->add_option("--workers", workers, "worker threads (0 = hardware concurrency)");
  audit->add_option("--out", out_dir, "output directory (overrides config)");

  auto* coverage = app.add_subcommand("coverage", "interval coverage simulation over a (p1, N) grid");
  coverage->add_option("--p1", p1_grid, "success probabilities");
  coverage->add_option("--n", n_grid, "sample sizes");
  coverage->add_option("--alpha", alpha, "confidence level parameter");
  coverage->add_option("--trials", trials, "Monte Carlo trials per grid point");
  coverage->add_option("--seed", seed, "simulation seed");
  coverage->add_option("--out", coverage_out, "output CSV path");

  auto* inspect = app.add_subcommand("inspect", "print the attack witness for the configured pair");
  inspect->add_option("--config", config_path, "JSON run configuration")->required();
  inspect->add_option("--seed", seed, "override the master seed")->each([&](const std::string&) { seed_set = true; });

  CLI11_PARSE(app, argc, argv);

  if (audit->parsed()) return cmd_audit(config_path, seed, seed_set, workers, out_dir);
  if (coverage->parsed()) return cmd_coverage(p1_grid, n_grid, alpha, trials, seed, coverage_out);
  if (inspect->parsed()) return cmd_inspect(config_path, seed, seed_set);
  return kExitConfigError;
}
