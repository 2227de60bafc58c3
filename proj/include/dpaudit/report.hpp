#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpaudit/attacks.hpp"
#include "dpaudit/data_io.hpp"
#include "dpaudit/estimator.hpp"
#include "dpaudit/mechanisms.hpp"

namespace dpaudit {

struct DatasetSource {
  std::string kind = "synth_blobs";  // "synth_blobs" | "csv" | "json"
  // synth_blobs
  long n = 400;
  long d = 4;
  double separation = 3.0;
  std::uint64_t seed = 1;
  // csv / json
  std::string path;
  std::string label_column;
  PreprocessSpec preprocess;
};

struct RunConfig {
  DatasetSource dataset;
  MechanismParams mechanism;
  std::vector<AttackSpec> attacks;
  std::vector<double> eps_grid = {0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 50.0};
  int replicates = 3;
  long samples_n = 10000;
  double alpha = 0.05;
  double min_prob_r = 0.0;  // 0 selects max(0.01, 10/N)
  KPolicy k_policy = KPolicy::paper_default();
  std::uint64_t master_seed = 0;
  NeighborDef neighbor_def = NeighborDef::ReplaceOne;
  PosteriorOptions posterior;
  std::string out_dir = ".";

  void validate() const;
};

struct ReportRow {
  std::string mechanism;
  std::string attack;
  double eps_th = 0.0;
  int k = 1;
  int replicate = 0;
  double eps_lb = 0.0;
  long n1 = 0;
  long n0 = 0;
  long samples_n = 0;
  bool used_complement = false;
  double threshold = 0.0;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
  std::string error;  // empty on success
};

struct GridOutcome {
  std::vector<ReportRow> rows;
  bool any_error = false;
  std::string report_path;   // JSON lines, schema "dpaudit-report/1"
  std::string medians_path;  // CSV of median eps_lb per (attack, eps_th)
};

RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json_text(const std::string& text);

Dataset materialize_dataset(const DatasetSource& source);

/// Runs every (attack x eps_th x replicate) audit and writes the report
/// files. Byte-identical output for a fixed config and master seed,
/// regardless of worker count, except the generated_at header field.
GridOutcome run_grid(const RunConfig& config, int workers = 0);

/// Coverage of both interval methods over a (p1, N) grid; one CSV row per
/// (p1, N, method).
void coverage_report(const std::vector<double>& p1_grid, const std::vector<long>& n_grid, double alpha,
                     long trials, std::uint64_t seed, const std::string& out_path);

std::string report_row_to_json(const ReportRow& row);

}  // namespace dpaudit
