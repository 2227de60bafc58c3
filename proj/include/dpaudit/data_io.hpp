#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpaudit/types.hpp"

namespace dpaudit {

struct RawColumn {
  std::string name;
  bool numeric = true;
  std::vector<double> numbers;       // when numeric
  std::vector<std::string> strings;  // when categorical
};

struct RawTable {
  std::vector<RawColumn> columns;
  std::string label_column;
  long rows = 0;

  const RawColumn& column(const std::string& name) const;
};

enum class Normalization { None, MinMax01, Standardize };

const char* to_string(Normalization n);
Normalization normalization_from_string(const std::string& s);

struct PreprocessSpec {
  long max_rows = 1000;  // forests use 500
  Normalization normalize = Normalization::MinMax01;
  bool drop_categorical = false;  // forests split on numeric features only
  std::uint64_t subsample_seed = 0;
};

/// Parses an RFC-4180-style CSV (header row required, UTF-8, no embedded
/// newlines). Columns where every value parses as a number are numeric;
/// anything else is categorical. Unparsable or ragged rows are reported
/// with their line numbers.
RawTable load_csv(const std::string& path, const std::string& label_column);

/// Restricts to the two label classes, deterministically subsamples to
/// max_rows, one-hot encodes or drops categoricals, normalizes, and computes
/// the constraint geometry from the processed rows.
Dataset preprocess(const RawTable& table, const PreprocessSpec& spec);

/// Ratio of largest to smallest singular value of the centered feature
/// matrix; +inf when the matrix is rank-deficient.
double nonsphericity(const Dataset& data);

/// Two Gaussian clusters with centers separated by `separation` along the
/// first axis (in units of the within-cluster standard deviation).
Dataset synth_blobs(long n, long d, double separation, std::uint64_t seed);

/// Self-describing JSON snapshot (schema "dpaudit-dataset/1").
std::string dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const std::string& text);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace dpaudit
