#include "dpaudit/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dpaudit/rng.hpp"

namespace dpaudit {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line, long line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  if (quoted) throw std::runtime_error("line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(cur);
  return fields;
}

bool parse_number(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

}  // namespace

const RawColumn& RawTable::column(const std::string& name) const {
  for (const auto& c : columns)
    if (c.name == name) return c;
  throw std::invalid_argument("RawTable: no column named '" + name + "'");
}

const char* to_string(Normalization n) {
  switch (n) {
    case Normalization::None: return "none";
    case Normalization::MinMax01: return "minmax01";
    case Normalization::Standardize: return "standardize";
  }
  return "unknown";
}

Normalization normalization_from_string(const std::string& s) {
  if (s == "none") return Normalization::None;
  if (s == "minmax01") return Normalization::MinMax01;
  if (s == "standardize") return Normalization::Standardize;
  throw std::invalid_argument("unknown normalization: " + s);
}

RawTable load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: " + path + " is empty (no header row)");
  const std::vector<std::string> header = split_csv_line(line, 1);

  std::vector<std::vector<std::string>> cells(header.size());
  std::vector<std::string> problems;
  long line_no = 1, rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = split_csv_line(line, line_no);
    } catch (const std::exception& e) {
      problems.push_back(e.what());
      continue;
    }
    if (fields.size() != header.size()) {
      problems.push_back("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                         " fields, got " + std::to_string(fields.size()));
      continue;
    }
    bool empty_field = false;
    for (size_t j = 0; j < fields.size(); ++j) {
      if (fields[j].empty()) {
        problems.push_back("line " + std::to_string(line_no) + ": missing value in column '" + header[j] + "'");
        empty_field = true;
        break;
      }
    }
    if (empty_field) continue;
    for (size_t j = 0; j < fields.size(); ++j) cells[j].push_back(fields[j]);
    ++rows;
  }
  if (!problems.empty()) {
    std::string msg = "load_csv: " + path + " has " + std::to_string(problems.size()) + " bad row(s): ";
    for (size_t i = 0; i < problems.size() && i < 5; ++i) msg += (i ? "; " : "") + problems[i];
    throw std::runtime_error(msg);
  }
  if (rows == 0) throw std::runtime_error("load_csv: " + path + " has no data rows");

  RawTable table;
  table.rows = rows;
  table.label_column = label_column;
  bool label_found = false;
  for (size_t j = 0; j < header.size(); ++j) {
    RawColumn col;
    col.name = header[j];
    col.numeric = true;
    col.numbers.reserve(cells[j].size());
    for (const std::string& s : cells[j]) {
      double v;
      if (!parse_number(s, &v)) {
        col.numeric = false;
        break;
      }
      col.numbers.push_back(v);
    }
    if (!col.numeric) {
      col.numbers.clear();
      col.strings = cells[j];
    }
    if (col.name == label_column) label_found = true;
    table.columns.push_back(std::move(col));
  }
  if (!label_found)
    throw std::runtime_error("load_csv: " + path + " has no label column named '" + label_column + "'");
  return table;
}

Dataset preprocess(const RawTable& table, const PreprocessSpec& spec) {
  if (spec.max_rows < 2) throw std::invalid_argument("preprocess: max_rows must be >= 2");
  const RawColumn& label_col = table.column(table.label_column);

  // Binary restriction: numeric labels keep values 0 and 1; categorical
  // labels keep the two lexicographically smallest classes.
  std::vector<int> labels_all(static_cast<size_t>(table.rows), -1);
  if (label_col.numeric) {
    for (long i = 0; i < table.rows; ++i) {
      const double v = label_col.numbers[static_cast<size_t>(i)];
      if (v == 0.0) labels_all[static_cast<size_t>(i)] = 0;
      else if (v == 1.0) labels_all[static_cast<size_t>(i)] = 1;
    }
  } else {
    std::set<std::string> classes(label_col.strings.begin(), label_col.strings.end());
    if (classes.size() < 2) throw std::runtime_error("preprocess: label column has fewer than 2 classes");
    auto it = classes.begin();
    const std::string c0 = *it++;
    const std::string c1 = *it;
    for (long i = 0; i < table.rows; ++i) {
      const std::string& v = label_col.strings[static_cast<size_t>(i)];
      if (v == c0) labels_all[static_cast<size_t>(i)] = 0;
      else if (v == c1) labels_all[static_cast<size_t>(i)] = 1;
    }
  }

  std::vector<long> kept;
  for (long i = 0; i < table.rows; ++i)
    if (labels_all[static_cast<size_t>(i)] >= 0) kept.push_back(i);

  // Deterministic subsample: partial Fisher-Yates prefix, then restore row order.
  if (static_cast<long>(kept.size()) > spec.max_rows) {
    Rng rng(derive_seed(spec.subsample_seed, 0x5AB5));
    for (long i = 0; i < spec.max_rows; ++i) {
      const long j = i + static_cast<long>(rng.uniform_index(kept.size() - static_cast<size_t>(i)));
      std::swap(kept[static_cast<size_t>(i)], kept[static_cast<size_t>(j)]);
    }
    kept.resize(static_cast<size_t>(spec.max_rows));
    std::sort(kept.begin(), kept.end());
  }

  long per_class[2] = {0, 0};
  for (long i : kept) ++per_class[labels_all[static_cast<size_t>(i)]];
  if (per_class[0] < 2 || per_class[1] < 2)
    throw std::runtime_error("preprocess: need at least 2 rows per class after restriction, have " +
                             std::to_string(per_class[0]) + "/" + std::to_string(per_class[1]));

  // Assemble feature columns: numeric as-is, categoricals one-hot or dropped.
  std::vector<std::vector<double>> feature_cols;
  for (const auto& col : table.columns) {
    if (col.name == table.label_column) continue;
    if (col.numeric) {
      std::vector<double> vals;
      vals.reserve(kept.size());
      for (long i : kept) vals.push_back(col.numbers[static_cast<size_t>(i)]);
      feature_cols.push_back(std::move(vals));
    } else if (!spec.drop_categorical) {
      std::set<std::string> cats(col.strings.begin(), col.strings.end());
      for (const std::string& cat : cats) {
        std::vector<double> vals;
        vals.reserve(kept.size());
        for (long i : kept) vals.push_back(col.strings[static_cast<size_t>(i)] == cat ? 1.0 : 0.0);
        feature_cols.push_back(std::move(vals));
      }
    }
  }
  if (feature_cols.empty()) throw std::runtime_error("preprocess: no usable feature columns");

  const long n = static_cast<long>(kept.size());
  const long d = static_cast<long>(feature_cols.size());
  Eigen::MatrixXd x(n, d);
  for (long j = 0; j < d; ++j)
    for (long i = 0; i < n; ++i) x(i, j) = feature_cols[static_cast<size_t>(j)][static_cast<size_t>(i)];

  for (long j = 0; j < d; ++j) {
    if (spec.normalize == Normalization::MinMax01) {
      const double lo = x.col(j).minCoeff(), hi = x.col(j).maxCoeff();
      if (hi > lo) x.col(j) = (x.col(j).array() - lo) / (hi - lo);
      else x.col(j).setZero();
    } else if (spec.normalize == Normalization::Standardize) {
      const double mean = x.col(j).mean();
      const double sd = std::sqrt((x.col(j).array() - mean).square().sum() / static_cast<double>(n));
      if (sd > 1e-12) x.col(j) = (x.col(j).array() - mean) / sd;
      else x.col(j).setZero();
    }
  }

  std::vector<int> labels;
  labels.reserve(kept.size());
  for (long i : kept) labels.push_back(labels_all[static_cast<size_t>(i)]);
  return Dataset::from_data(std::move(x), std::move(labels));
}

double nonsphericity(const Dataset& data) {
  if (data.n() <= data.dim()) throw std::invalid_argument("nonsphericity: need n > d");
  const Eigen::MatrixXd centered = data.features.rowwise() - data.features.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin < 1e-12) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

Dataset synth_blobs(long n, long d, double separation, std::uint64_t seed) {
  if (n < 4 || d < 1) throw std::invalid_argument("synth_blobs: need n >= 4 and d >= 1");
  Rng rng(derive_seed(seed, 0xB70B5));
  // Unit-variance clusters separated along the first axis.
  Eigen::MatrixXd x(n, d);
  std::vector<int> labels(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    labels[static_cast<size_t>(i)] = y;
    for (long j = 0; j < d; ++j) x(i, j) = rng.normal();
    x(i, 0) += (y == 1 ? 0.5 : -0.5) * separation;
  }
  return Dataset::from_data(std::move(x), std::move(labels));
}

std::string dataset_to_json(const Dataset& data) {
  json j;
  j["schema"] = "dpaudit-dataset/1";
  j["n"] = data.n();
  j["d"] = data.dim();
  json feats = json::array();
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < data.dim(); ++c) row.push_back(data.features(i, c));
    feats.push_back(std::move(row));
  }
  j["features"] = std::move(feats);
  j["labels"] = data.labels;
  json bounds = json::array();
  for (const auto& b : data.bounds) bounds.push_back(json::array({b.first, b.second}));
  j["bounds"] = std::move(bounds);
  j["l2_radius"] = data.l2_radius;
  return j.dump();
}

Dataset dataset_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("schema", "") != "dpaudit-dataset/1")
    throw std::runtime_error("dataset_from_json: unsupported schema");
  const long n = j.at("n").get<long>();
  const long d = j.at("d").get<long>();
  Dataset data;
  data.features.resize(n, d);
  const auto& feats = j.at("features");
  for (long i = 0; i < n; ++i)
    for (long c = 0; c < d; ++c) data.features(i, c) = feats.at(i).at(c).get<double>();
  data.labels = j.at("labels").get<std::vector<int>>();
  for (const auto& b : j.at("bounds")) data.bounds.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
  data.l2_radius = j.at("l2_radius").get<double>();
  data.validate();
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot write " + path);
  out << dataset_to_json(data) << "\n";
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return dataset_from_json(ss.str());
}

}  // namespace dpaudit
