#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dpaudit/data_io.hpp"
#include "dpaudit/logistic.hpp"
#include "dpaudit/mechanisms.hpp"
#include "dpaudit/rng.hpp"

using namespace dpaudit;

namespace {

namespace fs = std::filesystem;

std::string write_temp(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << content;
  return p.string();
}

// Round-trips a Dataset through a RawTable for the idempotence check.
RawTable table_of(const Dataset& data) {
  RawTable t;
  t.rows = data.n();
  t.label_column = "label";
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    RawColumn col;
    col.name = "f" + std::to_string(j);
    col.numeric = true;
    for (Eigen::Index i = 0; i < data.n(); ++i) col.numbers.push_back(data.features(i, j));
    t.columns.push_back(std::move(col));
  }
  RawColumn label;
  label.name = "label";
  label.numeric = true;
  for (int y : data.labels) label.numbers.push_back(static_cast<double>(y));
  t.columns.push_back(std::move(label));
  return t;
}

}  // namespace

TEST_CASE("csv loading") {
  SUBCASE("numeric fixture parses into a typed table") {
    const std::string path = write_temp("dpaudit_t1.csv", "a,b,label\n1.5,2,0\n2.5,3,1\n0.5,1,0\n");
    const RawTable t = load_csv(path, "label");
    CHECK(t.rows == 3);
    CHECK(t.columns.size() == 3);
    CHECK(t.column("a").numeric);
    CHECK(t.column("a").numbers[1] == 2.5);
  }
  SUBCASE("non-numeric feature becomes categorical") {
    const std::string path = write_temp("dpaudit_t2.csv", "color,label\nred,0\nblue,1\nred,1\n");
    const RawTable t = load_csv(path, "label");
    CHECK_FALSE(t.column("color").numeric);
    CHECK(t.column("color").strings[0] == "red");
  }
  SUBCASE("quoted fields with embedded commas") {
    const std::string path = write_temp("dpaudit_t3.csv", "name,label\n\"a,b\",0\n\"c\"\"d\",1\n");
    const RawTable t = load_csv(path, "label");
    CHECK(t.column("name").strings[0] == "a,b");
    CHECK(t.column("name").strings[1] == "c\"d");
  }
  SUBCASE("missing label column names the file") {
    const std::string path = write_temp("dpaudit_t4.csv", "a,b\n1,2\n");
    CHECK_THROWS_WITH_AS(load_csv(path, "label"),
                         doctest::Contains("dpaudit_t4.csv"), std::runtime_error);
  }
  SUBCASE("empty file reports the missing header") {
    const std::string path = write_temp("dpaudit_t5.csv", "");
    CHECK_THROWS_WITH_AS(load_csv(path, "label"), doctest::Contains("header"), std::runtime_error);
  }
  SUBCASE("bad rows are reported with line numbers") {
    const std::string path = write_temp("dpaudit_t6.csv", "a,label\n1,0\nbroken_row\n2,1\n");
    CHECK_THROWS_WITH_AS(load_csv(path, "label"), doctest::Contains("line 3"), std::runtime_error);
  }
}

TEST_CASE("preprocess") {
  SUBCASE("subsamples to max_rows with both classes present") {
    const Dataset big = synth_blobs(2000, 3, 2.0, 5);
    const RawTable t = table_of(big);
    PreprocessSpec spec;
    spec.max_rows = 1000;
    spec.normalize = Normalization::None;
    spec.subsample_seed = 9;
    const Dataset out = preprocess(t, spec);
    CHECK(out.n() == 1000);
    CHECK(out.class_count(0) >= 2);
    CHECK(out.class_count(1) >= 2);
    SUBCASE("same seed gives identical subsample") {
      const Dataset again = preprocess(t, spec);
      CHECK(out.features == again.features);
      CHECK(out.labels == again.labels);
    }
    SUBCASE("different seed gives a different subsample") {
      PreprocessSpec other = spec;
      other.subsample_seed = 10;
      CHECK(preprocess(t, other).features != out.features);
    }
  }
  SUBCASE("minmax normalization puts every feature in the unit interval") {
    const Dataset raw = synth_blobs(100, 2, 2.0, 6);
    PreprocessSpec spec;
    spec.max_rows = 1000;
    spec.normalize = Normalization::MinMax01;
    const Dataset out = preprocess(table_of(raw), spec);
    for (Eigen::Index j = 0; j < out.dim(); ++j) {
      CHECK(out.bounds[static_cast<size_t>(j)].first == doctest::Approx(0.0));
      CHECK(out.bounds[static_cast<size_t>(j)].second == doctest::Approx(1.0));
    }
  }
  SUBCASE("idempotent under a fixed spec") {
    const Dataset raw = synth_blobs(300, 2, 2.0, 7);
    PreprocessSpec spec;
    spec.max_rows = 1000;
    spec.normalize = Normalization::MinMax01;
    const Dataset once = preprocess(table_of(raw), spec);
    const Dataset twice = preprocess(table_of(once), spec);
    CHECK(once.features == twice.features);
    CHECK(once.labels == twice.labels);
    CHECK(once.l2_radius == twice.l2_radius);
  }
  SUBCASE("categoricals one-hot encode, or drop for forests") {
    const std::string path = write_temp(
        "dpaudit_t7.csv", "x,color,label\n0.1,red,0\n0.2,blue,1\n0.3,red,0\n0.4,green,1\n0.5,red,0\n0.6,blue,1\n");
    const RawTable t = load_csv(path, "label");
    PreprocessSpec spec;
    spec.normalize = Normalization::None;
    const Dataset hot = preprocess(t, spec);
    CHECK(hot.dim() == 1 + 3);  // x + one-hot(blue, green, red)
    spec.drop_categorical = true;
    const Dataset dropped = preprocess(t, spec);
    CHECK(dropped.dim() == 1);
  }
  SUBCASE("multiclass numeric labels restrict to classes 0 and 1") {
    const std::string path =
        write_temp("dpaudit_t8.csv", "x,label\n1,0\n2,1\n3,2\n4,0\n5,1\n6,2\n7,0\n8,1\n");
    const RawTable t = load_csv(path, "label");
    PreprocessSpec spec;
    spec.normalize = Normalization::None;
    const Dataset out = preprocess(t, spec);
    CHECK(out.n() == 6);
  }
  SUBCASE("single usable class is rejected") {
    const std::string path = write_temp("dpaudit_t9.csv", "x,label\n1,0\n2,0\n3,0\n4,2\n");
    const RawTable t = load_csv(path, "label");
    PreprocessSpec spec;
    CHECK_THROWS(preprocess(t, spec));
  }
}

TEST_CASE("nonsphericity") {
  SUBCASE("standardized isotropic gaussian is near one") {
    Rng rng(3);
    Eigen::MatrixXd x(10000, 5);
    std::vector<int> y;
    for (int i = 0; i < 10000; ++i) {
      for (int j = 0; j < 5; ++j) x(i, j) = rng.normal();
      y.push_back(i % 2);
    }
    const double ratio = nonsphericity(Dataset::from_data(x, y));
    CHECK(ratio >= 1.0);
    CHECK(ratio <= 1.2);
  }
  SUBCASE("axis variances (100, 1) give ratio near 10") {
    Rng rng(4);
    Eigen::MatrixXd x(10000, 2);
    std::vector<int> y;
    for (int i = 0; i < 10000; ++i) {
      x(i, 0) = 10.0 * rng.normal();
      x(i, 1) = rng.normal();
      y.push_back(i % 2);
    }
    CHECK(nonsphericity(Dataset::from_data(x, y)) == doctest::Approx(10.0).epsilon(0.10));
  }
  SUBCASE("rank-deficient data reports infinity") {
    Eigen::MatrixXd x(10, 2);
    for (int i = 0; i < 10; ++i) {
      x(i, 0) = static_cast<double>(i);
      x(i, 1) = 2.0 * static_cast<double>(i);  // exact linear dependence
    }
    const double ratio = nonsphericity(Dataset::from_data(x, {0, 1, 0, 1, 0, 1, 0, 1, 0, 1}));
    CHECK(std::isinf(ratio));
  }
}

TEST_CASE("synthetic blobs") {
  SUBCASE("zero separation is unlearnable") {
    const Dataset data = synth_blobs(600, 2, 0.0, 8);
    const LRModel fit = fit_lr_nonprivate(data, 1.0);
    long correct = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const double p = sigmoid((data.features.row(i) / fit.feature_scale).dot(fit.theta));
      correct += ((p > 0.5) == (data.labels[static_cast<size_t>(i)] == 1)) ? 1 : 0;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(data.n());
    CHECK(acc > 0.40);
    CHECK(acc < 0.60);
  }
  SUBCASE("five-sigma separation is essentially separable") {
    const Dataset data = synth_blobs(600, 2, 5.0, 9);
    const LRModel fit = fit_lr_nonprivate(data, 10.0);
    long correct = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const double p = sigmoid((data.features.row(i) / fit.feature_scale).dot(fit.theta));
      correct += ((p > 0.5) == (data.labels[static_cast<size_t>(i)] == 1)) ? 1 : 0;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(data.n()) >= 0.99);
  }
  SUBCASE("seeded determinism") {
    const Dataset a = synth_blobs(50, 3, 2.0, 10);
    const Dataset b = synth_blobs(50, 3, 2.0, 10);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(synth_blobs(50, 3, 2.0, 11).features != a.features);
  }
  SUBCASE("constraint geometry always contains the rows") {
    const Dataset data = synth_blobs(200, 4, 3.0, 12);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      CHECK(data.features.row(i).norm() <= data.l2_radius + 1e-12);
      for (Eigen::Index j = 0; j < data.dim(); ++j) {
        CHECK(data.features(i, j) >= data.bounds[static_cast<size_t>(j)].first);
        CHECK(data.features(i, j) <= data.bounds[static_cast<size_t>(j)].second);
      }
    }
  }
}

TEST_CASE("dataset json snapshot round trip") {
  const Dataset data = synth_blobs(25, 3, 1.5, 13);
  const fs::path p = fs::temp_directory_path() / "dpaudit_ds.json";
  save_dataset(data, p.string());
  const Dataset back = load_dataset(p.string());
  CHECK(back.features == data.features);
  CHECK(back.labels == data.labels);
  CHECK(back.l2_radius == data.l2_radius);
  CHECK(dataset_to_json(data).find("dpaudit-dataset/1") != std::string::npos);
  CHECK_THROWS(dataset_from_json("{\"schema\":\"other/9\"}"));
}
