#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "featgen/dataset.hpp"
#include "testutil.hpp"

using featgen::Dataset;
using featgen::Matrix;
using featgen::Rng;
using featgen::SyntheticSpec;

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("average_image_attributes") {
  SUBCASE("one image per class copies rows") {
    Matrix attrs(2, 2, {0.1, 0.9, 0.4, 0.6});
    Matrix out = featgen::average_image_attributes(attrs, {0, 1}, 2);
    for (std::size_t i = 0; i < attrs.size(); ++i)
      CHECK(out.raw()[i] == attrs.raw()[i]);
  }
  SUBCASE("hand mean") {
    Matrix attrs(2, 2, {0, 1, 1, 1});
    Matrix out = featgen::average_image_attributes(attrs, {0, 0}, 1);
    CHECK(out(0, 0) == 0.5);
    CHECK(out(0, 1) == 1.0);
  }
  SUBCASE("binary inputs stay in [0,1]") {
    Rng rng(1);
    Matrix attrs(20, 3);
    std::vector<int> labels;
    for (std::size_t i = 0; i < 20; ++i) {
      labels.push_back(static_cast<int>(i % 4));
      for (std::size_t j = 0; j < 3; ++j)
        attrs(i, j) = rng.next_double() < 0.5 ? 0.0 : 1.0;
    }
    Matrix out = featgen::average_image_attributes(attrs, labels, 4);
    for (double v : out.raw()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  SUBCASE("empty class names the class") {
    Matrix attrs(1, 2, {0.0, 1.0});
    CHECK_THROWS_WITH_AS(featgen::average_image_attributes(attrs, {0}, 2),
                         doctest::Contains("1"), std::invalid_argument);
  }
}

TEST_CASE("fit/apply scaling") {
  SUBCASE("affine map of a column") {
    Matrix col(3, 1, {2.0, 4.0, 6.0});
    auto params = featgen::fit_scaling(col);
    Matrix scaled = featgen::apply_scaling(params, col);
    CHECK(scaled(0, 0) == 0.0);
    CHECK(scaled(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(scaled(2, 0) == 1.0);
  }
  SUBCASE("constant columns map to 0") {
    Matrix col(3, 1, {5.0, 5.0, 5.0});
    Matrix scaled = featgen::apply_scaling(featgen::fit_scaling(col), col);
    for (double v : scaled.raw()) CHECK(v == 0.0);
  }
  SUBCASE("out-of-range values are clamped to [0,1]") {
    Matrix train(2, 1, {0.0, 10.0});
    Matrix test(2, 1, {-5.0, 20.0});
    Matrix scaled =
        featgen::apply_scaling(featgen::fit_scaling(train), test);
    CHECK(scaled(0, 0) == 0.0);
    CHECK(scaled(1, 0) == 1.0);
  }
  SUBCASE("fitting set stays in [0,1] and rescaling is idempotent") {
    Rng rng(2);
    Matrix m = testutil::random_matrix(10, 4, rng, -3.0, 7.0);
    Matrix scaled = featgen::apply_scaling(featgen::fit_scaling(m), m);
    for (double v : scaled.raw()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    Matrix again =
        featgen::apply_scaling(featgen::fit_scaling(scaled), scaled);
    for (std::size_t i = 0; i < scaled.size(); ++i)
      CHECK(again.raw()[i] == doctest::Approx(scaled.raw()[i]).epsilon(1e-12));
  }
}

TEST_CASE("make_synthetic basics") {
  SyntheticSpec spec;
  spec.num_classes = 6;
  spec.seen_count = 4;
  spec.attr_dim = 3;
  spec.feature_dim = 5;
  spec.examples_per_class_train = 8;
  spec.examples_per_class_test = 4;
  spec.seed = 9;

  SUBCASE("determinism") {
    auto [a, oa] = featgen::make_synthetic(spec);
    auto [b, ob] = featgen::make_synthetic(spec);
    CHECK(a.features.raw() == b.features.raw());
    CHECK(a.labels == b.labels);
    CHECK(oa.map_weights.raw() == ob.map_weights.raw());
  }
  SUBCASE("validates and balances labels") {
    auto [data, oracle] = featgen::make_synthetic(spec);
    data.validate();
    std::vector<int> counts(spec.num_classes, 0);
    for (int l : data.labels) counts[static_cast<std::size_t>(l)]++;
    for (int c : counts)
      CHECK(c == static_cast<int>(spec.examples_per_class_train +
                                  spec.examples_per_class_test));
    // Unseen classes contribute no train rows.
    for (auto idx : data.train_indices)
      CHECK(data.is_seen(data.labels[idx]));
  }
  SUBCASE("noiseless linear map makes class images identical") {
    SyntheticSpec clean = spec;
    clean.nonlinearity = featgen::SyntheticMap::kLinear;
    clean.noise_stddev = 0.0;
    auto [data, oracle] = featgen::make_synthetic(clean);
    Matrix rows = data.train_features_of_class(0);
    for (std::size_t r = 1; r < rows.rows(); ++r)
      for (std::size_t c = 0; c < rows.cols(); ++c)
        CHECK(rows(r, c) == rows(0, c));
  }
  SUBCASE("spec invariants enforced") {
    SyntheticSpec bad = spec;
    bad.seen_count = bad.num_classes;
    CHECK_THROWS_AS(featgen::make_synthetic(bad), std::invalid_argument);
  }
}

TEST_CASE("matrix and label files round-trip") {
  auto dir = temp_dir("fgz_fmt_test");
  Rng rng(3);
  Matrix m = testutil::random_matrix(7, 5, rng);
  const auto mpath = (dir / "m.fgz").string();
  featgen::save_matrix(mpath, m);
  Matrix loaded = featgen::load_matrix(mpath);
  CHECK(loaded.raw() == m.raw());

  std::vector<int> labels{0, 3, 1, 2, 2};
  const auto lpath = (dir / "l.fgzl").string();
  featgen::save_labels(lpath, labels);
  CHECK(featgen::load_labels(lpath) == labels);

  SUBCASE("truncated matrix file names the byte offset") {
    fs::resize_file(mpath, fs::file_size(mpath) - 13);
    CHECK_THROWS_WITH_AS(featgen::load_matrix(mpath),
                         doctest::Contains("byte"), std::runtime_error);
  }
  fs::remove_all(dir);
}

TEST_CASE("dataset round-trip and manifest validation") {
  auto dir = temp_dir("fgz_ds_test");
  SyntheticSpec spec;
  spec.num_classes = 5;
  spec.seen_count = 3;
  spec.attr_dim = 3;
  spec.feature_dim = 4;
  spec.examples_per_class_train = 6;
  spec.examples_per_class_test = 3;
  auto [data, oracle] = featgen::make_synthetic(spec);
  featgen::save_dataset(dir.string(), "manifest.json", data);
  Dataset loaded = featgen::load_dataset((dir / "manifest.json").string());
  CHECK(loaded.features.raw() == data.features.raw());
  CHECK(loaded.labels == data.labels);
  CHECK(loaded.seen_classes == data.seen_classes);
  CHECK(loaded.train_indices == data.train_indices);

  SUBCASE("overlapping seen/unseen rejected") {
    Dataset bad = data;
    bad.unseen_classes.push_back(bad.seen_classes.front());
    CHECK_THROWS_WITH_AS(bad.validate(),
                         doctest::Contains("both seen and unseen"),
                         std::runtime_error);
  }
  SUBCASE("out-of-range label rejected") {
    Dataset bad = data;
    bad.labels.front() = 99;
    CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  }
  SUBCASE("unseen train images rejected") {
    Dataset bad = data;
    // Move a test row of an unseen class into the train partition.
    for (std::size_t i = 0; i < bad.test_indices.size(); ++i) {
      if (!bad.is_seen(bad.labels[bad.test_indices[i]])) {
        bad.train_indices.push_back(bad.test_indices[i]);
        bad.test_indices.erase(bad.test_indices.begin() +
                               static_cast<std::ptrdiff_t>(i));
        break;
      }
    }
    CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  }
  fs::remove_all(dir);
}
