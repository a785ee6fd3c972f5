#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "featgen/classifier.hpp"
#include "testutil.hpp"

using featgen::ClassifierConfig;
using featgen::Matrix;
using featgen::Rng;
using featgen::SoftmaxClassifier;

namespace {

// Two linearly separable 2-D blobs around (0,0) and (4,4).
std::pair<Matrix, std::vector<int>> blobs(Rng& rng, std::size_t per_class) {
  Matrix features(2 * per_class, 2);
  std::vector<int> labels;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const double center = i < per_class ? 0.0 : 4.0;
    features(i, 0) = center + rng.normal(0.0, 0.3);
    features(i, 1) = center + rng.normal(0.0, 0.3);
    labels.push_back(i < per_class ? 0 : 1);
  }
  return {features, labels};
}

double accuracy(const SoftmaxClassifier& clf, const Matrix& features,
                const std::vector<int>& labels) {
  auto top = featgen::predict_topk(clf, features, 1);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (top[i][0] == labels[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace

TEST_CASE("separable blobs reach training accuracy 1.0") {
  Rng rng(1);
  auto [features, labels] = blobs(rng, 40);
  ClassifierConfig cfg;
  cfg.epochs = 100;
  cfg.learning_rate = 5e-2;
  Rng train_rng(2);
  SoftmaxClassifier clf =
      featgen::train_classifier(features, labels, {0, 1}, cfg, train_rng);
  CHECK(accuracy(clf, features, labels) == 1.0);
}

TEST_CASE("epochs=0 predicts uniformly with loss ln C") {
  Rng rng(3);
  Matrix features = testutil::random_matrix(10, 4, rng);
  std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  ClassifierConfig cfg;
  cfg.epochs = 0;
  Rng train_rng(4);
  SoftmaxClassifier clf =
      featgen::train_classifier(features, labels, {0, 1, 2}, cfg, train_rng);
  Matrix scores = featgen::predict_scores(clf, features);
  for (double v : scores.raw())
    CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("training is deterministic given the seed") {
  Rng rng(5);
  auto [features, labels] = blobs(rng, 20);
  ClassifierConfig cfg;
  cfg.epochs = 10;
  Rng r1(6), r2(6);
  SoftmaxClassifier a =
      featgen::train_classifier(features, labels, {0, 1}, cfg, r1);
  SoftmaxClassifier b =
      featgen::train_classifier(features, labels, {0, 1}, cfg, r2);
  CHECK(a.weights.raw() == b.weights.raw());
  CHECK(a.biases == b.biases);
}

TEST_CASE("labels outside class_ids are rejected") {
  Matrix features(2, 2, {0.0, 1.0, 1.0, 0.0});
  ClassifierConfig cfg;
  Rng rng(7);
  CHECK_THROWS_AS(
      featgen::train_classifier(features, {0, 7}, {0, 1}, cfg, rng),
      std::invalid_argument);
}

TEST_CASE("predict_scores simplex and shift invariance") {
  SoftmaxClassifier clf;
  clf.class_ids = {3, 5, 9};
  clf.weights = Matrix(3, 2, 0.0);
  clf.biases = {0.0, 0.0, 0.0};
  Matrix features(4, 2, {1, 2, -1, 0, 3, 3, 0, 0});

  SUBCASE("zero parameters give uniform rows") {
    Matrix scores = featgen::predict_scores(clf, features);
    for (double v : scores.raw())
      CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("rows sum to one and shifting biases keeps the argmax") {
    Rng rng(8);
    clf.weights = testutil::random_matrix(3, 2, rng);
    clf.biases = {0.1, -0.4, 0.3};
    Matrix scores = featgen::predict_scores(clf, features);
    for (std::size_t r = 0; r < scores.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < scores.cols(); ++c) {
        CHECK(scores(r, c) >= 0.0);
        s += scores(r, c);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
    auto before = featgen::predict_topk(clf, features, 1);
    for (auto& b : clf.biases) b += 2.5;  // constant logit shift
    auto after = featgen::predict_topk(clf, features, 1);
    for (std::size_t r = 0; r < before.size(); ++r)
      CHECK(before[r][0] == after[r][0]);
  }
  SUBCASE("dimension mismatch rejected") {
    Matrix bad(1, 3, 0.0);
    CHECK_THROWS_AS(featgen::predict_scores(clf, bad),
                    std::invalid_argument);
  }
}

TEST_CASE("predict_topk ordering, ties, prefixes") {
  SoftmaxClassifier clf;
  clf.class_ids = {2, 4, 6, 8};
  clf.weights = Matrix(4, 1, {1.0, 3.0, 3.0, 2.0});
  clf.biases = {0.0, 0.0, 0.0, 0.0};
  Matrix one(1, 1, {1.0});

  SUBCASE("k = num_classes is a permutation") {
    auto full = featgen::predict_topk(clf, one, 4);
    std::vector<int> sorted = full[0];
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == clf.class_ids);
  }
  SUBCASE("k=1 equals argmax and exact ties break ascending") {
    auto top = featgen::predict_topk(clf, one, 2);
    CHECK(top[0][0] == 4);  // tie between class 4 and 6 -> lower id first
    CHECK(top[0][1] == 6);
  }
  SUBCASE("topk(k) is a prefix of topk(k+1)") {
    for (std::size_t k = 1; k < 4; ++k) {
      auto small = featgen::predict_topk(clf, one, k);
      auto big = featgen::predict_topk(clf, one, k + 1);
      for (std::size_t i = 0; i < k; ++i) CHECK(small[0][i] == big[0][i]);
    }
  }
  SUBCASE("k out of range rejected") {
    CHECK_THROWS_AS(featgen::predict_topk(clf, one, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(featgen::predict_topk(clf, one, 5),
                    std::invalid_argument);
  }
}

TEST_CASE("classifier serialization round-trips") {
  Rng rng(9);
  auto [features, labels] = blobs(rng, 10);
  ClassifierConfig cfg;
  cfg.epochs = 5;
  Rng train_rng(10);
  SoftmaxClassifier clf =
      featgen::train_classifier(features, labels, {0, 1}, cfg, train_rng);
  const auto path =
      (std::filesystem::temp_directory_path() / "fgz_clf_test.fgzm").string();
  featgen::save_classifier(path, clf);
  SoftmaxClassifier loaded = featgen::load_classifier(path);
  CHECK(loaded.weights.raw() == clf.weights.raw());
  CHECK(loaded.biases == clf.biases);
  CHECK(loaded.class_ids == clf.class_ids);
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
}
