#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "featgen/matrix.hpp"
#include "featgen/mlp.hpp"
#include "featgen/rng.hpp"

namespace featgen {

// Linear softmax classifier over an explicit, ordered class-id list.
struct SoftmaxClassifier {
  Matrix weights;               // num_classes x feature_dim
  std::vector<double> biases;   // num_classes
  std::vector<int> class_ids;   // column/row order of scores

  std::size_t num_classes() const { return class_ids.size(); }
  std::size_t feature_dim() const { return weights.cols(); }
};

struct ClassifierConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
};

// Cross-entropy minimized with Adam; initialization is all-zero so the
// untrained model predicts uniformly. Labels are dataset class ids and must
// all appear in class_ids.
SoftmaxClassifier train_classifier(const Matrix& features,
                                   const std::vector<int>& labels,
                                   const std::vector<int>& class_ids,
                                   const ClassifierConfig& cfg, Rng& rng);

// Class probabilities; rows sum to 1, columns follow class_ids order.
Matrix predict_scores(const SoftmaxClassifier& clf, const Matrix& features);

// Per-row class ids by descending probability; exact ties broken by
// ascending class id.
std::vector<std::vector<int>> predict_topk(const SoftmaxClassifier& clf,
                                           const Matrix& features,
                                           std::size_t k);

// Same ranking applied to a precomputed score matrix (columns = class_ids).
std::vector<std::vector<int>> topk_from_scores(const Matrix& scores,
                                               const std::vector<int>& class_ids,
                                               std::size_t k);

void save_classifier(const std::string& path, const SoftmaxClassifier& clf);
SoftmaxClassifier load_classifier(const std::string& path);

}  // namespace featgen
