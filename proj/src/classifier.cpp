#include "featgen/classifier.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

namespace featgen {

namespace {

Mlp as_mlp(const SoftmaxClassifier& clf) {
  Mlp net;
  LayerSpec s;
  s.input_dim = clf.feature_dim();
  s.output_dim = clf.num_classes();
  s.activation = Activation::kLinear;
  net.specs.push_back(s);
  net.weights.push_back(clf.weights);
  net.biases.push_back(clf.biases);
  return net;
}

}  // namespace

SoftmaxClassifier train_classifier(const Matrix& features,
                                   const std::vector<int>& labels,
                                   const std::vector<int>& class_ids,
                                   const ClassifierConfig& cfg, Rng& rng) {
  if (labels.size() != features.rows()) {
    throw std::invalid_argument("train_classifier: label count " +
                                std::to_string(labels.size()) + " vs " +
                                std::to_string(features.rows()) + " rows");
  }
  std::map<int, int> index;
  for (std::size_t k = 0; k < class_ids.size(); ++k) {
    if (!index.emplace(class_ids[k], static_cast<int>(k)).second) {
      throw std::invalid_argument("train_classifier: duplicate class id " +
                                  std::to_string(class_ids[k]));
    }
  }
  std::vector<int> mapped(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = index.find(labels[i]);
    if (it == index.end()) {
      throw std::invalid_argument("train_classifier: label " +
                                  std::to_string(labels[i]) +
                                  " is not in class_ids");
    }
    mapped[i] = it->second;
  }
  if (!all_finite(features)) {
    throw std::invalid_argument("train_classifier: non-finite features");
  }

  SoftmaxClassifier clf;
  clf.class_ids = class_ids;
  clf.weights = Matrix(class_ids.size(), features.cols());
  clf.biases.assign(class_ids.size(), 0.0);

  Mlp net = as_mlp(clf);
  AdamState adam = make_adam_state(net, cfg.learning_rate);
  Rng shuffle_rng = rng.child(0x5f1);
  Rng fwd_rng = rng.child(0x5f2);

  std::vector<std::uint32_t> order(features.rows());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - off);
      Matrix x(n, features.cols());
      std::vector<int> y(n);
      for (std::size_t r = 0; r < n; ++r) {
        const std::uint32_t src = order[off + r];
        std::copy(features.row_ptr(src), features.row_ptr(src) + features.cols(),
                  x.row_ptr(r));
        y[r] = mapped[src];
      }
      ForwardTape tape;
      const Matrix logits = forward(net, x, Mode::kTrain, fwd_rng, &tape);
      auto [loss, grad] = softmax_cross_entropy(logits, y);
      (void)loss;
      adam_step(net, backward(net, tape, grad), adam);
    }
  }
  clf.weights = net.weights[0];
  clf.biases = net.biases[0];
  return clf;
}

Matrix predict_scores(const SoftmaxClassifier& clf, const Matrix& features) {
  if (features.cols() != clf.feature_dim()) {
    throw std::invalid_argument("predict_scores: features " +
                                features.shape_str() + " vs weights " +
                                clf.weights.shape_str());
  }
  Matrix logits = matmul(features, transpose(clf.weights));
  for (std::size_t r = 0; r < logits.rows(); ++r)
    for (std::size_t c = 0; c < logits.cols(); ++c)
      logits(r, c) += clf.biases[c];
  return softmax_rows(logits);
}

std::vector<std::vector<int>> topk_from_scores(
    const Matrix& scores, const std::vector<int>& class_ids, std::size_t k) {
  if (k < 1 || k > class_ids.size()) {
    throw std::invalid_argument("topk: k = " + std::to_string(k) +
                                " outside [1, " +
                                std::to_string(class_ids.size()) + "]");
  }
  std::vector<std::vector<int>> out(scores.rows());
  std::vector<std::size_t> cols(class_ids.size());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    std::iota(cols.begin(), cols.end(), 0);
    std::stable_sort(cols.begin(), cols.end(),
                     [&](std::size_t a, std::size_t b) {
                       if (scores(r, a) != scores(r, b))
                         return scores(r, a) > scores(r, b);
                       return class_ids[a] < class_ids[b];
                     });
    out[r].reserve(k);
    for (std::size_t j = 0; j < k; ++j) out[r].push_back(class_ids[cols[j]]);
  }
  return out;
}

std::vector<std::vector<int>> predict_topk(const SoftmaxClassifier& clf,
                                           const Matrix& features,
                                           std::size_t k) {
  return topk_from_scores(predict_scores(clf, features), clf.class_ids, k);
}

void save_classifier(const std::string& path, const SoftmaxClassifier& clf) {
  save_mlp(path, as_mlp(clf));
  nlohmann::ordered_json side;
  side["model_kind"] = "softmax_classifier";
  side["class_ids"] = clf.class_ids;
  std::ofstream os(path + ".json", std::ios::trunc);
  if (!os) throw std::runtime_error("save_classifier: cannot write sidecar");
  os << side.dump(2) << "\n";
}

SoftmaxClassifier load_classifier(const std::string& path) {
  std::ifstream is(path + ".json");
  if (!is) {
    throw std::runtime_error("load_classifier: missing sidecar " + path +
                             ".json");
  }
  nlohmann::json side;
  is >> side;
  if (side.at("model_kind") != "softmax_classifier") {
    throw std::runtime_error("load_classifier: sidecar kind is not "
                             "softmax_classifier");
  }
  const Mlp net = load_mlp(path);
  if (net.specs.size() != 1 ||
      net.specs[0].activation != Activation::kLinear) {
    throw std::runtime_error("load_classifier: model is not a linear head");
  }
  SoftmaxClassifier clf;
  clf.class_ids = side.at("class_ids").get<std::vector<int>>();
  clf.weights = net.weights[0];
  clf.biases = net.biases[0];
  if (clf.class_ids.size() != clf.weights.rows()) {
    throw std::runtime_error(
        "load_classifier: class_ids length does not match weight rows");
  }
  return clf;
}

}  // namespace featgen
