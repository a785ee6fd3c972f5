#include "featgen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace featgen {

namespace {

struct AccuracyPair {
  double per_image = 0.0;
  double per_class = 0.0;
};

AccuracyPair accuracy_from_top1(const std::vector<std::vector<int>>& top1,
                                const std::vector<int>& labels) {
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // hit, total
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [hit, total] = per_class[labels[i]];
    total += 1;
    if (top1[i][0] == labels[i]) {
      hit += 1;
      hits += 1;
    }
  }
  AccuracyPair out;
  out.per_image = labels.empty()
                      ? 0.0
                      : static_cast<double>(hits) /
                            static_cast<double>(labels.size());
  double sum = 0.0;
  for (const auto& [cls, counts] : per_class)
    sum += static_cast<double>(counts.first) /
           static_cast<double>(counts.second);
  out.per_class = per_class.empty() ? 0.0 : sum / per_class.size();
  return out;
}

// Columns of `scores` restricted to a subset of class ids.
std::pair<Matrix, std::vector<int>> mask_columns(
    const Matrix& scores, const std::vector<int>& class_ids,
    const std::vector<int>& keep) {
  std::vector<std::size_t> cols;
  std::vector<int> kept_ids;
  std::set<int> want(keep.begin(), keep.end());
  for (std::size_t c = 0; c < class_ids.size(); ++c) {
    if (want.count(class_ids[c])) {
      cols.push_back(c);
      kept_ids.push_back(class_ids[c]);
    }
  }
  Matrix out(scores.rows(), cols.size());
  for (std::size_t r = 0; r < scores.rows(); ++r)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(r, j) = scores(r, cols[j]);
  return {std::move(out), std::move(kept_ids)};
}

std::vector<int> default_flat_hit_ks(std::size_t num_classes) {
  std::vector<int> ks;
  for (int k : {1, 2, 5, 10})
    if (static_cast<std::size_t>(k) <= num_classes) ks.push_back(k);
  return ks;
}

std::map<int, double> flat_hit_from_scores(const Matrix& scores,
                                           const std::vector<int>& class_ids,
                                           const std::vector<int>& labels,
                                           const std::vector<int>& ks) {
  if (labels.empty()) {
    throw std::invalid_argument("flat_hit_at_k: empty test set");
  }
  for (int k : ks) {
    if (k < 1 || static_cast<std::size_t>(k) > class_ids.size()) {
      throw std::invalid_argument("flat_hit_at_k: K = " + std::to_string(k) +
                                  " outside [1, " +
                                  std::to_string(class_ids.size()) + "]");
    }
  }
  const auto full = topk_from_scores(scores, class_ids, class_ids.size());
  std::map<int, double> out;
  for (int k : ks) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto& row = full[i];
      if (std::find(row.begin(), row.begin() + k, labels[i]) !=
          row.begin() + k)
        hits += 1;
    }
    out[k] = 100.0 * static_cast<double>(hits) /
             static_cast<double>(labels.size());
  }
  return out;
}

std::vector<int> all_class_ids(const Dataset& data) {
  std::vector<int> ids = data.seen_classes;
  ids.insert(ids.end(), data.unseen_classes.begin(),
             data.unseen_classes.end());
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Generated rows come back labeled by attribute-row index; remap to ids.
void remap_labels(std::vector<int>& labels, const std::vector<int>& ids) {
  for (int& y : labels) y = ids[static_cast<std::size_t>(y)];
}

}  // namespace

EvalReport evaluate_zsc(const Dataset& data, const GeneratorModel& model,
                        const ClassifierConfig& clf_cfg, std::size_t per_class,
                        Rng& rng, const std::string& digest) {
  data.validate();
  if (per_class < 1) {
    throw std::invalid_argument("evaluate_zsc: per_class must be >= 1");
  }
  if (data.unseen_classes.empty()) {
    throw std::invalid_argument("evaluate_zsc: no unseen classes");
  }
  Rng gen_rng = rng.child(12);
  Rng clf_rng = rng.child(13);

  auto [fake, fake_labels] =
      generate(model, data.attributes_of(data.unseen_classes), per_class,
               gen_rng);
  remap_labels(fake_labels, data.unseen_classes);

  const SoftmaxClassifier clf = train_classifier(
      fake, fake_labels, data.unseen_classes, clf_cfg, clf_rng);

  auto [test_x, test_y] = data.test_set(data.unseen_classes);
  if (test_y.empty()) {
    throw std::invalid_argument("evaluate_zsc: no unseen-class test images");
  }
  const Matrix scores = predict_scores(clf, test_x);
  const auto top1 = topk_from_scores(scores, clf.class_ids, 1);
  const AccuracyPair acc = accuracy_from_top1(top1, test_y);

  EvalReport out;
  out.scenario_accuracy["u2u"] = acc.per_image;
  out.per_class_accuracy["u2u"] = acc.per_class;
  out.flat_hit = flat_hit_from_scores(scores, clf.class_ids, test_y,
                                      default_flat_hit_ks(clf.num_classes()));
  out.seed = rng.seed();
  out.config_digest = digest;
  return out;
}

namespace {

EvalReport run_zsc_impl(const Dataset& data, const GeneratorConfig& cfg,
                        const ClassifierConfig& clf_cfg, std::size_t per_class,
                        Rng& rng, TrainReport* train_report) {
  data.validate();
  if (data.unseen_classes.empty()) {
    throw std::invalid_argument("run_zsc: no unseen classes");
  }
  if (per_class < 1) {
    throw std::invalid_argument("run_zsc: per_class must be >= 1");
  }
  Rng train_rng = rng.child(11);
  auto [model, report] = train_generator(data, cfg, train_rng);
  if (train_report) *train_report = report;
  return evaluate_zsc(data, model, clf_cfg, per_class, rng,
                      config_digest(cfg));
}

}  // namespace

std::string config_digest(const GeneratorConfig& cfg) {
  const std::string text = generator_config_to_json(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

EvalReport run_zsc(const Dataset& data, const GeneratorConfig& cfg,
                   const ClassifierConfig& clf_cfg, std::size_t per_class,
                   Rng& rng) {
  return run_zsc_impl(data, cfg, clf_cfg, per_class, rng, nullptr);
}

EvalReport evaluate_gzsc(const Dataset& data, const GeneratorModel& model,
                         const ClassifierConfig& clf_cfg,
                         std::size_t per_class, Rng& rng,
                         bool generate_for_seen, const std::string& digest) {
  data.validate();
  if (per_class < 1) {
    throw std::invalid_argument("evaluate_gzsc: per_class must be >= 1");
  }
  if (data.unseen_classes.empty()) {
    throw std::invalid_argument("evaluate_gzsc: no unseen classes");
  }
  Rng gen_rng = rng.child(12);
  Rng clf_rng = rng.child(13);

  auto [fake, fake_labels] =
      generate(model, data.attributes_of(data.unseen_classes), per_class,
               gen_rng);
  remap_labels(fake_labels, data.unseen_classes);

  auto [train_x, train_y] = data.train_set(data.seen_classes);
  Matrix clf_x = vcat(train_x, fake);
  std::vector<int> clf_y = train_y;
  clf_y.insert(clf_y.end(), fake_labels.begin(), fake_labels.end());

  if (generate_for_seen) {
    auto [fake_s, fake_s_labels] =
        generate(model, data.attributes_of(data.seen_classes), per_class,
                 gen_rng);
    remap_labels(fake_s_labels, data.seen_classes);
    clf_x = vcat(clf_x, fake_s);
    clf_y.insert(clf_y.end(), fake_s_labels.begin(), fake_s_labels.end());
  }

  const std::vector<int> ids = all_class_ids(data);
  const SoftmaxClassifier clf =
      train_classifier(clf_x, clf_y, ids, clf_cfg, clf_rng);

  auto [unseen_x, unseen_y] = data.test_set(data.unseen_classes);
  auto [seen_x, seen_y] = data.test_set(data.seen_classes);
  if (unseen_y.empty() || seen_y.empty()) {
    throw std::invalid_argument(
        "run_gzsc: both pools need test images (unseen: " +
        std::to_string(unseen_y.size()) +
        ", seen: " + std::to_string(seen_y.size()) + ")");
  }

  const Matrix unseen_scores = predict_scores(clf, unseen_x);
  const Matrix seen_scores = predict_scores(clf, seen_x);

  EvalReport out;
  auto record = [&](const std::string& tag, const Matrix& scores,
                    const std::vector<int>& score_ids,
                    const std::vector<int>& labels) {
    const auto top1 = topk_from_scores(scores, score_ids, 1);
    const AccuracyPair acc = accuracy_from_top1(top1, labels);
    out.scenario_accuracy[tag] = acc.per_image;
    out.per_class_accuracy[tag] = acc.per_class;
  };
  record("u2a", unseen_scores, ids, unseen_y);
  record("s2a", seen_scores, ids, seen_y);
  // Same score matrices with the label space restricted: the indicator can
  // only improve, so u2a <= u2u and s2a <= s2s hold exactly.
  auto [uu_scores, uu_ids] =
      mask_columns(unseen_scores, ids, data.unseen_classes);
  record("u2u", uu_scores, uu_ids, unseen_y);
  auto [ss_scores, ss_ids] = mask_columns(seen_scores, ids, data.seen_classes);
  record("s2s", ss_scores, ss_ids, seen_y);

  out.flat_hit = flat_hit_from_scores(unseen_scores, ids, unseen_y,
                                      default_flat_hit_ks(ids.size()));
  out.seed = rng.seed();
  out.config_digest = digest;
  return out;
}

EvalReport run_gzsc(const Dataset& data, const GeneratorConfig& cfg,
                    const ClassifierConfig& clf_cfg, std::size_t per_class,
                    Rng& rng, bool generate_for_seen) {
  data.validate();
  if (data.unseen_classes.empty()) {
    throw std::invalid_argument("run_gzsc: no unseen classes");
  }
  if (per_class < 1) {
    throw std::invalid_argument("run_gzsc: per_class must be >= 1");
  }
  Rng train_rng = rng.child(11);
  auto [model, report] = train_generator(data, cfg, train_rng);
  (void)report;
  return evaluate_gzsc(data, model, clf_cfg, per_class, rng,
                       generate_for_seen, config_digest(cfg));
}

std::map<int, double> flat_hit_at_k(const SoftmaxClassifier& clf,
                                    const Matrix& features,
                                    const std::vector<int>& labels,
                                    const std::vector<int>& ks) {
  return flat_hit_from_scores(predict_scores(clf, features), clf.class_ids,
                              labels, ks);
}

Dataset restrict_to_classes(const Dataset& data, const std::vector<int>& seen,
                            const std::vector<int>& unseen) {
  std::set<int> seen_set(seen.begin(), seen.end());
  std::set<int> keep(seen.begin(), seen.end());
  keep.insert(unseen.begin(), unseen.end());

  Dataset out;
  out.class_attributes = data.class_attributes;
  out.class_names = data.class_names;
  out.seen_classes = seen;
  out.unseen_classes = unseen;
  std::sort(out.seen_classes.begin(), out.seen_classes.end());
  std::sort(out.unseen_classes.begin(), out.unseen_classes.end());

  std::vector<std::uint32_t> rows;
  std::set<std::uint32_t> train(data.train_indices.begin(),
                                data.train_indices.end());
  std::set<std::uint32_t> test(data.test_indices.begin(),
                               data.test_indices.end());
  for (std::uint32_t i = 0; i < data.features.rows(); ++i) {
    if (keep.count(data.labels[i])) rows.push_back(i);
  }
  out.features = gather_rows(data.features, rows);
  out.labels.reserve(rows.size());
  for (std::uint32_t i = 0; i < rows.size(); ++i) {
    const std::uint32_t src = rows[i];
    out.labels.push_back(data.labels[src]);
    // Train images of now-unseen classes fall out of both partitions.
    if (train.count(src) && seen_set.count(data.labels[src])) {
      out.train_indices.push_back(i);
    } else if (test.count(src)) {
      out.test_indices.push_back(i);
    }
  }
  out.validate();
  return out;
}

CvResult zsc_cross_validate(const Dataset& data,
                            const std::vector<GeneratorConfig>& candidates,
                            const ClassifierConfig& clf_cfg,
                            std::size_t per_class, double holdout_fraction,
                            Rng& rng) {
  if (candidates.empty()) {
    throw std::invalid_argument("zsc_cross_validate: no candidates");
  }
  if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
    throw std::invalid_argument(
        "zsc_cross_validate: holdout_fraction outside (0,1)");
  }
  const std::size_t s = data.seen_classes.size();
  const auto holdout = static_cast<std::size_t>(std::max(
      1.0, std::round(holdout_fraction * static_cast<double>(s))));
  if (s < holdout + 2) {
    throw std::invalid_argument(
        "zsc_cross_validate: too few seen classes (" + std::to_string(s) +
        ") for a holdout of " + std::to_string(holdout) +
        " with at least 2 remaining");
  }
  std::vector<int> order = data.seen_classes;
  Rng split_rng = rng.child(21);
  split_rng.shuffle(order);

  CvResult result;
  result.pseudo_unseen.assign(order.begin(), order.begin() + holdout);
  result.pseudo_seen.assign(order.begin() + holdout, order.end());
  std::sort(result.pseudo_unseen.begin(), result.pseudo_unseen.end());
  std::sort(result.pseudo_seen.begin(), result.pseudo_seen.end());

  const Dataset pseudo =
      restrict_to_classes(data, result.pseudo_seen, result.pseudo_unseen);

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Rng run_rng = rng.child(100 + i);
    TrainReport train_report;
    const EvalReport report = run_zsc_impl(pseudo, candidates[i], clf_cfg,
                                           per_class, run_rng, &train_report);
    CvCandidate c;
    c.config = candidates[i];
    c.validation_accuracy = report.scenario_accuracy.at("u2u");
    c.classes_used = train_report.classes_used;
    result.candidates.push_back(std::move(c));
  }
  result.selected = 0;
  for (std::size_t i = 1; i < result.candidates.size(); ++i) {
    if (result.candidates[i].validation_accuracy >
        result.candidates[result.selected].validation_accuracy)
      result.selected = i;
  }
  return result;
}

ComparisonTable compare_generators(
    const std::vector<std::pair<std::string, const Dataset*>>& datasets,
    const std::map<GeneratorKind, GeneratorConfig>& cfgs,
    const ClassifierConfig& clf_cfg, std::size_t per_class, Rng& rng) {
  static const GeneratorKind kKinds[] = {
      GeneratorKind::kGmmn, GeneratorKind::kAcgan,
      GeneratorKind::kDenoisingAe, GeneratorKind::kAdversarialAe};
  for (GeneratorKind k : kKinds) {
    if (!cfgs.count(k)) {
      throw std::invalid_argument("compare_generators: missing config for " +
                                  to_string(k));
    }
  }
  if (datasets.empty()) {
    throw std::invalid_argument("compare_generators: no datasets");
  }
  ComparisonTable table;
  for (const auto& [name, ds] : datasets) table.dataset_names.push_back(name);
  std::size_t kind_index = 0;
  for (GeneratorKind k : kKinds) {
    ComparisonRow row;
    row.kind = k;
    double sum = 0.0;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      Rng run_rng = rng.child(1000 * (kind_index + 1) + d);
      const EvalReport report =
          run_zsc(*datasets[d].second, cfgs.at(k), clf_cfg, per_class,
                  run_rng);
      row.accuracies.push_back(report.scenario_accuracy.at("u2u"));
      sum += row.accuracies.back();
    }
    row.average = sum / static_cast<double>(datasets.size());
    table.rows.push_back(std::move(row));
    kind_index += 1;
  }
  return table;
}

EvalReport baseline_nearest_attribute(const Dataset& data,
                                      const std::vector<int>& label_space,
                                      const std::vector<int>& test_pool) {
  data.validate();
  if (label_space.empty()) {
    throw std::invalid_argument("baseline_nearest_attribute: empty label space");
  }
  const std::vector<int> pool =
      test_pool.empty() ? data.unseen_classes : test_pool;

  // Ridge fit from seen train features to their class attribute vectors.
  auto [x, y] = data.train_set(data.seen_classes);
  Matrix a(x.rows(), data.attr_dim());
  for (std::size_t r = 0; r < x.rows(); ++r)
    std::copy(data.class_attributes.row_ptr(y[r]),
              data.class_attributes.row_ptr(y[r]) + data.attr_dim(),
              a.row_ptr(r));
  const double lambda = 1e-3 * static_cast<double>(data.feature_dim());
  const Matrix xt = transpose(x);
  const Matrix w = cholesky_solve(matmul(xt, x), matmul(xt, a), lambda);

  auto [test_x, test_y] = data.test_set(pool);
  if (test_y.empty()) {
    throw std::invalid_argument("baseline_nearest_attribute: empty test pool");
  }
  const Matrix mapped = matmul(test_x, w);
  const Matrix candidates = data.attributes_of(label_space);

  std::vector<std::vector<int>> top1(mapped.rows());
  for (std::size_t r = 0; r < mapped.rows(); ++r) {
    std::size_t best = 0;
    double best_d = row_sqdist(mapped, r, candidates, 0);
    for (std::size_t c = 1; c < candidates.rows(); ++c) {
      const double d = row_sqdist(mapped, r, candidates, c);
      if (d < best_d ||
          (d == best_d && label_space[c] < label_space[best])) {
        best = c;
        best_d = d;
      }
    }
    top1[r] = {label_space[best]};
  }
  const AccuracyPair acc = accuracy_from_top1(top1, test_y);

  auto same = [](std::vector<int> a_, std::vector<int> b_) {
    std::sort(a_.begin(), a_.end());
    std::sort(b_.begin(), b_.end());
    return a_ == b_;
  };
  std::string tag = "custom";
  const std::vector<int> all = all_class_ids(data);
  const bool pool_unseen = same(pool, data.unseen_classes);
  const bool pool_seen = same(pool, data.seen_classes);
  if (pool_unseen && same(label_space, data.unseen_classes)) tag = "u2u";
  else if (pool_unseen && same(label_space, all)) tag = "u2a";
  else if (pool_seen && same(label_space, data.seen_classes)) tag = "s2s";
  else if (pool_seen && same(label_space, all)) tag = "s2a";

  EvalReport out;
  out.scenario_accuracy[tag] = acc.per_image;
  out.per_class_accuracy[tag] = acc.per_class;
  out.config_digest = "baseline_nearest_attribute";
  return out;
}

// ---------------------------------------------------------------------------
// JSON / text rendering
// ---------------------------------------------------------------------------

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["scenario_accuracy"] = scenario_accuracy;
  j["per_class_accuracy"] = per_class_accuracy;
  nlohmann::ordered_json fh = nlohmann::ordered_json::object();
  for (const auto& [k, v] : flat_hit) fh[std::to_string(k)] = v;
  j["flat_hit"] = fh;
  j["seed"] = seed;
  j["config_digest"] = config_digest;
  return j.dump(2);
}

std::string CvResult::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cands = nlohmann::ordered_json::array();
  for (const auto& c : candidates) {
    nlohmann::ordered_json e;
    e["config"] = nlohmann::ordered_json::parse(
        generator_config_to_json(c.config));
    e["validation_accuracy"] = c.validation_accuracy;
    e["classes_used"] = c.classes_used;
    cands.push_back(std::move(e));
  }
  j["candidates"] = cands;
  j["selected_index"] = selected;
  j["selected_config"] = nlohmann::ordered_json::parse(
      generator_config_to_json(selected_config()));
  j["selected_accuracy"] = candidates[selected].validation_accuracy;
  j["pseudo_seen"] = pseudo_seen;
  j["pseudo_unseen"] = pseudo_unseen;
  return j.dump(2);
}

std::string ComparisonTable::to_json() const {
  nlohmann::ordered_json j;
  j["datasets"] = dataset_names;
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json e;
    e["model"] = to_string(row.kind);
    e["u2u_accuracy"] = row.accuracies;
    e["average"] = row.average;
    rows_json.push_back(std::move(e));
  }
  j["rows"] = rows_json;
  return j.dump(2);
}

std::string ComparisonTable::to_text() const {
  std::ostringstream os;
  os << "model";
  for (const auto& name : dataset_names) os << "  " << name;
  os << "  avg\n";
  for (const auto& row : rows) {
    char buf[64];
    os << to_string(row.kind);
    for (double a : row.accuracies) {
      std::snprintf(buf, sizeof buf, "  %.4f", a);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "  %.4f", row.average);
    os << buf << "\n";
  }
  return os.str();
}

}  // namespace featgen
