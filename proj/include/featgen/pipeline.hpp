#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "featgen/classifier.hpp"
#include "featgen/dataset.hpp"
#include "featgen/generators.hpp"

namespace featgen {

// Test-pool / label-space combinations of the generalized protocol:
//   u2u: unseen pool, unseen labels      s2s: seen pool, seen labels
//   u2a: unseen pool, all labels         s2a: seen pool, all labels
struct EvalReport {
  // Plain fraction of correctly labeled test images per scenario.
  std::map<std::string, double> scenario_accuracy;
  // Mean over per-class accuracies, same keys.
  std::map<std::string, double> per_class_accuracy;
  // K -> percentage of test images with the true label in the top K,
  // computed on the unseen test pool against the report's label space.
  std::map<int, double> flat_hit;
  std::uint64_t seed = 0;
  std::string config_digest;

  std::string to_json() const;
};

struct CvCandidate {
  GeneratorConfig config;
  double validation_accuracy = 0.0;
  std::vector<int> classes_used;  // training instrumentation
};

struct CvResult {
  std::vector<CvCandidate> candidates;
  std::size_t selected = 0;
  std::vector<int> pseudo_seen;
  std::vector<int> pseudo_unseen;

  const GeneratorConfig& selected_config() const {
    return candidates[selected].config;
  }
  std::string to_json() const;
};

struct ComparisonRow {
  GeneratorKind kind = GeneratorKind::kGmmn;
  std::vector<double> accuracies;  // one per dataset, u2u
  double average = 0.0;
};

struct ComparisonTable {
  std::vector<std::string> dataset_names;
  std::vector<ComparisonRow> rows;

  std::string to_json() const;
  std::string to_text() const;  // aligned rendering
};

// Evaluation of an already-trained generator (the CLI eval path). The
// digest argument is recorded in the report verbatim.
EvalReport evaluate_zsc(const Dataset& data, const GeneratorModel& model,
                        const ClassifierConfig& clf_cfg, std::size_t per_class,
                        Rng& rng, const std::string& digest = "");
EvalReport evaluate_gzsc(const Dataset& data, const GeneratorModel& model,
                         const ClassifierConfig& clf_cfg,
                         std::size_t per_class, Rng& rng,
                         bool generate_for_seen = false,
                         const std::string& digest = "");

// Classical zero-shot protocol: generator trained on seen classes,
// per_class features generated for each unseen class, classifier over the
// unseen label space only. Report carries u2u.
EvalReport run_zsc(const Dataset& data, const GeneratorConfig& cfg,
                   const ClassifierConfig& clf_cfg, std::size_t per_class,
                   Rng& rng);

// Generalized protocol: one classifier over the full label space trained on
// real seen features plus generated unseen features; u2u and s2s obtained
// by masking the same score matrix, so u2a <= u2u and s2a <= s2s exactly.
// With generate_for_seen, seen classes also get per_class generated rows.
EvalReport run_gzsc(const Dataset& data, const GeneratorConfig& cfg,
                    const ClassifierConfig& clf_cfg, std::size_t per_class,
                    Rng& rng, bool generate_for_seen = false);

// For each K: percentage of rows whose true label is in the top K.
std::map<int, double> flat_hit_at_k(const SoftmaxClassifier& clf,
                                    const Matrix& features,
                                    const std::vector<int>& labels,
                                    const std::vector<int>& ks);

// Holds out a fraction of the seen classes as pseudo-unseen (split by
// class, not by image), runs the zero-shot pipeline per candidate on the
// pseudo split, and selects the best validation accuracy.
CvResult zsc_cross_validate(const Dataset& data,
                            const std::vector<GeneratorConfig>& candidates,
                            const ClassifierConfig& clf_cfg,
                            std::size_t per_class, double holdout_fraction,
                            Rng& rng);

// u2u accuracy for each of the four generator kinds on each dataset.
ComparisonTable compare_generators(
    const std::vector<std::pair<std::string, const Dataset*>>& datasets,
    const std::map<GeneratorKind, GeneratorConfig>& cfgs,
    const ClassifierConfig& clf_cfg, std::size_t per_class, Rng& rng);

// Control method: ridge regression from seen train features to their class
// attributes; a test image takes the label of the nearest attribute vector
// in label_space. Deterministic, consumes no rng. Test pool: test images of
// the classes in test_pool (default: the unseen classes).
EvalReport baseline_nearest_attribute(const Dataset& data,
                                      const std::vector<int>& label_space,
                                      const std::vector<int>& test_pool = {});

// Drops every image whose class is outside seen+unseen and re-partitions;
// used to build pseudo-splits for cross-validation.
Dataset restrict_to_classes(const Dataset& data, const std::vector<int>& seen,
                            const std::vector<int>& unseen);

// FNV-1a over the config JSON; pinned into reports for provenance.
std::string config_digest(const GeneratorConfig& cfg);

}  // namespace featgen
