#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "featgen/matrix.hpp"
#include "featgen/rng.hpp"

namespace featgen {

// Feature dataset with class-level attributes and a seen/unseen class split.
// Immutable after load; safe to share read-only across threads.
struct Dataset {
  Matrix features;                       // N x D, scaled to [0,1]
  std::vector<int> labels;               // length N, values in [0, C)
  Matrix class_attributes;               // C x A, scaled to [0,1]
  std::vector<std::string> class_names;  // length C
  std::vector<int> seen_classes;
  std::vector<int> unseen_classes;
  std::vector<std::uint32_t> train_indices;
  std::vector<std::uint32_t> test_indices;

  std::size_t num_classes() const { return class_attributes.rows(); }
  std::size_t feature_dim() const { return features.cols(); }
  std::size_t attr_dim() const { return class_attributes.cols(); }

  bool is_seen(int cls) const;

  // Throws on any invariant violation; called by every loader/builder.
  void validate() const;

  // Rows of the train partition belonging to class cls.
  Matrix train_features_of_class(int cls) const;
  // Train-partition rows restricted to classes in `classes` (all if empty).
  std::pair<Matrix, std::vector<int>> train_set(
      const std::vector<int>& classes = {}) const;
  // Test-partition rows restricted to classes in `classes` (all if empty).
  std::pair<Matrix, std::vector<int>> test_set(
      const std::vector<int>& classes = {}) const;
  // Attribute rows for the given classes, in order.
  Matrix attributes_of(const std::vector<int>& classes) const;
};

// Per-column affine [0,1] scaling fit on the training partition. Columns
// with max == min map to 0; out-of-range values are clamped on apply.
struct ScalingParams {
  std::vector<double> min;
  std::vector<double> max;
};

ScalingParams fit_scaling(const Matrix& train_features);
Matrix apply_scaling(const ScalingParams& params, const Matrix& m);

// Row c = mean of per-image attribute rows with label c.
Matrix average_image_attributes(const Matrix& per_image_attrs,
                                const std::vector<int>& labels,
                                std::size_t num_classes);

Matrix gather_rows(const Matrix& m, const std::vector<std::uint32_t>& idx);

// --------------------------------------------------------------------------
// synthetic benchmark
// --------------------------------------------------------------------------

enum class SyntheticMap { kLinear, kTanhMixed };

struct SyntheticSpec {
  std::size_t num_classes = 20;
  std::size_t seen_count = 15;
  std::size_t attr_dim = 8;
  std::size_t feature_dim = 32;
  std::size_t examples_per_class_train = 100;
  std::size_t examples_per_class_test = 50;
  SyntheticMap nonlinearity = SyntheticMap::kTanhMixed;
  double noise_stddev = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

// The fixed random attribute->feature map, returned so tests can build
// oracle classifiers against the ground truth.
struct SyntheticOracle {
  Matrix map_weights;            // feature_dim x attr_dim
  std::vector<double> map_bias;  // feature_dim
  SyntheticMap nonlinearity = SyntheticMap::kLinear;
  double noise_stddev = 0.0;
};

std::pair<Dataset, SyntheticOracle> make_synthetic(const SyntheticSpec& spec);

// --------------------------------------------------------------------------
// on-disk formats
// --------------------------------------------------------------------------

// FGZ1 matrix file: magic "FGZ1", u16 version=1, u8 dtype (1 = f64 LE),
// u8 reserved, u32 rows, u32 cols, rows*cols f64 LE row-major.
void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

// Labels file: magic "FGZL", u16 version=1, u32 count, count u32 LE labels.
void save_labels(const std::string& path, const std::vector<int>& labels);
std::vector<int> load_labels(const std::string& path);

// Writes features/labels/attributes as FGZ1/FGZL plus a JSON manifest.
void save_dataset(const std::string& dir, const std::string& manifest_name,
                  const Dataset& data);
Dataset load_dataset(const std::string& manifest_path);

}  // namespace featgen
