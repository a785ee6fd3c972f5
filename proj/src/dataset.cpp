#include "featgen/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

namespace featgen {

bool Dataset::is_seen(int cls) const {
  return std::find(seen_classes.begin(), seen_classes.end(), cls) !=
         seen_classes.end();
}

void Dataset::validate() const {
  const std::size_t n = features.rows();
  const std::size_t c = num_classes();
  if (labels.size() != n) {
    throw std::runtime_error("Dataset: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(n) + " rows");
  }
  if (class_names.size() != c) {
    throw std::runtime_error("Dataset: class_names length " +
                             std::to_string(class_names.size()) + " vs " +
                             std::to_string(c) + " attribute rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw std::runtime_error("Dataset: label " + std::to_string(y) +
                               " outside [0, " + std::to_string(c) + ")");
    }
  }
  std::set<int> seen(seen_classes.begin(), seen_classes.end());
  std::set<int> unseen(unseen_classes.begin(), unseen_classes.end());
  if (seen.size() != seen_classes.size() ||
      unseen.size() != unseen_classes.size()) {
    throw std::runtime_error("Dataset: duplicate class id in split");
  }
  for (int u : unseen) {
    if (seen.count(u)) {
      throw std::runtime_error("Dataset: class " + std::to_string(u) +
                               " in both seen and unseen split");
    }
  }
  for (int y : labels) {
    if (!seen.count(y) && !unseen.count(y)) {
      throw std::runtime_error("Dataset: label " + std::to_string(y) +
                               " covered by neither split side");
    }
  }
  std::unordered_set<std::uint32_t> train(train_indices.begin(),
                                          train_indices.end());
  for (std::uint32_t i : test_indices) {
    if (train.count(i)) {
      throw std::runtime_error("Dataset: index " + std::to_string(i) +
                               " in both train and test partitions");
    }
  }
  for (std::uint32_t i : train_indices) {
    if (i >= n) throw std::runtime_error("Dataset: train index out of range");
    if (unseen.count(labels[i])) {
      throw std::runtime_error(
          "Dataset: unseen class " + std::to_string(labels[i]) +
          " contributes train image " + std::to_string(i));
    }
  }
  for (std::uint32_t i : test_indices) {
    if (i >= n) throw std::runtime_error("Dataset: test index out of range");
  }
  if (!all_finite(features) || !all_finite(class_attributes)) {
    throw std::runtime_error("Dataset: non-finite values");
  }
  for (double v : features.raw()) {
    if (v < 0.0 || v > 1.0)
      throw std::runtime_error("Dataset: feature outside [0,1]");
  }
  for (double v : class_attributes.raw()) {
    if (v < 0.0 || v > 1.0)
      throw std::runtime_error("Dataset: attribute outside [0,1]");
  }
}

Matrix gather_rows(const Matrix& m, const std::vector<std::uint32_t>& idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy(m.row_ptr(idx[r]), m.row_ptr(idx[r]) + m.cols(),
              out.row_ptr(r));
  return out;
}

Matrix Dataset::train_features_of_class(int cls) const {
  std::vector<std::uint32_t> idx;
  for (std::uint32_t i : train_indices)
    if (labels[i] == cls) idx.push_back(i);
  return gather_rows(features, idx);
}

namespace {

std::pair<Matrix, std::vector<int>> subset(
    const Dataset& d, const std::vector<std::uint32_t>& part,
    const std::vector<int>& classes) {
  std::unordered_set<int> keep(classes.begin(), classes.end());
  std::vector<std::uint32_t> idx;
  std::vector<int> lab;
  for (std::uint32_t i : part) {
    if (classes.empty() || keep.count(d.labels[i])) {
      idx.push_back(i);
      lab.push_back(d.labels[i]);
    }
  }
  return {gather_rows(d.features, idx), std::move(lab)};
}

}  // namespace

std::pair<Matrix, std::vector<int>> Dataset::train_set(
    const std::vector<int>& classes) const {
  return subset(*this, train_indices, classes);
}

std::pair<Matrix, std::vector<int>> Dataset::test_set(
    const std::vector<int>& classes) const {
  return subset(*this, test_indices, classes);
}

Matrix Dataset::attributes_of(const std::vector<int>& classes) const {
  Matrix out(classes.size(), attr_dim());
  for (std::size_t r = 0; r < classes.size(); ++r) {
    const auto c = static_cast<std::size_t>(classes[r]);
    std::copy(class_attributes.row_ptr(c),
              class_attributes.row_ptr(c) + attr_dim(), out.row_ptr(r));
  }
  return out;
}

ScalingParams fit_scaling(const Matrix& train_features) {
  ScalingParams p;
  p.min.assign(train_features.cols(), 0.0);
  p.max.assign(train_features.cols(), 0.0);
  for (std::size_t c = 0; c < train_features.cols(); ++c) {
    double lo = train_features(0, c), hi = lo;
    for (std::size_t r = 1; r < train_features.rows(); ++r) {
      lo = std::min(lo, train_features(r, c));
      hi = std::max(hi, train_features(r, c));
    }
    p.min[c] = lo;
    p.max[c] = hi;
  }
  return p;
}

Matrix apply_scaling(const ScalingParams& params, const Matrix& m) {
  if (params.min.size() != m.cols()) {
    throw std::invalid_argument("apply_scaling: params for " +
                                std::to_string(params.min.size()) +
                                " columns, matrix has " +
                                std::to_string(m.cols()));
  }
  Matrix out(m.rows(), m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const double range = params.max[c] - params.min[c];
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double v = range > 0.0 ? (m(r, c) - params.min[c]) / range : 0.0;
      out(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

Matrix average_image_attributes(const Matrix& per_image_attrs,
                                const std::vector<int>& labels,
                                std::size_t num_classes) {
  if (labels.size() != per_image_attrs.rows()) {
    throw std::invalid_argument("average_image_attributes: label count");
  }
  Matrix out(num_classes, per_image_attrs.cols());
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw std::invalid_argument("average_image_attributes: label " +
                                  std::to_string(y) + " out of range");
    }
    counts[y] += 1;
    for (std::size_t c = 0; c < per_image_attrs.cols(); ++c)
      out(static_cast<std::size_t>(y), c) += per_image_attrs(r, c);
  }
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (counts[k] == 0) {
      throw std::invalid_argument("average_image_attributes: class " +
                                  std::to_string(k) + " has no images");
    }
    for (std::size_t c = 0; c < out.cols(); ++c)
      out(k, c) /= static_cast<double>(counts[k]);
  }
  return out;
}

// --------------------------------------------------------------------------
// synthetic benchmark
// --------------------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (seen_count >= num_classes) {
    throw std::invalid_argument("SyntheticSpec: seen_count " +
                                std::to_string(seen_count) +
                                " must be below num_classes " +
                                std::to_string(num_classes));
  }
  if (num_classes < 1 || seen_count < 1 || attr_dim < 1 || feature_dim < 1 ||
      examples_per_class_train < 1 || examples_per_class_test < 1) {
    throw std::invalid_argument("SyntheticSpec: all counts must be >= 1");
  }
  if (noise_stddev < 0.0) {
    throw std::invalid_argument("SyntheticSpec: negative noise_stddev");
  }
}

std::pair<Dataset, SyntheticOracle> make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng master(spec.seed);
  Rng attr_rng = master.child(1);
  Rng map_rng = master.child(2);
  Rng noise_rng = master.child(3);
  Rng split_rng = master.child(4);

  const std::size_t c = spec.num_classes;
  Matrix attrs = sample_uniform(attr_rng, c, spec.attr_dim, 0.0, 1.0);

  SyntheticOracle oracle;
  oracle.nonlinearity = spec.nonlinearity;
  oracle.noise_stddev = spec.noise_stddev;
  // Weight scale keeps class centroids well spread before noise.
  oracle.map_weights =
      sample_gaussian(map_rng, spec.feature_dim, spec.attr_dim, 0.0,
                      1.0 / std::sqrt(static_cast<double>(spec.attr_dim)));
  oracle.map_bias.assign(spec.feature_dim, 0.0);
  for (double& b : oracle.map_bias) b = map_rng.normal(0.0, 0.1);

  auto map_class = [&](std::size_t cls, std::vector<double>& out) {
    std::vector<double> lin(spec.feature_dim);
    for (std::size_t f = 0; f < spec.feature_dim; ++f) {
      double v = oracle.map_bias[f];
      for (std::size_t a = 0; a < spec.attr_dim; ++a)
        v += oracle.map_weights(f, a) * attrs(cls, a);
      lin[f] = v;
    }
    if (spec.nonlinearity == SyntheticMap::kLinear) {
      out = lin;
      return;
    }
    // Each output mixes its own linear term with a saturated tanh of the
    // next dim's linear term, so no linear read-out of the features can
    // recover the attributes exactly.
    for (std::size_t f = 0; f < spec.feature_dim; ++f) {
      const std::size_t g = (f + 1) % spec.feature_dim;
      const std::size_t h = (f + 2) % spec.feature_dim;
      out[f] = 0.15 * lin[f] +
               0.85 * std::tanh(3.0 * (lin[g] - lin[h]) + 2.0 * lin[g]);
    }
  };

  const std::size_t per_class =
      spec.examples_per_class_train + spec.examples_per_class_test;
  const std::size_t n = c * per_class;
  Matrix feats(n, spec.feature_dim);
  std::vector<int> labels(n);
  std::vector<double> center(spec.feature_dim);
  std::size_t row = 0;
  for (std::size_t cls = 0; cls < c; ++cls) {
    map_class(cls, center);
    for (std::size_t e = 0; e < per_class; ++e, ++row) {
      labels[row] = static_cast<int>(cls);
      for (std::size_t f = 0; f < spec.feature_dim; ++f)
        feats(row, f) = center[f] + noise_rng.normal(0.0, spec.noise_stddev);
    }
  }

  // Seen/unseen split by class, shuffled so there is no ordering artifact.
  std::vector<int> class_order(c);
  for (std::size_t k = 0; k < c; ++k) class_order[k] = static_cast<int>(k);
  split_rng.shuffle(class_order);

  Dataset data;
  data.seen_classes.assign(class_order.begin(),
                           class_order.begin() + spec.seen_count);
  data.unseen_classes.assign(class_order.begin() + spec.seen_count,
                             class_order.end());
  std::sort(data.seen_classes.begin(), data.seen_classes.end());
  std::sort(data.unseen_classes.begin(), data.unseen_classes.end());

  data.labels = labels;
  for (std::size_t cls = 0; cls < c; ++cls) {
    const std::size_t base = cls * per_class;
    const bool seen =
        std::find(data.seen_classes.begin(), data.seen_classes.end(),
                  static_cast<int>(cls)) != data.seen_classes.end();
    for (std::size_t e = 0; e < per_class; ++e) {
      const auto idx = static_cast<std::uint32_t>(base + e);
      if (e < spec.examples_per_class_train) {
        // Train-budget rows of unseen classes belong to no partition: the
        // pipeline must never see them, while oracle tests can still reach
        // them by row index (cls * per_class + e).
        if (seen) data.train_indices.push_back(idx);
      } else {
        data.test_indices.push_back(idx);
      }
    }
  }

  // Scale on the train partition, clamp everything else into [0,1].
  Matrix train_rows = gather_rows(feats, data.train_indices);
  const ScalingParams fp = fit_scaling(train_rows);
  data.features = apply_scaling(fp, feats);
  const ScalingParams ap = fit_scaling(attrs);
  data.class_attributes = apply_scaling(ap, attrs);

  for (std::size_t k = 0; k < c; ++k)
    data.class_names.push_back("class_" + std::to_string(k));

  data.validate();
  return {std::move(data), std::move(oracle)};
}

// --------------------------------------------------------------------------
// on-disk formats
// --------------------------------------------------------------------------

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

[[noreturn]] void format_error(const std::string& path, std::istream& is,
                               const std::string& what) {
  throw std::runtime_error(path + ": " + what + " at byte offset " +
                           std::to_string(static_cast<long long>(is.tellg())));
}

}  // namespace

void save_matrix(const std::string& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_matrix: cannot open " + path);
  os.write("FGZ1", 4);
  put_u16(os, 1);
  os.put(1);  // dtype: f64 LE
  os.put(0);  // reserved
  put_u32(os, static_cast<std::uint32_t>(m.rows()));
  put_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.raw()) put_f64(os, v);
  if (!os) throw std::runtime_error("save_matrix: write failed for " + path);
}

Matrix load_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_matrix: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FGZ1", 4) != 0) {
    throw std::runtime_error(path + ": bad FGZ1 magic at byte offset 0");
  }
  if (get_u16(is) != 1) format_error(path, is, "unsupported FGZ1 version");
  if (is.get() != 1) format_error(path, is, "unsupported dtype tag");
  is.get();  // reserved
  const std::uint32_t rows = get_u32(is);
  const std::uint32_t cols = get_u32(is);
  if (!is) format_error(path, is, "truncated FGZ1 header");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.raw()[i] = get_f64(is);
    if (!is) format_error(path, is, "truncated FGZ1 payload");
  }
  return m;
}

void save_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_labels: cannot open " + path);
  os.write("FGZL", 4);
  put_u16(os, 1);
  put_u32(os, static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) put_u32(os, static_cast<std::uint32_t>(y));
  if (!os) throw std::runtime_error("save_labels: write failed for " + path);
}

std::vector<int> load_labels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_labels: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FGZL", 4) != 0) {
    throw std::runtime_error(path + ": bad FGZL magic at byte offset 0");
  }
  if (get_u16(is) != 1) format_error(path, is, "unsupported FGZL version");
  const std::uint32_t count = get_u32(is);
  if (!is) format_error(path, is, "truncated FGZL header");
  std::vector<int> labels(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    labels[i] = static_cast<int>(get_u32(is));
    if (!is) format_error(path, is, "truncated FGZL payload");
  }
  return labels;
}

void save_dataset(const std::string& dir, const std::string& manifest_name,
                  const Dataset& data) {
  data.validate();
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_matrix((fs::path(dir) / "features.fgz").string(), data.features);
  save_labels((fs::path(dir) / "labels.fgz").string(), data.labels);
  save_matrix((fs::path(dir) / "class_attributes.fgz").string(),
              data.class_attributes);
  nlohmann::ordered_json j;
  j["features"] = "features.fgz";
  j["labels"] = "labels.fgz";
  j["class_attributes"] = "class_attributes.fgz";
  j["class_names"] = data.class_names;
  j["seen_classes"] = data.seen_classes;
  j["unseen_classes"] = data.unseen_classes;
  j["train_indices"] = data.train_indices;
  j["test_indices"] = data.test_indices;
  std::ofstream os(fs::path(dir) / manifest_name, std::ios::trunc);
  if (!os) throw std::runtime_error("save_dataset: cannot write manifest");
  os << j.dump(2) << "\n";
}

Dataset load_dataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream is(manifest_path);
  if (!is) {
    throw std::runtime_error("load_dataset: cannot open " + manifest_path);
  }
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_dataset: malformed manifest " +
                             manifest_path + ": " + e.what());
  }
  const fs::path base = fs::path(manifest_path).parent_path();
  Dataset d;
  try {
    d.features = load_matrix((base / j.at("features").get<std::string>()).string());
    d.labels = load_labels((base / j.at("labels").get<std::string>()).string());
    d.class_attributes = load_matrix(
        (base / j.at("class_attributes").get<std::string>()).string());
    d.class_names = j.at("class_names").get<std::vector<std::string>>();
    d.seen_classes = j.at("seen_classes").get<std::vector<int>>();
    d.unseen_classes = j.at("unseen_classes").get<std::vector<int>>();
    d.train_indices = j.at("train_indices").get<std::vector<std::uint32_t>>();
    d.test_indices = j.at("test_indices").get<std::vector<std::uint32_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_dataset: manifest field error in " +
                             manifest_path + ": " + e.what());
  }
  d.validate();
  return d;
}

}  // namespace featgen
