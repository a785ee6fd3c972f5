#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "featgen/dataset.hpp"
#include "featgen/mlp.hpp"
#include "featgen/mmd.hpp"

namespace featgen {

// Raised when a training loss goes non-finite; the CLI maps it to its own
// exit code.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GeneratorKind { kGmmn, kAcgan, kDenoisingAe, kAdversarialAe };

std::string to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(const std::string& s);

enum class NoiseDistribution { kGaussian, kUniform };

struct NoiseSpec {
  std::size_t dim = 16;
  // gaussian = N(0,1) per entry, uniform = U[0,1).
  NoiseDistribution distribution = NoiseDistribution::kGaussian;
};

Matrix sample_noise(const NoiseSpec& spec, std::size_t rows, Rng& rng);

struct GeneratorConfig {
  GeneratorKind model_kind = GeneratorKind::kGmmn;
  std::vector<std::size_t> hidden_dims{512};
  NoiseSpec noise;
  double learning_rate = 1e-4;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double init_stddev = 0.02;
  double input_dropout = 0.2;
  double hidden_dropout = 0.5;
  // Whether the 0.2 input dropout also applies to the concatenated (a,z)
  // generator input, not only to feature inputs.
  bool dropout_on_generator_input = true;
  double input_noise_stddev = 0.1;  // denoising corruption (AEs)
  double acgan_aux_weight = 1.0;    // real/fake vs class-posterior weight
  KernelSpec kernel;                // GMMN only
  std::uint64_t seed = 1;
};

// Trained conditional generator. The generator net maps a row [a | z]
// (attr_dim + noise_dim columns) to a feature vector; for the auto-encoders
// it is the decoder and the encoder lives in auxiliary.
struct GeneratorModel {
  GeneratorKind kind = GeneratorKind::kGmmn;
  Mlp generator;
  std::map<std::string, Mlp> auxiliary;
  NoiseSpec noise;
  std::size_t feature_dim = 0;
  std::size_t attr_dim = 0;
};

struct TrainReport {
  std::vector<std::string> loss_names;
  // curves[k][e] = mean value of loss term k over epoch e.
  std::vector<std::vector<double>> curves;
  std::map<std::string, double> final_losses;
  double wall_seconds = 0.0;
  // Every class whose images entered any training batch; lets protocol
  // tests prove holdout classes stayed out.
  std::vector<int> classes_used;
};

std::pair<GeneratorModel, TrainReport> train_gmmn(const Dataset& data,
                                                  const GeneratorConfig& cfg,
                                                  Rng& rng);
std::pair<GeneratorModel, TrainReport> train_acgan(const Dataset& data,
                                                   const GeneratorConfig& cfg,
                                                   Rng& rng);
std::pair<GeneratorModel, TrainReport> train_denoising_ae(
    const Dataset& data, const GeneratorConfig& cfg, Rng& rng);
std::pair<GeneratorModel, TrainReport> train_adversarial_ae(
    const Dataset& data, const GeneratorConfig& cfg, Rng& rng);

// Dispatch on cfg.model_kind.
std::pair<GeneratorModel, TrainReport> train_generator(
    const Dataset& data, const GeneratorConfig& cfg, Rng& rng);

// per_class samples per attribute row, labels aligned with row order.
// Eval-mode forward: no dropout, model untouched.
std::pair<Matrix, std::vector<int>> generate(const GeneratorModel& model,
                                             const Matrix& attributes,
                                             std::size_t per_class, Rng& rng);

// Model file plus JSON sidecar (<path>.json) carrying kind/noise/config.
void save_generator(const std::string& path, const GeneratorModel& model,
                    const GeneratorConfig& cfg);
GeneratorModel load_generator(const std::string& path);

// Strict JSON config (de)serialization: unknown keys are rejected, defaults
// fill absent keys only.
std::string generator_config_to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const std::string& json_text);

namespace detail {

// Composite objectives shared by the training loops and the gradient
// oracle tests. Default eval-mode forwards are deterministic, which is
// what finite differencing needs; the trainers pass kTrain plus a dropout
// stream.

// mean(max(l,0) - l*t + log(1+exp(-|l|))) over one logit column.
std::pair<double, Matrix> binary_cross_entropy_logits(
    const Matrix& logits, const std::vector<double>& targets);

// MMD^2 between G(gen_input) and real_features; grads w.r.t. generator.
std::pair<double, Gradients> gmmn_objective(const Mlp& gen,
                                            const Matrix& gen_input,
                                            const Matrix& real_features,
                                            const KernelSpec& kernel,
                                            Mode mode = Mode::kEval,
                                            Rng* rng = nullptr);

// Discriminator head column 0 = real/fake logit, columns 1.. = class logits.
std::pair<double, Gradients> acgan_discriminator_objective(
    const Mlp& disc, const Matrix& real, const std::vector<int>& real_labels,
    const Matrix& fake, const std::vector<int>& fake_labels, double aux_weight,
    Mode mode = Mode::kEval, Rng* rng = nullptr);

// Non-saturating generator objective plus auxiliary class term; grads
// w.r.t. the generator only.
std::pair<double, Gradients> acgan_generator_objective(
    const Mlp& gen, const Mlp& disc, const Matrix& gen_input,
    const std::vector<int>& labels, double aux_weight,
    Mode mode = Mode::kEval, Rng* rng = nullptr);

// L2 reconstruction through encoder+decoder; decoder input is [attrs|code].
struct AePair {
  double loss = 0.0;
  Gradients encoder;
  Gradients decoder;
};
AePair ae_reconstruction_objective(const Mlp& encoder, const Mlp& decoder,
                                   const Matrix& corrupted,
                                   const Matrix& attrs, const Matrix& target,
                                   Mode mode = Mode::kEval,
                                   Rng* rng = nullptr);

// Reconstruction plus the encoder's fool term against the code
// discriminator (targets "prior" on encoder codes).
AePair aae_autoencoder_objective(const Mlp& encoder, const Mlp& decoder,
                                 const Mlp& code_disc, const Matrix& corrupted,
                                 const Matrix& attrs, const Matrix& target,
                                 Mode mode = Mode::kEval, Rng* rng = nullptr);

std::pair<double, Gradients> code_discriminator_objective(
    const Mlp& code_disc, const Matrix& prior_codes,
    const Matrix& encoder_codes, Mode mode = Mode::kEval, Rng* rng = nullptr);

// Repeats one attribute row n times and appends the noise block.
Matrix conditioned_input(const Matrix& attributes, std::size_t row,
                         const Matrix& noise);

}  // namespace detail

}  // namespace featgen
