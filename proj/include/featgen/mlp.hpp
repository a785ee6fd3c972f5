#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "featgen/matrix.hpp"
#include "featgen/rng.hpp"

namespace featgen {

enum class Activation : std::uint8_t {
  kLinear = 0,
  kLeakyRelu = 1,
  kSigmoid = 2,
  kSoftmax = 3,
};

struct LayerSpec {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::kLeakyRelu;
  double leak = 0.2;
  // Inverted dropout applied to this layer's input in train mode.
  double dropout_rate = 0.0;
};

struct Mlp {
  std::vector<LayerSpec> specs;
  std::vector<Matrix> weights;               // output_dim x input_dim
  std::vector<std::vector<double>> biases;   // length output_dim

  std::size_t input_dim() const { return specs.front().input_dim; }
  std::size_t output_dim() const { return specs.back().output_dim; }
};

enum class Mode { kTrain, kEval };

// Everything backward needs from a forward pass: per-layer post-dropout
// inputs, pre-activations, dropout masks (already scaled by 1/(1-p)), and
// the final output.
struct ForwardTape {
  std::vector<Matrix> inputs;
  std::vector<Matrix> preacts;
  std::vector<Matrix> masks;  // zero-size matrix when the layer has no dropout
  Matrix output;
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Matrix input;  // gradient w.r.t. the batch fed to forward
};

struct AdamState {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<Matrix> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;
};

// Weights ~ N(0, stddev^2), biases zero.
Mlp init_mlp(const std::vector<LayerSpec>& specs, double init_stddev,
             Rng& rng);

AdamState make_adam_state(const Mlp& net, double learning_rate);

// Batched forward pass, one sample per row. Train mode draws dropout masks
// from rng; eval mode applies no dropout and consumes no randomness.
Matrix forward(const Mlp& net, const Matrix& input, Mode mode, Rng& rng,
               ForwardTape* tape = nullptr);

Gradients backward(const Mlp& net, const ForwardTape& tape,
                   const Matrix& output_grad);

void accumulate(Gradients& into, const Gradients& g);

void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

// Mean negative log-likelihood over the batch and its gradient w.r.t. the
// logits: (softmax - one_hot) / batch.
std::pair<double, Matrix> softmax_cross_entropy(const Matrix& logits,
                                                const std::vector<int>& labels);

// Mean over the batch of squared Euclidean distance; gradient
// 2*(output - target)/batch.
std::pair<double, Matrix> l2_reconstruction_loss(const Matrix& output,
                                                 const Matrix& target);

// Row-wise softmax.
Matrix softmax_rows(const Matrix& logits);

// Single-file binary model format, magic "FGZM" version 1.
void save_mlp(const std::string& path, const Mlp& net);
Mlp load_mlp(const std::string& path);

bool mlp_equal(const Mlp& a, const Mlp& b);

}  // namespace featgen
