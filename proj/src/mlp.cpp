#include "featgen/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace featgen {

namespace {

void check_chain(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) {
    throw std::invalid_argument("init_mlp: no layers");
  }
  for (const auto& s : specs) {
    if (s.input_dim < 1 || s.output_dim < 1) {
      throw std::invalid_argument("init_mlp: layer dims must be >= 1");
    }
    if (s.dropout_rate < 0.0 || s.dropout_rate >= 1.0) {
      throw std::invalid_argument("init_mlp: dropout_rate must be in [0,1)");
    }
  }
  for (std::size_t k = 0; k + 1 < specs.size(); ++k) {
    if (specs[k].output_dim != specs[k + 1].input_dim) {
      throw std::invalid_argument(
          "init_mlp: layer " + std::to_string(k) + " output_dim " +
          std::to_string(specs[k].output_dim) + " != layer " +
          std::to_string(k + 1) + " input_dim " +
          std::to_string(specs[k + 1].input_dim));
    }
    if (specs[k].activation == Activation::kSoftmax) {
      throw std::invalid_argument(
          "init_mlp: softmax only permitted on the final layer");
    }
  }
}

Matrix apply_activation(const LayerSpec& spec, const Matrix& z) {
  switch (spec.activation) {
    case Activation::kLinear:
      return z;
    case Activation::kLeakyRelu: {
      Matrix a = z;
      for (double& v : a.raw())
        if (v < 0.0) v *= spec.leak;
      return a;
    }
    case Activation::kSigmoid: {
      Matrix a = z;
      for (double& v : a.raw()) v = 1.0 / (1.0 + std::exp(-v));
      return a;
    }
    case Activation::kSoftmax:
      return softmax_rows(z);
  }
  throw std::logic_error("apply_activation: unknown activation");
}

// dL/dZ from dL/dA and the taped values.
Matrix activation_backward(const LayerSpec& spec, const Matrix& preact,
                           const Matrix& grad_out) {
  switch (spec.activation) {
    case Activation::kLinear:
      return grad_out;
    case Activation::kLeakyRelu: {
      Matrix g = grad_out;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (preact.raw()[i] < 0.0) g.raw()[i] *= spec.leak;
      return g;
    }
    case Activation::kSigmoid: {
      Matrix g = grad_out;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double a = 1.0 / (1.0 + std::exp(-preact.raw()[i]));
        g.raw()[i] *= a * (1.0 - a);
      }
      return g;
    }
    case Activation::kSoftmax: {
      const Matrix a = softmax_rows(preact);
      Matrix g(grad_out.rows(), grad_out.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c)
          dot += grad_out(r, c) * a(r, c);
        for (std::size_t c = 0; c < g.cols(); ++c)
          g(r, c) = a(r, c) * (grad_out(r, c) - dot);
      }
      return g;
    }
  }
  throw std::logic_error("activation_backward: unknown activation");
}

}  // namespace

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double mx = logits(r, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c)
      mx = std::max(mx, logits(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      p(r, c) = std::exp(logits(r, c) - mx);
      sum += p(r, c);
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) p(r, c) /= sum;
  }
  return p;
}

Mlp init_mlp(const std::vector<LayerSpec>& specs, double init_stddev,
             Rng& rng) {
  check_chain(specs);
  if (init_stddev <= 0.0) {
    throw std::invalid_argument("init_mlp: init_stddev must be > 0");
  }
  Mlp net;
  net.specs = specs;
  for (const auto& s : specs) {
    net.weights.push_back(
        sample_gaussian(rng, s.output_dim, s.input_dim, 0.0, init_stddev));
    net.biases.emplace_back(s.output_dim, 0.0);
  }
  return net;
}

AdamState make_adam_state(const Mlp& net, double learning_rate) {
  AdamState st;
  st.learning_rate = learning_rate;
  for (std::size_t k = 0; k < net.specs.size(); ++k) {
    st.m_w.emplace_back(net.weights[k].rows(), net.weights[k].cols());
    st.v_w.emplace_back(net.weights[k].rows(), net.weights[k].cols());
    st.m_b.emplace_back(net.biases[k].size(), 0.0);
    st.v_b.emplace_back(net.biases[k].size(), 0.0);
  }
  return st;
}

Matrix forward(const Mlp& net, const Matrix& input, Mode mode, Rng& rng,
               ForwardTape* tape) {
  if (input.cols() != net.input_dim()) {
    throw std::invalid_argument("forward: input has " +
                                std::to_string(input.cols()) +
                                " columns, net expects " +
                                std::to_string(net.input_dim()));
  }
  if (tape) {
    tape->inputs.clear();
    tape->preacts.clear();
    tape->masks.clear();
  }
  Matrix x = input;
  for (std::size_t k = 0; k < net.specs.size(); ++k) {
    const LayerSpec& spec = net.specs[k];
    Matrix mask;
    if (mode == Mode::kTrain && spec.dropout_rate > 0.0) {
      const double keep = 1.0 - spec.dropout_rate;
      mask = Matrix(x.rows(), x.cols());
      for (double& v : mask.raw())
        v = rng.next_double() < keep ? 1.0 / keep : 0.0;
      x = hadamard(x, mask);
    }
    // z = x W^T + b
    Matrix z = matmul(x, transpose(net.weights[k]));
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += net.biases[k][c];
    if (tape) {
      tape->inputs.push_back(x);
      tape->preacts.push_back(z);
      tape->masks.push_back(std::move(mask));
    }
    x = apply_activation(spec, z);
  }
  if (tape) tape->output = x;
  return x;
}

Gradients backward(const Mlp& net, const ForwardTape& tape,
                   const Matrix& output_grad) {
  const std::size_t n_layers = net.specs.size();
  if (tape.inputs.size() != n_layers || tape.preacts.size() != n_layers) {
    throw std::invalid_argument(
        "backward: tape does not match the net (stale or foreign tape)");
  }
  if (!output_grad.same_shape(tape.output)) {
    throw std::invalid_argument("backward: output_grad " +
                                output_grad.shape_str() + " vs output " +
                                tape.output.shape_str());
  }
  Gradients g;
  g.weights.resize(n_layers);
  g.biases.resize(n_layers);
  Matrix grad = output_grad;
  for (std::size_t k = n_layers; k-- > 0;) {
    Matrix dz = activation_backward(net.specs[k], tape.preacts[k], grad);
    g.weights[k] = matmul(transpose(dz), tape.inputs[k]);
    g.biases[k].assign(net.biases[k].size(), 0.0);
    for (std::size_t r = 0; r < dz.rows(); ++r)
      for (std::size_t c = 0; c < dz.cols(); ++c) g.biases[k][c] += dz(r, c);
    grad = matmul(dz, net.weights[k]);
    if (tape.masks[k].size() > 0) grad = hadamard(grad, tape.masks[k]);
  }
  g.input = std::move(grad);
  return g;
}

void accumulate(Gradients& into, const Gradients& g) {
  for (std::size_t k = 0; k < into.weights.size(); ++k) {
    into.weights[k] = add(into.weights[k], g.weights[k]);
    for (std::size_t i = 0; i < into.biases[k].size(); ++i)
      into.biases[k][i] += g.biases[k][i];
  }
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
  if (grads.weights.size() != net.weights.size()) {
    throw std::invalid_argument("adam_step: gradient/parameter layer count");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](double& param, double g, double& m, double& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    param -= state.learning_rate * (m / bc1) /
             (std::sqrt(v / bc2) + state.epsilon);
  };
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    if (!grads.weights[k].same_shape(net.weights[k])) {
      throw std::invalid_argument("adam_step: layer " + std::to_string(k) +
                                  " gradient " + grads.weights[k].shape_str() +
                                  " vs weight " + net.weights[k].shape_str());
    }
    for (std::size_t i = 0; i < net.weights[k].size(); ++i)
      update(net.weights[k].raw()[i], grads.weights[k].raw()[i],
             state.m_w[k].raw()[i], state.v_w[k].raw()[i]);
    for (std::size_t i = 0; i < net.biases[k].size(); ++i)
      update(net.biases[k][i], grads.biases[k][i], state.m_b[k][i],
             state.v_b[k][i]);
  }
}

std::pair<double, Matrix> softmax_cross_entropy(
    const Matrix& logits, const std::vector<int>& labels) {
  if (labels.size() != logits.rows()) {
    throw std::invalid_argument("softmax_cross_entropy: batch size mismatch");
  }
  const std::size_t n = logits.rows();
  Matrix p = softmax_rows(logits);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw std::invalid_argument("softmax_cross_entropy: label " +
                                  std::to_string(y) + " outside [0, " +
                                  std::to_string(logits.cols()) + ")");
    }
    loss -= std::log(std::max(p(r, static_cast<std::size_t>(y)), 1e-300));
  }
  loss /= static_cast<double>(n);
  Matrix grad = p;
  for (std::size_t r = 0; r < n; ++r)
    grad(r, static_cast<std::size_t>(labels[r])) -= 1.0;
  grad = scale(grad, 1.0 / static_cast<double>(n));
  return {loss, std::move(grad)};
}

std::pair<double, Matrix> l2_reconstruction_loss(const Matrix& output,
                                                 const Matrix& target) {
  if (!output.same_shape(target)) {
    throw std::invalid_argument("l2_reconstruction_loss: shape mismatch " +
                                output.shape_str() + " vs " +
                                target.shape_str());
  }
  const double n = static_cast<double>(output.rows());
  Matrix diff = sub(output, target);
  double loss = 0.0;
  for (double v : diff.raw()) loss += v * v;
  loss /= n;
  return {loss, scale(diff, 2.0 / n)};
}

// ---------------------------------------------------------------------------
// serialization: magic "FGZM", u16 version, u32 layer count, then per layer
// (u32 input_dim, u32 output_dim, u8 activation, f64 leak, f64 dropout,
//  weights row-major f64 LE, biases f64 LE)
// ---------------------------------------------------------------------------

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

}  // namespace

void save_mlp(const std::string& path, const Mlp& net) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_mlp: cannot open " + path);
  os.write("FGZM", 4);
  put_u16(os, 1);
  put_u32(os, static_cast<std::uint32_t>(net.specs.size()));
  for (std::size_t k = 0; k < net.specs.size(); ++k) {
    const LayerSpec& s = net.specs[k];
    put_u32(os, static_cast<std::uint32_t>(s.input_dim));
    put_u32(os, static_cast<std::uint32_t>(s.output_dim));
    os.put(static_cast<char>(s.activation));
    put_f64(os, s.leak);
    put_f64(os, s.dropout_rate);
    for (double v : net.weights[k].raw()) put_f64(os, v);
    for (double v : net.biases[k]) put_f64(os, v);
  }
  if (!os) throw std::runtime_error("save_mlp: write failed for " + path);
}

Mlp load_mlp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_mlp: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FGZM", 4) != 0) {
    throw std::runtime_error("load_mlp: bad magic at byte 0 in " + path);
  }
  const std::uint16_t version = get_u16(is);
  if (version != 1) {
    throw std::runtime_error("load_mlp: unsupported version " +
                             std::to_string(version));
  }
  const std::uint32_t n_layers = get_u32(is);
  Mlp net;
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    LayerSpec s;
    s.input_dim = get_u32(is);
    s.output_dim = get_u32(is);
    const int tag = is.get();
    if (tag < 0 || tag > 3) {
      throw std::runtime_error("load_mlp: bad activation tag in layer " +
                               std::to_string(k));
    }
    s.activation = static_cast<Activation>(tag);
    s.leak = get_f64(is);
    s.dropout_rate = get_f64(is);
    if (!is || s.input_dim < 1 || s.output_dim < 1) {
      throw std::runtime_error("load_mlp: corrupt layer header " +
                               std::to_string(k) + " at byte offset " +
                               std::to_string(static_cast<long long>(is.tellg())));
    }
    Matrix w(s.output_dim, s.input_dim);
    for (double& v : w.raw()) v = get_f64(is);
    std::vector<double> b(s.output_dim);
    for (double& v : b) v = get_f64(is);
    if (!is) {
      is.clear();
      throw std::runtime_error("load_mlp: truncated parameters in layer " +
                               std::to_string(k) + " at byte offset " +
                               std::to_string(static_cast<long long>(
                                   is.tellg())) +
                               " in " + path);
    }
    net.specs.push_back(s);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  check_chain(net.specs);
  return net;
}

bool mlp_equal(const Mlp& a, const Mlp& b) {
  if (a.specs.size() != b.specs.size()) return false;
  for (std::size_t k = 0; k < a.specs.size(); ++k) {
    if (a.specs[k].input_dim != b.specs[k].input_dim ||
        a.specs[k].output_dim != b.specs[k].output_dim ||
        a.specs[k].activation != b.specs[k].activation ||
        a.specs[k].leak != b.specs[k].leak ||
        a.specs[k].dropout_rate != b.specs[k].dropout_rate)
      return false;
    if (a.weights[k].raw() != b.weights[k].raw()) return false;
    if (a.biases[k] != b.biases[k]) return false;
  }
  return true;
}

}  // namespace featgen
