#include "featgen/generators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace featgen {

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::kGmmn:
      return "gmmn";
    case GeneratorKind::kAcgan:
      return "acgan";
    case GeneratorKind::kDenoisingAe:
      return "denoising_ae";
    case GeneratorKind::kAdversarialAe:
      return "adversarial_ae";
  }
  throw std::logic_error("to_string: unknown generator kind");
}

GeneratorKind generator_kind_from_string(const std::string& s) {
  if (s == "gmmn") return GeneratorKind::kGmmn;
  if (s == "acgan") return GeneratorKind::kAcgan;
  if (s == "denoising_ae") return GeneratorKind::kDenoisingAe;
  if (s == "adversarial_ae") return GeneratorKind::kAdversarialAe;
  throw std::invalid_argument("unknown generator kind '" + s + "'");
}

Matrix sample_noise(const NoiseSpec& spec, std::size_t rows, Rng& rng) {
  if (spec.dim < 1) {
    throw std::invalid_argument("NoiseSpec: dim must be >= 1");
  }
  return spec.distribution == NoiseDistribution::kGaussian
             ? sample_gaussian(rng, rows, spec.dim, 0.0, 1.0)
             : sample_uniform(rng, rows, spec.dim, 0.0, 1.0);
}

namespace detail {

Matrix conditioned_input(const Matrix& attributes, std::size_t row,
                         const Matrix& noise) {
  Matrix tiled(noise.rows(), attributes.cols());
  for (std::size_t r = 0; r < noise.rows(); ++r)
    std::copy(attributes.row_ptr(row), attributes.row_ptr(row) + attributes.cols(),
              tiled.row_ptr(r));
  return hcat(tiled, noise);
}

std::pair<double, Matrix> binary_cross_entropy_logits(
    const Matrix& logits, const std::vector<double>& targets) {
  if (logits.cols() != 1 || logits.rows() != targets.size()) {
    throw std::invalid_argument("binary_cross_entropy_logits: shapes");
  }
  const double n = static_cast<double>(logits.rows());
  double loss = 0.0;
  Matrix grad(logits.rows(), 1);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double l = logits(r, 0);
    const double t = targets[r];
    loss += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
    const double sig = 1.0 / (1.0 + std::exp(-l));
    grad(r, 0) = (sig - t) / n;
  }
  return {loss / n, std::move(grad)};
}

namespace {

Rng& fallback_rng(Rng* rng) {
  static Rng dummy(0);
  return rng ? *rng : dummy;
}

// Splits a discriminator output into (real/fake column, class logits).
Matrix rf_column(const Matrix& out) {
  Matrix c(out.rows(), 1);
  for (std::size_t r = 0; r < out.rows(); ++r) c(r, 0) = out(r, 0);
  return c;
}

Matrix class_columns(const Matrix& out) {
  Matrix c(out.rows(), out.cols() - 1);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 1; j < out.cols(); ++j) c(r, j - 1) = out(r, j);
  return c;
}

Matrix merge_head_grads(const Matrix& rf_grad, const Matrix& cls_grad,
                        double aux_weight) {
  Matrix g(rf_grad.rows(), 1 + cls_grad.cols());
  for (std::size_t r = 0; r < g.rows(); ++r) {
    g(r, 0) = rf_grad(r, 0);
    for (std::size_t j = 0; j < cls_grad.cols(); ++j)
      g(r, j + 1) = aux_weight * cls_grad(r, j);
  }
  return g;
}

Matrix slice_cols(const Matrix& m, std::size_t from) {
  Matrix out(m.rows(), m.cols() - from);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = from; c < m.cols(); ++c) out(r, c - from) = m(r, c);
  return out;
}

}  // namespace

std::pair<double, Gradients> gmmn_objective(const Mlp& gen,
                                            const Matrix& gen_input,
                                            const Matrix& real_features,
                                            const KernelSpec& kernel,
                                            Mode mode, Rng* rng) {
  ForwardTape tape;
  const Matrix fake = forward(gen, gen_input, mode, fallback_rng(rng), &tape);
  const double loss = mmd2_biased(fake, real_features, kernel);
  const Matrix fake_grad = mmd2_gradient(fake, real_features, kernel);
  return {loss, backward(gen, tape, fake_grad)};
}

std::pair<double, Gradients> acgan_discriminator_objective(
    const Mlp& disc, const Matrix& real, const std::vector<int>& real_labels,
    const Matrix& fake, const std::vector<int>& fake_labels, double aux_weight,
    Mode mode, Rng* rng) {
  Rng& r = fallback_rng(rng);
  ForwardTape tape_r, tape_f;
  const Matrix out_r = forward(disc, real, mode, r, &tape_r);
  const Matrix out_f = forward(disc, fake, mode, r, &tape_f);

  auto [bce_r, bce_r_grad] = binary_cross_entropy_logits(
      rf_column(out_r), std::vector<double>(real.rows(), 1.0));
  auto [bce_f, bce_f_grad] = binary_cross_entropy_logits(
      rf_column(out_f), std::vector<double>(fake.rows(), 0.0));
  auto [ce_r, ce_r_grad] = softmax_cross_entropy(class_columns(out_r),
                                                 real_labels);
  auto [ce_f, ce_f_grad] = softmax_cross_entropy(class_columns(out_f),
                                                 fake_labels);

  // Real and fake halves are averaged so a balanced untrained batch sits at
  // ln 2 on the real/fake term.
  const double loss =
      0.5 * (bce_r + bce_f) + aux_weight * 0.5 * (ce_r + ce_f);
  Gradients g = backward(
      disc, tape_r,
      scale(merge_head_grads(bce_r_grad, ce_r_grad, aux_weight), 0.5));
  accumulate(g, backward(disc, tape_f,
                         scale(merge_head_grads(bce_f_grad, ce_f_grad,
                                                aux_weight),
                               0.5)));
  return {loss, std::move(g)};
}

std::pair<double, Gradients> acgan_generator_objective(
    const Mlp& gen, const Mlp& disc, const Matrix& gen_input,
    const std::vector<int>& labels, double aux_weight, Mode mode, Rng* rng) {
  Rng& r = fallback_rng(rng);
  ForwardTape tape_g, tape_d;
  const Matrix fake = forward(gen, gen_input, mode, r, &tape_g);
  const Matrix out = forward(disc, fake, mode, r, &tape_d);

  // Non-saturating objective: push the fake real/fake logit toward "real".
  auto [bce, bce_grad] = binary_cross_entropy_logits(
      rf_column(out), std::vector<double>(fake.rows(), 1.0));
  auto [ce, ce_grad] = softmax_cross_entropy(class_columns(out), labels);

  const Gradients gd =
      backward(disc, tape_d, merge_head_grads(bce_grad, ce_grad, aux_weight));
  return {bce + aux_weight * ce, backward(gen, tape_g, gd.input)};
}

AePair ae_reconstruction_objective(const Mlp& encoder, const Mlp& decoder,
                                   const Matrix& corrupted,
                                   const Matrix& attrs, const Matrix& target,
                                   Mode mode, Rng* rng) {
  Rng& r = fallback_rng(rng);
  ForwardTape tape_e, tape_d;
  const Matrix code = forward(encoder, corrupted, mode, r, &tape_e);
  const Matrix recon = forward(decoder, hcat(attrs, code), mode, r, &tape_d);
  auto [loss, recon_grad] = l2_reconstruction_loss(recon, target);

  AePair out;
  out.loss = loss;
  out.decoder = backward(decoder, tape_d, recon_grad);
  out.encoder =
      backward(encoder, tape_e, slice_cols(out.decoder.input, attrs.cols()));
  return out;
}

AePair aae_autoencoder_objective(const Mlp& encoder, const Mlp& decoder,
                                 const Mlp& code_disc, const Matrix& corrupted,
                                 const Matrix& attrs, const Matrix& target,
                                 Mode mode, Rng* rng) {
  Rng& r = fallback_rng(rng);
  ForwardTape tape_e, tape_d, tape_cd;
  const Matrix code = forward(encoder, corrupted, mode, r, &tape_e);
  const Matrix recon = forward(decoder, hcat(attrs, code), mode, r, &tape_d);
  auto [recon_loss, recon_grad] = l2_reconstruction_loss(recon, target);

  const Matrix cd_out = forward(code_disc, code, mode, r, &tape_cd);
  auto [fool_loss, fool_grad] = binary_cross_entropy_logits(
      cd_out, std::vector<double>(code.rows(), 1.0));
  const Gradients cd_grads = backward(code_disc, tape_cd, fool_grad);

  AePair out;
  out.loss = recon_loss + fool_loss;
  out.decoder = backward(decoder, tape_d, recon_grad);
  Matrix code_grad =
      add(slice_cols(out.decoder.input, attrs.cols()), cd_grads.input);
  out.encoder = backward(encoder, tape_e, code_grad);
  return out;
}

std::pair<double, Gradients> code_discriminator_objective(
    const Mlp& code_disc, const Matrix& prior_codes,
    const Matrix& encoder_codes, Mode mode, Rng* rng) {
  Rng& r = fallback_rng(rng);
  ForwardTape tape_p, tape_c;
  const Matrix out_p = forward(code_disc, prior_codes, mode, r, &tape_p);
  const Matrix out_c = forward(code_disc, encoder_codes, mode, r, &tape_c);
  auto [bce_p, grad_p] = binary_cross_entropy_logits(
      out_p, std::vector<double>(prior_codes.rows(), 1.0));
  auto [bce_c, grad_c] = binary_cross_entropy_logits(
      out_c, std::vector<double>(encoder_codes.rows(), 0.0));
  // Average of the two halves so a balanced untrained batch sits at ln 2.
  Gradients g = backward(code_disc, tape_p, scale(grad_p, 0.5));
  accumulate(g, backward(code_disc, tape_c, scale(grad_c, 0.5)));
  return {0.5 * (bce_p + bce_c), std::move(g)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// network construction
// ---------------------------------------------------------------------------

namespace {

std::vector<LayerSpec> stack_specs(std::size_t input_dim,
                                   const std::vector<std::size_t>& hidden,
                                   std::size_t output_dim,
                                   double input_dropout, double hidden_dropout,
                                   Activation output_activation) {
  std::vector<LayerSpec> specs;
  std::size_t in = input_dim;
  for (std::size_t h : hidden) {
    LayerSpec s;
    s.input_dim = in;
    s.output_dim = h;
    s.activation = Activation::kLeakyRelu;
    s.leak = 0.2;
    s.dropout_rate = specs.empty() ? input_dropout : hidden_dropout;
    specs.push_back(s);
    in = h;
  }
  LayerSpec out;
  out.input_dim = in;
  out.output_dim = output_dim;
  out.activation = output_activation;
  out.dropout_rate = specs.empty() ? input_dropout : hidden_dropout;
  specs.push_back(out);
  return specs;
}

struct LossAccumulator {
  std::vector<std::string> names;
  std::vector<double> sums;
  std::size_t count = 0;

  explicit LossAccumulator(std::vector<std::string> n)
      : names(std::move(n)), sums(names.size(), 0.0) {}

  void add(const std::vector<double>& values) {
    for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += values[i];
    count += 1;
  }

  void flush_epoch(std::size_t epoch, TrainReport& report) {
    if (report.loss_names.empty()) {
      report.loss_names = names;
      report.curves.assign(names.size(), {});
    }
    for (std::size_t i = 0; i < sums.size(); ++i) {
      const double mean = count ? sums[i] / static_cast<double>(count) : 0.0;
      if (!std::isfinite(mean)) {
        throw NumericalError("loss term '" + names[i] +
                             "' became non-finite at epoch " +
                             std::to_string(epoch));
      }
      report.curves[i].push_back(mean);
      report.final_losses[names[i]] = mean;
      sums[i] = 0.0;
    }
    count = 0;
  }
};

struct TrainContext {
  Rng init_rng, noise_rng, dropout_rng, shuffle_rng, corrupt_rng;
  std::chrono::steady_clock::time_point start;

  explicit TrainContext(const Rng& rng)
      : init_rng(rng.child(1)),
        noise_rng(rng.child(2)),
        dropout_rng(rng.child(3)),
        shuffle_rng(rng.child(4)),
        corrupt_rng(rng.child(5)),
        start(std::chrono::steady_clock::now()) {}

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

std::vector<std::uint32_t> seen_train_indices(const Dataset& data) {
  std::vector<std::uint32_t> idx;
  for (std::uint32_t i : data.train_indices)
    if (data.is_seen(data.labels[i])) idx.push_back(i);
  return idx;
}

void record_class_use(std::set<int>& used, int cls) { used.insert(cls); }

void finish_report(TrainReport& report, const std::set<int>& used,
                   const TrainContext& ctx) {
  report.classes_used.assign(used.begin(), used.end());
  report.wall_seconds = ctx.elapsed();
}

}  // namespace

std::pair<GeneratorModel, TrainReport> train_gmmn(const Dataset& data,
                                                  const GeneratorConfig& cfg,
                                                  Rng& rng) {
  if (cfg.model_kind != GeneratorKind::kGmmn) {
    throw std::invalid_argument("train_gmmn: config kind is not gmmn");
  }
  if (data.seen_classes.empty()) {
    throw std::invalid_argument("train_gmmn: no seen classes");
  }
  for (int c : data.seen_classes) {
    if (data.train_features_of_class(c).rows() < 2) {
      throw std::invalid_argument("train_gmmn: class " + std::to_string(c) +
                                  " has fewer than 2 training examples");
    }
  }
  TrainContext ctx(rng);
  const double gen_in_drop =
      cfg.dropout_on_generator_input ? cfg.input_dropout : 0.0;

  GeneratorModel model;
  model.kind = GeneratorKind::kGmmn;
  model.noise = cfg.noise;
  model.attr_dim = data.attr_dim();
  model.feature_dim = data.feature_dim();
  model.generator = init_mlp(
      stack_specs(model.attr_dim + cfg.noise.dim, cfg.hidden_dims,
                  model.feature_dim, gen_in_drop, cfg.hidden_dropout,
                  Activation::kLinear),
      cfg.init_stddev, ctx.init_rng);

  AdamState adam = make_adam_state(model.generator, cfg.learning_rate);
  TrainReport report;
  std::set<int> used;
  LossAccumulator acc({"mmd2"});
  std::vector<int> class_order = data.seen_classes;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    ctx.shuffle_rng.shuffle(class_order);
    for (int c : class_order) {
      const Matrix real = data.train_features_of_class(c);
      record_class_use(used, c);
      const Matrix z = sample_noise(cfg.noise, real.rows(), ctx.noise_rng);
      const Matrix input = detail::conditioned_input(
          data.class_attributes, static_cast<std::size_t>(c), z);
      auto [loss, grads] =
          detail::gmmn_objective(model.generator, input, real, cfg.kernel,
                                 Mode::kTrain, &ctx.dropout_rng);
      adam_step(model.generator, grads, adam);
      acc.add({loss});
    }
    acc.flush_epoch(epoch, report);
  }
  finish_report(report, used, ctx);
  return {std::move(model), std::move(report)};
}

namespace {

// Minibatch iteration over shuffled indices shared by the three
// minibatch-trained kinds.
template <typename Body>
void for_each_minibatch(const Dataset& data, std::size_t batch_size,
                        std::size_t epochs, Rng& shuffle_rng,
                        LossAccumulator& acc, TrainReport& report,
                        const Body& body) {
  std::vector<std::uint32_t> idx = seen_train_indices(data);
  if (idx.empty()) {
    throw std::invalid_argument("training set is empty");
  }
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    shuffle_rng.shuffle(idx);
    for (std::size_t off = 0; off < idx.size(); off += batch_size) {
      const std::size_t n = std::min(batch_size, idx.size() - off);
      std::vector<std::uint32_t> batch(idx.begin() + off,
                                       idx.begin() + off + n);
      body(batch);
    }
    acc.flush_epoch(epoch, report);
  }
}

}  // namespace

std::pair<GeneratorModel, TrainReport> train_acgan(const Dataset& data,
                                                   const GeneratorConfig& cfg,
                                                   Rng& rng) {
  if (cfg.model_kind != GeneratorKind::kAcgan) {
    throw std::invalid_argument("train_acgan: config kind is not acgan");
  }
  if (data.seen_classes.size() < 2) {
    throw std::invalid_argument(
        "train_acgan: auxiliary classifier needs at least 2 seen classes");
  }
  TrainContext ctx(rng);
  const double gen_in_drop =
      cfg.dropout_on_generator_input ? cfg.input_dropout : 0.0;
  const std::size_t n_seen = data.seen_classes.size();
  std::map<int, int> seen_index;
  for (std::size_t k = 0; k < n_seen; ++k)
    seen_index[data.seen_classes[k]] = static_cast<int>(k);

  GeneratorModel model;
  model.kind = GeneratorKind::kAcgan;
  model.noise = cfg.noise;
  model.attr_dim = data.attr_dim();
  model.feature_dim = data.feature_dim();
  model.generator = init_mlp(
      stack_specs(model.attr_dim + cfg.noise.dim, cfg.hidden_dims,
                  model.feature_dim, gen_in_drop, cfg.hidden_dropout,
                  Activation::kLinear),
      cfg.init_stddev, ctx.init_rng);
  Mlp disc = init_mlp(
      stack_specs(model.feature_dim, cfg.hidden_dims, 1 + n_seen,
                  cfg.input_dropout, cfg.hidden_dropout, Activation::kLinear),
      cfg.init_stddev, ctx.init_rng);

  AdamState adam_g = make_adam_state(model.generator, cfg.learning_rate);
  AdamState adam_d = make_adam_state(disc, cfg.learning_rate);
  TrainReport report;
  std::set<int> used;
  LossAccumulator acc({"d_loss", "g_loss"});

  for_each_minibatch(
      data, cfg.batch_size, cfg.epochs, ctx.shuffle_rng, acc, report,
      [&](const std::vector<std::uint32_t>& batch) {
        const Matrix real = gather_rows(data.features, batch);
        std::vector<int> head_labels(batch.size());
        Matrix attrs(batch.size(), model.attr_dim);
        for (std::size_t r = 0; r < batch.size(); ++r) {
          const int cls = data.labels[batch[r]];
          record_class_use(used, cls);
          head_labels[r] = seen_index.at(cls);
          std::copy(data.class_attributes.row_ptr(cls),
                    data.class_attributes.row_ptr(cls) + model.attr_dim,
                    attrs.row_ptr(r));
        }
        // one discriminator step, then one generator step
        Matrix z = sample_noise(cfg.noise, batch.size(), ctx.noise_rng);
        const Matrix fake = forward(model.generator, hcat(attrs, z),
                                    Mode::kTrain, ctx.dropout_rng);
        auto [d_loss, d_grads] = detail::acgan_discriminator_objective(
            disc, real, head_labels, fake, head_labels, cfg.acgan_aux_weight,
            Mode::kTrain, &ctx.dropout_rng);
        adam_step(disc, d_grads, adam_d);

        z = sample_noise(cfg.noise, batch.size(), ctx.noise_rng);
        auto [g_loss, g_grads] = detail::acgan_generator_objective(
            model.generator, disc, hcat(attrs, z), head_labels,
            cfg.acgan_aux_weight, Mode::kTrain, &ctx.dropout_rng);
        adam_step(model.generator, g_grads, adam_g);
        acc.add({d_loss, g_loss});
      });

  model.auxiliary["discriminator"] = std::move(disc);
  finish_report(report, used, ctx);
  return {std::move(model), std::move(report)};
}

namespace {

// Encoder/decoder pair; the decoder doubles as the sampling generator, so
// its input is [attributes | code] with code dim = noise dim.
struct AeNets {
  Mlp encoder;
  Mlp decoder;
};

AeNets build_ae(const Dataset& data, const GeneratorConfig& cfg,
                Rng& init_rng) {
  const double gen_in_drop =
      cfg.dropout_on_generator_input ? cfg.input_dropout : 0.0;
  AeNets nets;
  nets.encoder = init_mlp(
      stack_specs(data.feature_dim(), cfg.hidden_dims, cfg.noise.dim,
                  cfg.input_dropout, cfg.hidden_dropout, Activation::kLinear),
      cfg.init_stddev, init_rng);
  std::vector<std::size_t> reversed(cfg.hidden_dims.rbegin(),
                                    cfg.hidden_dims.rend());
  nets.decoder = init_mlp(
      stack_specs(data.attr_dim() + cfg.noise.dim, reversed,
                  data.feature_dim(), gen_in_drop, cfg.hidden_dropout,
                  Activation::kLinear),
      cfg.init_stddev, init_rng);
  return nets;
}

}  // namespace

std::pair<GeneratorModel, TrainReport> train_denoising_ae(
    const Dataset& data, const GeneratorConfig& cfg, Rng& rng) {
  if (cfg.model_kind != GeneratorKind::kDenoisingAe) {
    throw std::invalid_argument(
        "train_denoising_ae: config kind is not denoising_ae");
  }
  TrainContext ctx(rng);
  AeNets nets = build_ae(data, cfg, ctx.init_rng);
  AdamState adam_e = make_adam_state(nets.encoder, cfg.learning_rate);
  AdamState adam_d = make_adam_state(nets.decoder, cfg.learning_rate);
  TrainReport report;
  std::set<int> used;
  LossAccumulator acc({"recon"});

  for_each_minibatch(
      data, cfg.batch_size, cfg.epochs, ctx.shuffle_rng, acc, report,
      [&](const std::vector<std::uint32_t>& batch) {
        const Matrix clean = gather_rows(data.features, batch);
        Matrix attrs(batch.size(), data.attr_dim());
        for (std::size_t r = 0; r < batch.size(); ++r) {
          const int cls = data.labels[batch[r]];
          record_class_use(used, cls);
          std::copy(data.class_attributes.row_ptr(cls),
                    data.class_attributes.row_ptr(cls) + data.attr_dim(),
                    attrs.row_ptr(r));
        }
        Matrix corrupted = clean;
        if (cfg.input_noise_stddev > 0.0) {
          corrupted = add(clean, sample_gaussian(ctx.corrupt_rng, clean.rows(),
                                                 clean.cols(), 0.0,
                                                 cfg.input_noise_stddev));
        }
        detail::AePair p = detail::ae_reconstruction_objective(
            nets.encoder, nets.decoder, corrupted, attrs, clean, Mode::kTrain,
            &ctx.dropout_rng);
        adam_step(nets.encoder, p.encoder, adam_e);
        adam_step(nets.decoder, p.decoder, adam_d);
        acc.add({p.loss});
      });

  GeneratorModel model;
  model.kind = GeneratorKind::kDenoisingAe;
  model.noise = cfg.noise;
  model.attr_dim = data.attr_dim();
  model.feature_dim = data.feature_dim();
  model.generator = std::move(nets.decoder);
  model.auxiliary["encoder"] = std::move(nets.encoder);
  finish_report(report, used, ctx);
  return {std::move(model), std::move(report)};
}

std::pair<GeneratorModel, TrainReport> train_adversarial_ae(
    const Dataset& data, const GeneratorConfig& cfg, Rng& rng) {
  if (cfg.model_kind != GeneratorKind::kAdversarialAe) {
    throw std::invalid_argument(
        "train_adversarial_ae: config kind is not adversarial_ae");
  }
  TrainContext ctx(rng);
  AeNets nets = build_ae(data, cfg, ctx.init_rng);
  Mlp code_disc = init_mlp(
      stack_specs(cfg.noise.dim, cfg.hidden_dims, 1, cfg.input_dropout,
                  cfg.hidden_dropout, Activation::kLinear),
      cfg.init_stddev, ctx.init_rng);
  AdamState adam_e = make_adam_state(nets.encoder, cfg.learning_rate);
  AdamState adam_d = make_adam_state(nets.decoder, cfg.learning_rate);
  AdamState adam_cd = make_adam_state(code_disc, cfg.learning_rate);
  TrainReport report;
  std::set<int> used;
  LossAccumulator acc({"ae_loss", "code_disc_loss"});
  Rng eval_rng(0);

  for_each_minibatch(
      data, cfg.batch_size, cfg.epochs, ctx.shuffle_rng, acc, report,
      [&](const std::vector<std::uint32_t>& batch) {
        const Matrix clean = gather_rows(data.features, batch);
        Matrix attrs(batch.size(), data.attr_dim());
        for (std::size_t r = 0; r < batch.size(); ++r) {
          const int cls = data.labels[batch[r]];
          record_class_use(used, cls);
          std::copy(data.class_attributes.row_ptr(cls),
                    data.class_attributes.row_ptr(cls) + data.attr_dim(),
                    attrs.row_ptr(r));
        }
        Matrix corrupted = clean;
        if (cfg.input_noise_stddev > 0.0) {
          corrupted = add(clean, sample_gaussian(ctx.corrupt_rng, clean.rows(),
                                                 clean.cols(), 0.0,
                                                 cfg.input_noise_stddev));
        }
        // discriminator step on frozen encoder codes vs prior draws
        const Matrix codes =
            forward(nets.encoder, corrupted, Mode::kEval, eval_rng);
        const Matrix prior = sample_noise(cfg.noise, batch.size(),
                                          ctx.noise_rng);
        auto [cd_loss, cd_grads] = detail::code_discriminator_objective(
            code_disc, prior, codes, Mode::kTrain, &ctx.dropout_rng);
        adam_step(code_disc, cd_grads, adam_cd);

        // simultaneous auto-encoder step: reconstruction + fool term
        detail::AePair p = detail::aae_autoencoder_objective(
            nets.encoder, nets.decoder, code_disc, corrupted, attrs, clean,
            Mode::kTrain, &ctx.dropout_rng);
        adam_step(nets.encoder, p.encoder, adam_e);
        adam_step(nets.decoder, p.decoder, adam_d);
        acc.add({p.loss, cd_loss});
      });

  GeneratorModel model;
  model.kind = GeneratorKind::kAdversarialAe;
  model.noise = cfg.noise;
  model.attr_dim = data.attr_dim();
  model.feature_dim = data.feature_dim();
  model.generator = std::move(nets.decoder);
  model.auxiliary["encoder"] = std::move(nets.encoder);
  model.auxiliary["code_discriminator"] = std::move(code_disc);
  finish_report(report, used, ctx);
  return {std::move(model), std::move(report)};
}

std::pair<GeneratorModel, TrainReport> train_generator(
    const Dataset& data, const GeneratorConfig& cfg, Rng& rng) {
  switch (cfg.model_kind) {
    case GeneratorKind::kGmmn:
      return train_gmmn(data, cfg, rng);
    case GeneratorKind::kAcgan:
      return train_acgan(data, cfg, rng);
    case GeneratorKind::kDenoisingAe:
      return train_denoising_ae(data, cfg, rng);
    case GeneratorKind::kAdversarialAe:
      return train_adversarial_ae(data, cfg, rng);
  }
  throw std::logic_error("train_generator: unknown kind");
}

std::pair<Matrix, std::vector<int>> generate(const GeneratorModel& model,
                                             const Matrix& attributes,
                                             std::size_t per_class, Rng& rng) {
  if (attributes.cols() != model.attr_dim) {
    throw std::invalid_argument(
        "generate: attributes have " + std::to_string(attributes.cols()) +
        " columns, model expects " + std::to_string(model.attr_dim));
  }
  if (per_class < 1) {
    throw std::invalid_argument("generate: per_class must be >= 1");
  }
  Matrix features(attributes.rows() * per_class, model.feature_dim);
  std::vector<int> labels(features.rows());
  for (std::size_t c = 0; c < attributes.rows(); ++c) {
    const Matrix z = sample_noise(model.noise, per_class, rng);
    const Matrix input = detail::conditioned_input(attributes, c, z);
    const Matrix out = forward(model.generator, input, Mode::kEval, rng);
    for (std::size_t r = 0; r < per_class; ++r) {
      const std::size_t dst = c * per_class + r;
      std::copy(out.row_ptr(r), out.row_ptr(r) + out.cols(),
                features.row_ptr(dst));
      labels[dst] = static_cast<int>(c);
    }
  }
  return {std::move(features), std::move(labels)};
}

// ---------------------------------------------------------------------------
// config JSON + model persistence
// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json noise_to_json(const NoiseSpec& n) {
  return {{"dim", n.dim},
          {"distribution",
           n.distribution == NoiseDistribution::kGaussian ? "gaussian"
                                                          : "uniform"}};
}

NoiseSpec noise_from_json(const nlohmann::json& j) {
  NoiseSpec n;
  for (const auto& [key, value] : j.items()) {
    if (key == "dim") {
      n.dim = value.get<std::size_t>();
    } else if (key == "distribution") {
      const std::string d = value.get<std::string>();
      if (d == "gaussian") {
        n.distribution = NoiseDistribution::kGaussian;
      } else if (d == "uniform") {
        n.distribution = NoiseDistribution::kUniform;
      } else {
        throw std::invalid_argument("noise.distribution: unknown value '" +
                                    d + "'");
      }
    } else {
      throw std::invalid_argument("noise: unknown key '" + key + "'");
    }
  }
  return n;
}

nlohmann::ordered_json kernel_to_json(const KernelSpec& k) {
  nlohmann::ordered_json j;
  j["bandwidths"] = k.bandwidths;
  if (!k.weights.empty()) j["weights"] = k.weights;
  return j;
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
  KernelSpec k;
  for (const auto& [key, value] : j.items()) {
    if (key == "bandwidths") {
      k.bandwidths = value.get<std::vector<double>>();
    } else if (key == "weights") {
      k.weights = value.get<std::vector<double>>();
    } else {
      throw std::invalid_argument("kernel: unknown key '" + key + "'");
    }
  }
  k.validate();
  return k;
}

nlohmann::ordered_json config_to_ordered_json(const GeneratorConfig& cfg) {
  nlohmann::ordered_json j;
  j["model_kind"] = to_string(cfg.model_kind);
  j["hidden_dims"] = cfg.hidden_dims;
  j["noise"] = noise_to_json(cfg.noise);
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["init_stddev"] = cfg.init_stddev;
  j["input_dropout"] = cfg.input_dropout;
  j["hidden_dropout"] = cfg.hidden_dropout;
  j["dropout_on_generator_input"] = cfg.dropout_on_generator_input;
  j["input_noise_stddev"] = cfg.input_noise_stddev;
  j["acgan_aux_weight"] = cfg.acgan_aux_weight;
  j["kernel"] = kernel_to_json(cfg.kernel);
  j["seed"] = cfg.seed;
  return j;
}

GeneratorConfig config_from_parsed_json(const nlohmann::json& j) {
  GeneratorConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "model_kind") {
      cfg.model_kind = generator_kind_from_string(value.get<std::string>());
    } else if (key == "hidden_dims") {
      cfg.hidden_dims = value.get<std::vector<std::size_t>>();
    } else if (key == "noise") {
      cfg.noise = noise_from_json(value);
    } else if (key == "learning_rate") {
      cfg.learning_rate = value.get<double>();
    } else if (key == "epochs") {
      cfg.epochs = value.get<std::size_t>();
    } else if (key == "batch_size") {
      cfg.batch_size = value.get<std::size_t>();
    } else if (key == "init_stddev") {
      cfg.init_stddev = value.get<double>();
    } else if (key == "input_dropout") {
      cfg.input_dropout = value.get<double>();
    } else if (key == "hidden_dropout") {
      cfg.hidden_dropout = value.get<double>();
    } else if (key == "dropout_on_generator_input") {
      cfg.dropout_on_generator_input = value.get<bool>();
    } else if (key == "input_noise_stddev") {
      cfg.input_noise_stddev = value.get<double>();
    } else if (key == "acgan_aux_weight") {
      cfg.acgan_aux_weight = value.get<double>();
    } else if (key == "kernel") {
      cfg.kernel = kernel_from_json(value);
    } else if (key == "seed") {
      cfg.seed = value.get<std::uint64_t>();
    } else {
      throw std::invalid_argument("generator config: unknown key '" + key +
                                  "'");
    }
  }
  return cfg;
}

}  // namespace

std::string generator_config_to_json(const GeneratorConfig& cfg) {
  return config_to_ordered_json(cfg).dump(2);
}

GeneratorConfig generator_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("generator config: ") + e.what());
  }
  return config_from_parsed_json(j);
}

void save_generator(const std::string& path, const GeneratorModel& model,
                    const GeneratorConfig& cfg) {
  save_mlp(path, model.generator);
  nlohmann::ordered_json side;
  side["model_kind"] = to_string(model.kind);
  side["feature_dim"] = model.feature_dim;
  side["attr_dim"] = model.attr_dim;
  side["noise"] = noise_to_json(model.noise);
  side["config"] = config_to_ordered_json(cfg);
  nlohmann::ordered_json aux = nlohmann::ordered_json::object();
  for (const auto& [name, net] : model.auxiliary) {
    const std::string aux_path = path + "." + name + ".fgzm";
    save_mlp(aux_path, net);
    aux[name] = std::filesystem::path(aux_path).filename().string();
  }
  side["auxiliary"] = aux;
  std::ofstream os(path + ".json", std::ios::trunc);
  if (!os) throw std::runtime_error("save_generator: cannot write sidecar");
  os << side.dump(2) << "\n";
}

GeneratorModel load_generator(const std::string& path) {
  std::ifstream is(path + ".json");
  if (!is) {
    throw std::runtime_error("load_generator: missing sidecar " + path +
                             ".json");
  }
  nlohmann::json side;
  try {
    is >> side;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("load_generator: bad sidecar: ") +
                             e.what());
  }
  GeneratorModel model;
  model.kind = generator_kind_from_string(side.at("model_kind"));
  model.feature_dim = side.at("feature_dim").get<std::size_t>();
  model.attr_dim = side.at("attr_dim").get<std::size_t>();
  model.noise = noise_from_json(side.at("noise"));
  model.generator = load_mlp(path);
  const auto base = std::filesystem::path(path).parent_path();
  for (const auto& [name, file] : side.at("auxiliary").items()) {
    model.auxiliary[name] = load_mlp((base / file.get<std::string>()).string());
  }
  if (model.generator.input_dim() != model.attr_dim + model.noise.dim) {
    throw std::runtime_error(
        "load_generator: generator input dim does not equal attr_dim + "
        "noise dim");
  }
  return model;
}

}  // namespace featgen
