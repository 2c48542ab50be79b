#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "ddepth/binning.hpp"
#include "ddepth/error.hpp"
#include "ddepth/losses.hpp"
#include "ddepth/rng.hpp"

namespace ddepth {

/// Fully-connected net: input -> hidden... (ELU) -> linear output.
struct Architecture {
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = 0;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Flat parameter storage. Layer l holds a row-major (out x in) weight block
/// followed by its bias. Gradients use the same type and layout.
class ModelParams {
 public:
  ModelParams() = default;

  explicit ModelParams(Architecture arch) : arch_(std::move(arch)) {
    require(arch_.input_dim > 0 && arch_.output_dim > 0, "model: input/output dims must be positive");
    for (int h : arch_.hidden) require(h > 0, "model: hidden widths must be positive");
    std::size_t offset = 0;
    for (int l = 0; l < layer_count(); ++l) {
      offsets_.push_back(offset);
      offset += static_cast<std::size_t>(layer_in(l)) * layer_out(l) + layer_out(l);
    }
    values_.assign(offset, 0.0);
  }

  const Architecture& architecture() const { return arch_; }
  int layer_count() const { return static_cast<int>(arch_.hidden.size()) + 1; }
  int layer_in(int l) const { return l == 0 ? arch_.input_dim : arch_.hidden[l - 1]; }
  int layer_out(int l) const { return l + 1 == layer_count() ? arch_.output_dim : arch_.hidden[l]; }

  std::span<double> weights(int l) { return {values_.data() + offsets_[l], weight_count(l)}; }
  std::span<const double> weights(int l) const { return {values_.data() + offsets_[l], weight_count(l)}; }
  std::span<double> bias(int l) {
    return {values_.data() + offsets_[l] + weight_count(l), static_cast<std::size_t>(layer_out(l))};
  }
  std::span<const double> bias(int l) const {
    return {values_.data() + offsets_[l] + weight_count(l), static_cast<std::size_t>(layer_out(l))};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  void set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::size_t weight_count(int l) const { return static_cast<std::size_t>(layer_in(l)) * layer_out(l); }

  Architecture arch_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
inline ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  ModelParams p(arch);
  Rng rng(seed);
  for (int l = 0; l < p.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.layer_in(l)));
    for (double& w : p.weights(l)) w = rng.uniform(-bound, bound);
  }
  return p;
}

/// Inverted-dropout scales per hidden unit: 0 (dropped) or 1/keep.
struct DropoutMask {
  std::vector<std::vector<double>> scale;
};

inline DropoutMask make_dropout_mask(const Architecture& arch, double drop_prob, Rng& rng) {
  require(drop_prob >= 0.0 && drop_prob < 1.0, "dropout probability must be in [0, 1)");
  DropoutMask mask;
  const double keep_scale = 1.0 / (1.0 - drop_prob);
  for (int width : arch.hidden) {
    std::vector<double> s(static_cast<std::size_t>(width), 1.0);
    if (drop_prob > 0.0) {
      for (double& v : s) v = rng.uniform() < drop_prob ? 0.0 : keep_scale;
    }
    mask.scale.push_back(std::move(s));
  }
  return mask;
}

namespace detail {

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

}  // namespace detail

/// Intermediate values of one forward pass, kept for backprop.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;  ///< input to each layer (post-activation, post-dropout)
  std::vector<std::vector<double>> pre;     ///< pre-activation of each layer; last entry is the output

  std::span<const double> output() const { return pre.back(); }
};

inline void forward_cached(const ModelParams& params, std::span<const double> feature, const DropoutMask* mask,
                           ForwardCache& cache) {
  const int layers = params.layer_count();
  require(static_cast<int>(feature.size()) == params.architecture().input_dim, "forward: feature size mismatch");
  if (mask) {
    require(mask->scale.size() == params.architecture().hidden.size(), "forward: dropout mask shape mismatch");
  }
  cache.inputs.resize(static_cast<std::size_t>(layers));
  cache.pre.resize(static_cast<std::size_t>(layers));
  cache.inputs[0].assign(feature.begin(), feature.end());
  for (int l = 0; l < layers; ++l) {
    const int in = params.layer_in(l);
    const int out = params.layer_out(l);
    const auto w = params.weights(l);
    const auto b = params.bias(l);
    const auto& x = cache.inputs[l];
    auto& z = cache.pre[l];
    z.resize(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      const double* row = w.data() + static_cast<std::size_t>(o) * in;
      double acc = b[o];
      for (int i = 0; i < in; ++i) acc += row[i] * x[i];
      z[o] = acc;
    }
    if (l + 1 < layers) {
      auto& next = cache.inputs[l + 1];
      next.resize(static_cast<std::size_t>(out));
      for (int o = 0; o < out; ++o) next[o] = detail::elu(z[o]);
      if (mask) {
        const auto& s = mask->scale[l];
        require(static_cast<int>(s.size()) == out, "forward: dropout mask shape mismatch");
        for (int o = 0; o < out; ++o) next[o] *= s[o];
      }
    }
  }
}

/// Raw outputs. Without a mask this is evaluation mode (no dropout, no rescale).
inline std::vector<double> forward(const ModelParams& params, std::span<const double> feature,
                                   const DropoutMask* mask = nullptr) {
  ForwardCache cache;
  forward_cached(params, feature, mask, cache);
  return cache.pre.back();
}

/// Accumulates d(loss)/d(params) into grads given d(loss)/d(output).
inline void backward_accumulate(const ModelParams& params, const ForwardCache& cache, const DropoutMask* mask,
                                std::span<const double> upstream, ModelParams& grads) {
  const int layers = params.layer_count();
  require(static_cast<int>(upstream.size()) == params.architecture().output_dim, "backward: upstream size mismatch");
  require(grads.size() == params.size(), "backward: gradient buffer shape mismatch");
  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> prev;
  for (int l = layers - 1; l >= 0; --l) {
    const int in = params.layer_in(l);
    const int out = params.layer_out(l);
    const auto& x = cache.inputs[l];
    auto gw = grads.weights(l);
    auto gb = grads.bias(l);
    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* row = gw.data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) row[i] += d * x[i];
      gb[o] += d;
    }
    if (l == 0) break;
    const auto w = params.weights(l);
    prev.assign(static_cast<std::size_t>(in), 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w.data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) prev[i] += row[i] * d;
    }
    const auto& z = cache.pre[l - 1];
    for (int i = 0; i < in; ++i) {
      double g = prev[i] * detail::elu_grad(z[i]);
      if (mask) g *= mask->scale[l - 1][i];
      prev[i] = g;
    }
    delta.swap(prev);
  }
}

/// Parameter gradients for a single feature, recomputing the forward pass.
inline ModelParams backward(const ModelParams& params, std::span<const double> feature,
                            std::span<const double> upstream, const DropoutMask* mask = nullptr) {
  ForwardCache cache;
  forward_cached(params, feature, mask, cache);
  ModelParams grads(params.architecture());
  backward_accumulate(params, cache, mask, upstream, grads);
  return grads;
}

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

/// One bias-corrected Adam update; increments state.step.
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
                      const AdamHyper& hyper = {}) {
  require(grads.size() == params.size(), "adam_step: gradient shape mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  require(state.m.size() == params.size(), "adam_step: optimizer state shape mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  auto w = params.values();
  const auto g = grads.values();
  for (std::size_t i = 0; i < w.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    w[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

/// Everything a loss needs besides the raw outputs and the ground-truth depth.
struct LossContext {
  LossKind kind = LossKind::binary;
  DepthBinning binning{1.0, 80.0, 64};
  double sigma = 0.0;         ///< bin-index units; 0 selects default_sigma
  bool soft_labels = true;    ///< false: one-hot targets for the classification losses
  double berhu_threshold = 1.0;

  LossContext() = default;
  LossContext(LossKind k, DepthBinning b) : kind(k), binning(std::move(b)) {}

  double effective_sigma() const { return sigma > 0.0 ? sigma : default_sigma(binning); }

  TargetKind target_kind() const {
    if (!soft_labels) return TargetKind::one_hot;
    return kind == LossKind::binary ? TargetKind::unnormalized : TargetKind::normalized;
  }
};

/// Per-bin soft targets, built once per context.
class TargetTable {
 public:
  explicit TargetTable(const LossContext& ctx) {
    if (!is_classification(ctx.kind)) return;
    const double sigma = ctx.effective_sigma();
    for (int k = 1; k <= ctx.binning.bins(); ++k) {
      table_.push_back(make_soft_target(ctx.binning, k, sigma, ctx.target_kind()));
    }
  }
  const SoftTarget& at(int bin) const { return table_.at(static_cast<std::size_t>(bin - 1)); }

 private:
  std::vector<SoftTarget> table_;
};

/// Loss and d(loss)/d(output) for one pixel.
inline LossValueGrad output_loss(const LossContext& ctx, const TargetTable& targets, std::span<const double> output,
                                 double depth) {
  switch (ctx.kind) {
    case LossKind::multiclass: return multiclass_loss(output, targets.at(ctx.binning.bin_of(depth)));
    case LossKind::binary: return binary_loss(output, targets.at(ctx.binning.bin_of(depth)));
    case LossKind::l2: return l2_log_loss(output[0], std::log(depth));
    case LossKind::berhu: return berhu_loss(output[0], std::log(depth), ctx.berhu_threshold);
    case LossKind::gaussian: return gaussian_nll_loss(output[0], output[1], std::log(depth));
    case LossKind::ordinal: return ordinal_loss(output, ctx.binning.bin_of(depth));
    case LossKind::mhl: return mhl_oracle_loss(output, std::log(depth));
  }
  throw ValidationError("output_loss: unknown loss");
}

struct TrainConfig {
  double learning_rate = 1e-4;
  double lr_decay = 0.1;
  int decay_epoch = 45;  ///< epochs with index >= this use the decayed rate
  int epochs = 60;
  int batch_size = 32;
  double dropout = 0.0;
  int dropout_samples = 32;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::binary;
  DepthBinning binning{1.0, 80.0, 64};
  double sigma = 0.0;
  bool soft_labels = true;
  int heads = 1;
  std::vector<int> hidden = {64, 64};
  double berhu_fraction = 0.2;

  void validate() const {
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "train: learning rate must be > 0");
    require(lr_decay > 0.0, "train: lr decay factor must be > 0");
    require(epochs >= 0, "train: epoch count must be >= 0");
    require(batch_size >= 1, "train: batch size must be >= 1");
    require(dropout >= 0.0 && dropout < 1.0, "train: dropout probability must be in [0, 1)");
    require(dropout_samples >= 1, "train: dropout sample count must be >= 1");
    require(heads >= 1, "train: head count must be >= 1");
    require(sigma >= 0.0, "train: sigma must be >= 0");
    require(berhu_fraction > 0.0, "train: berhu fraction must be > 0");
  }

  Architecture architecture(int input_dim) const {
    return {input_dim, hidden, output_dim(loss, binning.bins(), heads)};
  }

  LossContext loss_context() const {
    LossContext ctx(loss, binning);
    ctx.sigma = sigma;
    ctx.soft_labels = soft_labels;
    return ctx;
  }

  double rate_at(int epoch) const { return epoch >= decay_epoch ? learning_rate * lr_decay : learning_rate; }
};

struct TrainingSet {
  std::vector<std::vector<double>> features;
  std::vector<double> depths;  ///< meters

  std::size_t size() const { return depths.size(); }
};

struct EpochLog {
  int epoch = 0;  ///< 1-based
  double learning_rate = 0.0;
  double mean_loss = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

/// Minibatch Adam over shuffled pixels. Deterministic given config.seed.
inline TrainResult train(const TrainingSet& data, const TrainConfig& config) {
  config.validate();
  require(data.size() > 0, "train: empty dataset");
  require(data.features.size() == data.depths.size(), "train: feature/depth count mismatch");
  const int input_dim = static_cast<int>(data.features.front().size());
  for (const auto& f : data.features) require(static_cast<int>(f.size()) == input_dim, "train: ragged features");

  const Architecture arch = config.architecture(input_dim);
  TrainResult result{init_params(arch, config.seed), {}};
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  LossContext ctx = config.loss_context();
  const TargetTable targets(ctx);
  AdamState adam;
  ModelParams grads(arch);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  std::vector<ForwardCache> caches(batch);
  std::vector<DropoutMask> masks(batch);
  std::vector<double> residuals;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.rate_at(epoch);
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t n = std::min(batch, order.size() - start);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = order[start + i];
        const DropoutMask* mask = nullptr;
        if (config.dropout > 0.0) {
          masks[i] = make_dropout_mask(arch, config.dropout, rng);
          mask = &masks[i];
        }
        forward_cached(result.params, data.features[idx], mask, caches[i]);
      }
      if (config.loss == LossKind::berhu) {
        residuals.clear();
        for (std::size_t i = 0; i < n; ++i) {
          residuals.push_back(caches[i].output()[0] - std::log(data.depths[order[start + i]]));
        }
        ctx.berhu_threshold = berhu_threshold(residuals, config.berhu_fraction);
      }
      grads.set_zero();
      const double scale = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        LossValueGrad lg = output_loss(ctx, targets, caches[i].output(), data.depths[order[start + i]]);
        loss_sum += lg.value;
        for (double& g : lg.grad) g *= scale;
        backward_accumulate(result.params, caches[i], config.dropout > 0.0 ? &masks[i] : nullptr, lg.grad, grads);
      }
      adam_step(result.params, grads, adam, lr);
    }
    result.log.push_back({epoch + 1, lr, loss_sum / static_cast<double>(data.size())});
  }
  return result;
}

/// Stochastic forward passes with independent dropout masks.
inline std::vector<std::vector<double>> predict_mc_dropout(const ModelParams& params, std::span<const double> feature,
                                                           int samples, double drop_prob, Rng& rng) {
  require(samples >= 1, "predict_mc_dropout: samples must be >= 1");
  std::vector<std::vector<double>> outs;
  outs.reserve(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    const DropoutMask mask = make_dropout_mask(params.architecture(), drop_prob, rng);
    outs.push_back(forward(params, feature, &mask));
  }
  return outs;
}

inline std::vector<std::vector<double>> predict_mc_dropout(const ModelParams& params, std::span<const double> feature,
                                                           int samples, double drop_prob, std::uint64_t seed) {
  Rng rng(seed);
  return predict_mc_dropout(params, feature, samples, drop_prob, rng);
}

}  // namespace ddepth
