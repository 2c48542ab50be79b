#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ddepth/binning.hpp"
#include "ddepth/error.hpp"

namespace ddepth {

/// Loss value plus its gradient with respect to the model's raw outputs.
struct LossValueGrad {
  double value = 0.0;
  std::vector<double> grad;
};

enum class LossKind { multiclass, binary, l2, berhu, gaussian, ordinal, mhl };

inline constexpr std::array<LossKind, 7> kAllLosses = {LossKind::multiclass, LossKind::binary,   LossKind::l2,
                                                       LossKind::berhu,      LossKind::gaussian, LossKind::ordinal,
                                                       LossKind::mhl};

inline std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::multiclass: return "multiclass";
    case LossKind::binary: return "binary";
    case LossKind::l2: return "l2";
    case LossKind::berhu: return "berhu";
    case LossKind::gaussian: return "gaussian";
    case LossKind::ordinal: return "ordinal";
    case LossKind::mhl: return "mhl";
  }
  return "?";
}

inline std::string valid_loss_names() {
  std::string s;
  for (auto k : kAllLosses) {
    if (!s.empty()) s += ", ";
    s += loss_name(k);
  }
  return s;
}

inline LossKind parse_loss(std::string_view name) {
  for (auto k : kAllLosses) {
    if (loss_name(k) == name) return k;
  }
  throw ValidationError("unknown loss '" + std::string(name) + "'; valid losses: " + valid_loss_names());
}

inline bool is_classification(LossKind kind) { return kind == LossKind::multiclass || kind == LossKind::binary; }

/// Width of the raw output layer each loss expects.
inline int output_dim(LossKind kind, int bins, int heads = 1) {
  switch (kind) {
    case LossKind::multiclass:
    case LossKind::binary: return bins;
    case LossKind::l2:
    case LossKind::berhu: return 1;
    case LossKind::gaussian: return 2;
    case LossKind::ordinal: return bins - 1;
    case LossKind::mhl: return heads;
  }
  return 0;
}

namespace detail {

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Sum over independent Bernoulli terms: -[t log mu + (1-t) log(1-mu)], mu = logistic(s).
inline LossValueGrad bernoulli_sum(std::span<const double> scores, std::span<const double> targets) {
  LossValueGrad out;
  out.grad.resize(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const double s = scores[k];
    const double t = targets[k];
    // -log mu = softplus(-s), -log(1-mu) = softplus(s)
    out.value += t * softplus(-s) + (1.0 - t) * softplus(s);
    out.grad[k] = logistic(s) - t;
  }
  return out;
}

}  // namespace detail

/// Soft-target cross-entropy over a softmax: -sum_k q_k log mu_k; d/ds = mu - q.
inline LossValueGrad multiclass_loss(std::span<const double> scores, const SoftTarget& target) {
  require(scores.size() == target.values.size(), "multiclass_loss: size mismatch");
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  const double log_z = m + std::log(z);
  LossValueGrad out;
  out.grad.resize(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const double log_mu = scores[k] - log_z;
    out.value -= target.values[k] * log_mu;
    out.grad[k] = std::exp(log_mu) - target.values[k];
  }
  out.value = std::max(out.value, 0.0);
  return out;
}

/// K independent logistic classifiers against the unnormalized target.
inline LossValueGrad binary_loss(std::span<const double> scores, const SoftTarget& target) {
  require(scores.size() == target.values.size(), "binary_loss: size mismatch");
  return detail::bernoulli_sum(scores, target.values);
}

inline LossValueGrad l2_log_loss(double pred_log_depth, double gt_log_depth) {
  const double r = pred_log_depth - gt_log_depth;
  return {r * r, {2.0 * r}};
}

/// Reverse Huber: |r| inside the threshold, (r^2 + c^2) / 2c outside.
inline LossValueGrad berhu_loss(double pred_log_depth, double gt_log_depth, double threshold) {
  require(threshold > 0.0, "berhu_loss: threshold must be > 0");
  const double r = pred_log_depth - gt_log_depth;
  if (std::abs(r) <= threshold) {
    const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    return {std::abs(r), {sign}};
  }
  return {(r * r + threshold * threshold) / (2.0 * threshold), {r / threshold}};
}

/// Batch threshold for berhu: a fraction of the largest absolute residual.
inline double berhu_threshold(std::span<const double> residuals, double fraction = 0.2) {
  double worst = 0.0;
  for (double r : residuals) worst = std::max(worst, std::abs(r));
  return std::max(fraction * worst, 1e-6);
}

/// Gaussian negative log-likelihood in log-depth, parameterized by log-variance.
/// grad = {d/d mean, d/d log_variance}.
inline LossValueGrad gaussian_nll_loss(double mean_log_depth, double log_variance, double gt_log_depth) {
  const double r = gt_log_depth - mean_log_depth;
  const double inv_var = std::exp(-log_variance);
  return {0.5 * r * r * inv_var + 0.5 * log_variance, {-r * inv_var, 0.5 - 0.5 * r * r * inv_var}};
}

/// K-1 threshold classifiers for P(y > k), k = 1..K-1; target 1 when k < y*.
inline LossValueGrad ordinal_loss(std::span<const double> scores, int y_star) {
  const int thresholds = static_cast<int>(scores.size());
  require(y_star >= 1 && y_star <= thresholds + 1, "ordinal_loss: bin index out of range");
  std::vector<double> targets(scores.size());
  for (int k = 1; k <= thresholds; ++k) targets[k - 1] = k < y_star ? 1.0 : 0.0;
  return detail::bernoulli_sum(scores, targets);
}

/// Decoded bin: 1 + number of thresholds with P(y > k) > 0.5.
inline int ordinal_decode(std::span<const double> scores) {
  int count = 0;
  for (double s : scores) count += detail::logistic(s) > 0.5 ? 1 : 0;
  return count + 1;
}

/// Best-of-M L2 in log-depth; only the winning head (lowest index on ties) gets gradient.
inline LossValueGrad mhl_oracle_loss(std::span<const double> preds, double gt_log_depth) {
  require(!preds.empty(), "mhl_oracle_loss: empty prediction list");
  std::size_t best = 0;
  double best_sq = INFINITY;
  for (std::size_t m = 0; m < preds.size(); ++m) {
    const double r = preds[m] - gt_log_depth;
    if (r * r < best_sq) {
      best_sq = r * r;
      best = m;
    }
  }
  LossValueGrad out;
  out.value = best_sq;
  out.grad.assign(preds.size(), 0.0);
  out.grad[best] = 2.0 * (preds[best] - gt_log_depth);
  return out;
}

}  // namespace ddepth
