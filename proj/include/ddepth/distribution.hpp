#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "ddepth/binning.hpp"
#include "ddepth/error.hpp"

namespace ddepth {

inline constexpr double kSimplexTolerance = 1e-9;

/// Categorical distribution over depth bins.
class DepthDistribution {
 public:
  DepthDistribution() = default;

  /// Takes ownership of probabilities that already satisfy the simplex constraint.
  explicit DepthDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    require(!probs_.empty(), "distribution: empty probability vector");
    double sum = 0.0;
    for (double p : probs_) {
      require(std::isfinite(p) && p >= 0.0, "distribution: probabilities must be finite and >= 0");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= kSimplexTolerance, "distribution: probabilities must sum to 1");
  }

  /// Rescales nonnegative weights onto the simplex (e.g. after a float32 round trip).
  static DepthDistribution from_weights(std::span<const double> weights) {
    require(!weights.empty(), "distribution: empty weight vector");
    double sum = 0.0;
    for (double w : weights) {
      require(std::isfinite(w) && w >= 0.0, "distribution: weights must be finite and >= 0");
      sum += w;
    }
    require(sum > 0.0, "distribution: weights sum to zero");
    std::vector<double> p(weights.begin(), weights.end());
    for (double& v : p) v /= sum;
    return DepthDistribution(std::move(p));
  }

  int bins() const { return static_cast<int>(probs_.size()); }
  std::span<const double> probs() const { return probs_; }
  /// 1-based access.
  double prob(int k) const { return probs_.at(static_cast<std::size_t>(k - 1)); }

 private:
  std::vector<double> probs_;
};

/// Raw per-pixel scores for an H x W image, bin-fastest.
struct LogitMap {
  int height = 0;
  int width = 0;
  int bins = 0;
  std::vector<double> scores;

  LogitMap(int h, int w, int k) : height(h), width(w), bins(k) {
    require(h > 0 && w > 0 && k > 0, "logit map: dimensions must be positive");
    scores.assign(static_cast<std::size_t>(h) * w * k, 0.0);
  }

  std::span<double> at(int row, int col) {
    return {scores.data() + (static_cast<std::size_t>(row) * width + col) * bins, static_cast<std::size_t>(bins)};
  }
  std::span<const double> at(int row, int col) const {
    return {scores.data() + (static_cast<std::size_t>(row) * width + col) * bins, static_cast<std::size_t>(bins)};
  }

  bool finite() const {
    return std::all_of(scores.begin(), scores.end(), [](double s) { return std::isfinite(s); });
  }
};

/// Max-shifted softmax.
inline DepthDistribution normalize(std::span<const double> scores) {
  require(!scores.empty(), "normalize: empty score vector");
  for (double s : scores) require(std::isfinite(s), "normalize: non-finite score");
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    p[k] = std::exp(scores[k] - m);
    z += p[k];
  }
  for (double& v : p) v /= z;
  return DepthDistribution(std::move(p));
}

inline double expected_depth(const DepthDistribution& dist, const DepthBinning& binning) {
  require(dist.bins() == binning.bins(), "expected_depth: bin count mismatch");
  const auto probs = dist.probs();
  const auto centers = binning.centers();
  double e = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) e += probs[k] * centers[k];
  return e;
}

/// Argmax, ties toward the nearer bin. 1-based.
inline int most_likely(const DepthDistribution& dist) {
  const auto probs = dist.probs();
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin()) + 1;
}

/// Shannon entropy in nats.
inline double entropy(const DepthDistribution& dist) {
  double h = 0.0;
  for (double p : dist.probs()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

struct Hypothesis {
  int bin = 1;  ///< 1-based
  double prob = 0.0;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

/// The M most probable bins, descending; ties toward the smaller index.
inline std::vector<Hypothesis> top_hypotheses(const DepthDistribution& dist, int count) {
  require(count >= 1 && count <= dist.bins(), "top_hypotheses: count must be in [1, K]");
  const auto probs = dist.probs();
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + count, order.end(), [&](int i, int j) {
    return probs[i] > probs[j] || (probs[i] == probs[j] && i < j);
  });
  std::vector<Hypothesis> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int m = 0; m < count; ++m) out.push_back({order[m] + 1, probs[order[m]]});
  return out;
}

/// Bins that are >= both neighbours and >= min_prob, ascending.
inline std::vector<int> local_modes(const DepthDistribution& dist, double min_prob) {
  require(min_prob >= 0.0 && min_prob <= 1.0, "local_modes: threshold must be in [0, 1]");
  const auto p = dist.probs();
  const std::size_t n = p.size();
  std::vector<int> modes;
  for (std::size_t k = 0; k < n; ++k) {
    const bool left_ok = k == 0 || p[k] >= p[k - 1];
    const bool right_ok = k + 1 == n || p[k] >= p[k + 1];
    if (left_ok && right_ok && p[k] >= min_prob) modes.push_back(static_cast<int>(k) + 1);
  }
  return modes;
}

/// Elementwise mean; used to pool Monte-Carlo dropout samples.
inline DepthDistribution average_distributions(std::span<const DepthDistribution> dists) {
  require(!dists.empty(), "average_distributions: empty sample set");
  if (dists.size() == 1) return dists.front();
  const int bins = dists.front().bins();
  std::vector<double> acc(static_cast<std::size_t>(bins), 0.0);
  for (const auto& d : dists) {
    require(d.bins() == bins, "average_distributions: bin count mismatch");
    const auto p = d.probs();
    for (int k = 0; k < bins; ++k) acc[k] += p[k];
  }
  // renormalize to absorb accumulated rounding
  return DepthDistribution::from_weights(acc);
}

}  // namespace ddepth
