#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "ddepth/error.hpp"

namespace ddepth {

/**
 * Log-space partition of the depth range [a, b) into K bins.
 *
 * Bin indices are 1-based at every public entry point: bin k covers
 * [exp(edge(k)), exp(edge(k+1))). Storage is 0-based.
 */
class DepthBinning {
 public:
  DepthBinning(double min_depth, double max_depth, int bins)
      : a_(min_depth), b_(max_depth), k_(bins) {
    require(std::isfinite(a_) && a_ > 0.0, "binning: min depth must be > 0");
    require(std::isfinite(b_) && b_ > a_, "binning: max depth must exceed min depth");
    require(k_ >= 2, "binning: need at least 2 bins");
    const double log_a = std::log(a_);
    const double span = std::log(b_) - log_a;
    edges_.resize(static_cast<std::size_t>(k_) + 1);
    for (int k = 1; k <= k_ + 1; ++k) {
      edges_[k - 1] = log_a + (static_cast<double>(k - 1) / k_) * span;
    }
    centers_.resize(static_cast<std::size_t>(k_));
    for (int k = 0; k < k_; ++k) centers_[k] = std::exp(0.5 * (edges_[k] + edges_[k + 1]));
  }

  double min_depth() const { return a_; }
  double max_depth() const { return b_; }
  int bins() const { return k_; }

  /// Width of one bin in log-depth.
  double log_width() const { return (std::log(b_) - std::log(a_)) / k_; }

  /// Log-depth edge, k in [1, K+1].
  double edge(int k) const { return edges_.at(static_cast<std::size_t>(k - 1)); }

  /// Representative depth (geometric mean of the bin's endpoints), k in [1, K].
  double center(int k) const { return centers_.at(static_cast<std::size_t>(k - 1)); }

  std::span<const double> edges() const { return edges_; }
  std::span<const double> centers() const { return centers_; }

  /// 1-based bin containing y. Throws std::out_of_range outside [a, b).
  int bin_of(double y) const {
    if (!(y >= a_ && y < b_)) {
      throw std::out_of_range("depth " + std::to_string(y) + " outside [" + std::to_string(a_) +
                              ", " + std::to_string(b_) + ")");
    }
    const double ly = std::log(y);
    const double span = std::log(b_) - std::log(a_);
    int k = static_cast<int>(std::floor(k_ * (ly - std::log(a_)) / span)) + 1;
    k = std::clamp(k, 1, k_);
    // the closed form can land one off near an edge; settle against the stored edges
    while (k > 1 && ly < edges_[k - 1]) --k;
    while (k < k_ && ly >= edges_[k]) ++k;
    return k;
  }

  /// Explicit clamp into [a, b) for callers that ingest out-of-range depths.
  double clamp_depth(double y) const {
    if (std::isnan(y)) return a_;
    return std::clamp(y, a_, std::nextafter(b_, a_));
  }

  /// Plain-text self-description: "a b K".
  std::string header() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.17g %.17g %d", a_, b_, k_);
    return buf;
  }

  friend bool operator==(const DepthBinning& x, const DepthBinning& y) {
    return x.a_ == y.a_ && x.b_ == y.b_ && x.k_ == y.k_;
  }

 private:
  double a_;
  double b_;
  int k_;
  std::vector<double> edges_;
  std::vector<double> centers_;
};

inline DepthBinning make_binning(double a, double b, int bins) { return DepthBinning(a, b, bins); }

inline int depth_to_bin(const DepthBinning& binning, double y) { return binning.bin_of(y); }

/**
 * Smallest Gaussian width (in bin-index units) for which the unnormalized
 * target stays >= 0.5 on every bin whose depth is within a factor 1.25 of
 * the ground truth.
 */
inline double default_sigma(const DepthBinning& binning) {
  const double bins_per_ratio =
      binning.bins() * std::log(1.25) / (std::log(binning.max_depth()) - std::log(binning.min_depth()));
  return bins_per_ratio / std::sqrt(2.0 * std::log(2.0));
}

enum class TargetKind { normalized, unnormalized, one_hot };

struct SoftTarget {
  std::vector<double> values;
  TargetKind kind = TargetKind::normalized;
  double sigma = 0.0;
  int center = 1;  ///< ground-truth bin, 1-based
};

inline SoftTarget make_soft_target(const DepthBinning& binning, int y_star, double sigma, TargetKind kind) {
  const int bins = binning.bins();
  require(y_star >= 1 && y_star <= bins, "soft target: bin index out of range");
  require(kind == TargetKind::one_hot || (std::isfinite(sigma) && sigma > 0.0),
          "soft target: sigma must be > 0");
  SoftTarget t;
  t.kind = kind;
  t.sigma = sigma;
  t.center = y_star;
  t.values.assign(static_cast<std::size_t>(bins), 0.0);
  if (kind == TargetKind::one_hot) {
    t.values[y_star - 1] = 1.0;
    return t;
  }
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int k = 1; k <= bins; ++k) {
    const double d = static_cast<double>(k - y_star);
    t.values[k - 1] = std::exp(-d * d * inv);
  }
  if (kind == TargetKind::normalized) {
    double z = 0.0;
    for (double v : t.values) z += v;
    for (double& v : t.values) v /= z;
  }
  return t;
}

}  // namespace ddepth
