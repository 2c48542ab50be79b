#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ddepth/binning.hpp"
#include "ddepth/distribution.hpp"
#include "ddepth/losses.hpp"

namespace ddepth {

enum class PointEstimate { expectation, most_likely };

/// Point depth, ranking scalar and ordered depth hypotheses for one pixel.
struct PixelPrediction {
  double depth = 0.0;
  double uncertainty = 0.0;
  std::vector<double> hypotheses;  ///< meters, best first
};

inline double point_depth(const DepthDistribution& dist, const DepthBinning& binning, PointEstimate point) {
  return point == PointEstimate::expectation ? expected_depth(dist, binning) : binning.center(most_likely(dist));
}

inline std::vector<double> hypothesis_depths(const DepthDistribution& dist, const DepthBinning& binning, int count) {
  std::vector<double> out;
  for (const auto& h : top_hypotheses(dist, std::min(count, dist.bins()))) out.push_back(binning.center(h.bin));
  return out;
}

inline PixelPrediction decode_distribution(const DepthDistribution& dist, const DepthBinning& binning,
                                           PointEstimate point, int max_hypotheses) {
  return {point_depth(dist, binning, point), entropy(dist), hypothesis_depths(dist, binning, max_hypotheses)};
}

/// Decodes a deterministic forward pass. Uncertainty is the entropy for the
/// classification losses, the predicted variance for the Gaussian head and
/// zero for the plain regressors.
inline PixelPrediction decode_output(LossKind kind, const DepthBinning& binning, std::span<const double> output,
                                     PointEstimate point = PointEstimate::expectation, int max_hypotheses = 1) {
  switch (kind) {
    case LossKind::multiclass:
    case LossKind::binary: return decode_distribution(normalize(output), binning, point, max_hypotheses);
    case LossKind::l2:
    case LossKind::berhu: {
      const double d = std::exp(output[0]);
      return {d, 0.0, {d}};
    }
    case LossKind::gaussian: {
      const double d = std::exp(output[0]);
      return {d, std::exp(output[1]), {d}};
    }
    case LossKind::ordinal: {
      const double d = binning.center(ordinal_decode(output));
      return {d, 0.0, {d}};
    }
    case LossKind::mhl: {
      PixelPrediction p;
      for (double v : output) p.hypotheses.push_back(std::exp(v));
      p.depth = p.hypotheses.front();
      return p;
    }
  }
  return {};
}

inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  // identical passes are exactly certain; the running mean would leave rounding residue
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

/// Pools Monte-Carlo dropout passes. Classification samples are averaged as
/// distributions; every variant ranks by the sample variance of per-pass depths.
inline PixelPrediction decode_mc_samples(LossKind kind, const DepthBinning& binning,
                                         std::span<const std::vector<double>> outputs,
                                         PointEstimate point = PointEstimate::expectation, int max_hypotheses = 1) {
  std::vector<double> depths;
  if (is_classification(kind)) {
    std::vector<DepthDistribution> dists;
    for (const auto& o : outputs) {
      dists.push_back(normalize(o));
      depths.push_back(point_depth(dists.back(), binning, point));
    }
    const DepthDistribution mean = average_distributions(dists);
    PixelPrediction p = decode_distribution(mean, binning, point, max_hypotheses);
    p.uncertainty = sample_variance(depths);
    return p;
  }
  PixelPrediction p;
  for (const auto& o : outputs) depths.push_back(decode_output(kind, binning, o, point, 1).depth);
  double mean = 0.0;
  for (double d : depths) mean += d;
  p.depth = mean / static_cast<double>(depths.size());
  p.uncertainty = sample_variance(depths);
  p.hypotheses = {p.depth};
  return p;
}

}  // namespace ddepth
