#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ddepth/inference.hpp"
#include "ddepth/io.hpp"
#include "ddepth/mapping.hpp"
#include "ddepth/model.hpp"
#include "ddepth/synthworld.hpp"

namespace ddepth {

enum class DepthSource { ground_truth, model };

struct MapRunConfig {
  double resolution = 0.4;
  double keep_fraction = 1.0;  ///< applies to model depth only
  DepthSource source = DepthSource::model;
  PointEstimate point = PointEstimate::expectation;
  std::uint64_t seed = 0;
};

struct MapRunResult {
  VoxelGrid grid;
  MapAccuracy accuracy;
  std::size_t memory_bytes = 0;
  std::size_t integrated_pixels = 0;
};

/// Predicted depth and ranking scalar per pixel; NaN depth where the view has no return.
struct PredictedView {
  DepthImage image;
  std::vector<double> uncertainty;
};

inline PredictedView predict_view(const io::Checkpoint& model, const RenderedView& view, PointEstimate point,
                                  Rng& rng) {
  const auto samples = view_pixel_samples(model.world, view, rng);
  PredictedView out{{view.height, view.width, std::vector<double>(samples.size(), std::nan(""))},
                    std::vector<double>(samples.size(), std::numeric_limits<double>::infinity())};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].feature.empty()) continue;
    const auto raw = forward(model.params, samples[i].feature);
    const PixelPrediction p = decode_output(model.loss, model.binning, raw, point, 1);
    out.image.depth[i] = p.depth;
    out.uncertainty[i] = p.uncertainty;
  }
  return out;
}

/// Confidence gate over the pixels that carry a depth; the rest stay masked out.
inline std::vector<std::uint8_t> gate_valid_pixels(const PredictedView& pv, double keep_fraction) {
  std::vector<std::size_t> valid;
  std::vector<double> unc;
  for (std::size_t i = 0; i < pv.image.depth.size(); ++i) {
    if (std::isfinite(pv.image.depth[i])) {
      valid.push_back(i);
      unc.push_back(pv.uncertainty[i]);
    }
  }
  const auto kept = confidence_mask(unc, keep_fraction);
  std::vector<std::uint8_t> mask(pv.image.depth.size(), 0);
  for (std::size_t k = 0; k < valid.size(); ++k) mask[valid[k]] = kept[k];
  return mask;
}

/**
 * Renders each pose, obtains depth (ground truth or model), optionally keeps
 * only the most confident pixels, fuses everything into one grid and scores
 * it against the scene's voxelization.
 */
inline MapRunResult run_mapping(const SceneSpec& scene, std::span<const CameraPose> trajectory,
                                const io::Checkpoint* model, const MapRunConfig& config) {
  scene.validate();
  require(!trajectory.empty(), "mapping: empty trajectory, accuracy undefined");
  require(config.source == DepthSource::ground_truth || model != nullptr, "mapping: model depth needs a checkpoint");
  const VoxelGrid truth = ground_truth_grid(scene, config.resolution);
  MapRunResult result{VoxelGrid(config.resolution, scene.world), {}, 0, 0};
  Rng rng(config.seed);
  for (const auto& pose : trajectory) {
    const RenderedView view = render_depth(scene, pose);
    if (config.source == DepthSource::ground_truth) {
      integrate_depth_map(result.grid, view.image(), pose, scene.camera);
      for (double d : view.depth) result.integrated_pixels += std::isfinite(d) ? 1 : 0;
      continue;
    }
    const PredictedView pv = predict_view(*model, view, config.point, rng);
    const auto mask = gate_valid_pixels(pv, config.keep_fraction);
    integrate_depth_map(result.grid, pv.image, pose, scene.camera, mask);
    for (auto m : mask) result.integrated_pixels += m;
  }
  result.accuracy = map_accuracy(result.grid, truth);
  result.memory_bytes = memory_estimate(result.grid);
  return result;
}

}  // namespace ddepth
