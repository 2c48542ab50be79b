#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "ddepth/error.hpp"

namespace ddepth {

struct EvalRecord {
  double pred = 0.0;         ///< predicted depth, meters
  double gt = 0.0;           ///< ground-truth depth, meters
  double uncertainty = 0.0;  ///< ranking scalar, lower is more confident
  std::vector<double> hypotheses;
};

/// Error metrics that decompose into a per-pixel error and an aggregate.
enum class Metric { are, rmse, rmse_log, log10, one_minus_delta1 };

inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::are, Metric::rmse, Metric::rmse_log, Metric::log10,
                                                      Metric::one_minus_delta1};

inline std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::are: return "are";
    case Metric::rmse: return "rmse";
    case Metric::rmse_log: return "rmse_log";
    case Metric::log10: return "log10";
    case Metric::one_minus_delta1: return "one_minus_delta1";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  for (Metric m : kAllMetrics) {
    if (metric_name(m) == s) return m;
  }
  throw ValidationError("unknown metric '" + std::string(s) + "'");
}

/**
 * Per-pixel error used both for aggregation and for oracle ranking. For the
 * RMSE variants this is the squared residual; for 1-delta1 it is the depth
 * ratio max(p/g, g/p), so ranking by it orders the threshold indicator too.
 */
inline double pixel_error(Metric m, double pred, double gt) {
  switch (m) {
    case Metric::are: return std::abs(pred - gt) / gt;
    case Metric::rmse: return (pred - gt) * (pred - gt);
    case Metric::rmse_log: {
      const double d = std::log(pred) - std::log(gt);
      return d * d;
    }
    case Metric::log10: return std::abs(std::log10(pred) - std::log10(gt));
    case Metric::one_minus_delta1: return std::max(pred / gt, gt / pred);
  }
  return 0.0;
}

/// Reduces pixel errors (in any order) to the metric value.
inline double aggregate(Metric m, std::span<const double> errors) {
  require(!errors.empty(), "aggregate: no pixels");
  double sum = 0.0;
  for (double e : errors) {
    sum += m == Metric::one_minus_delta1 ? (e < 1.25 ? 0.0 : 1.0) : e;
  }
  const double mean = sum / static_cast<double>(errors.size());
  return (m == Metric::rmse || m == Metric::rmse_log) ? std::sqrt(mean) : mean;
}

inline void check_records(std::span<const EvalRecord> records) {
  require(!records.empty(), "evaluation: empty record set");
  for (const auto& r : records) {
    require(r.pred > 0.0 && r.gt > 0.0 && std::isfinite(r.pred) && std::isfinite(r.gt),
            "evaluation: depths must be finite and > 0");
    require(std::isfinite(r.uncertainty), "evaluation: uncertainty must be finite");
  }
}

inline double metric_value(Metric m, std::span<const EvalRecord> records) {
  check_records(records);
  std::vector<double> e;
  e.reserve(records.size());
  for (const auto& r : records) e.push_back(pixel_error(m, r.pred, r.gt));
  return aggregate(m, e);
}

struct StandardMetrics {
  double are = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double log10 = 0.0;
  double delta1 = 0.0;  ///< fractions in [0, 1]
  double delta2 = 0.0;
  double delta3 = 0.0;
};

inline StandardMetrics standard_metrics(std::span<const EvalRecord> records) {
  check_records(records);
  StandardMetrics s;
  const double n = static_cast<double>(records.size());
  for (const auto& r : records) {
    const double p = r.pred;
    const double g = r.gt;
    s.are += std::abs(p - g) / g;
    s.rmse += (p - g) * (p - g);
    const double dl = std::log(p) - std::log(g);
    s.rmse_log += dl * dl;
    s.log10 += std::abs(std::log10(p) - std::log10(g));
    const double ratio = std::max(p / g, g / p);
    s.delta1 += ratio < 1.25 ? 1.0 : 0.0;
    s.delta2 += ratio < 1.25 * 1.25 ? 1.0 : 0.0;
    s.delta3 += ratio < 1.25 * 1.25 * 1.25 ? 1.0 : 0.0;
  }
  s.are /= n;
  s.rmse = std::sqrt(s.rmse / n);
  s.rmse_log = std::sqrt(s.rmse_log / n);
  s.log10 /= n;
  s.delta1 /= n;
  s.delta2 /= n;
  s.delta3 /= n;
  return s;
}

struct CurvePoint {
  double fraction = 0.0;
  double value = 0.0;
};

struct SparsificationCurve {
  Metric metric = Metric::are;
  std::vector<CurvePoint> points;
};

/// {0.05, 0.10, ..., 1.00}.
inline std::vector<double> default_fractions() {
  std::vector<double> f;
  for (int i = 1; i <= 20; ++i) f.push_back(i / 20.0);
  return f;
}

namespace detail {

inline SparsificationCurve curve_from_order(Metric metric, std::span<const EvalRecord> records,
                                            std::span<const std::size_t> order, std::span<const double> fractions) {
  require(!fractions.empty(), "sparsification: no fractions");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    require(fractions[i] > 0.0 && fractions[i] <= 1.0, "sparsification: fractions must be in (0, 1]");
    require(i == 0 || fractions[i] > fractions[i - 1], "sparsification: fractions must increase");
  }
  SparsificationCurve curve{metric, {}};
  const std::size_t n = records.size();
  std::vector<double> errors;
  errors.reserve(n);
  for (std::size_t i : order) errors.push_back(pixel_error(metric, records[i].pred, records[i].gt));
  for (double f : fractions) {
    const auto keep = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(f * static_cast<double>(n) - 1e-9)), 1, n);
    curve.points.push_back({f, aggregate(metric, std::span<const double>(errors.data(), keep))});
  }
  return curve;
}

}  // namespace detail

/// Metric over the least-uncertain fraction of pixels, for each fraction.
/// Uncertainty ties keep the input order.
inline SparsificationCurve sparsification(std::span<const EvalRecord> records, Metric metric,
                                          std::span<const double> fractions) {
  check_records(records);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return records[i].uncertainty < records[j].uncertainty;
  });
  return detail::curve_from_order(metric, records, order, fractions);
}

inline SparsificationCurve sparsification(std::span<const EvalRecord> records, Metric metric) {
  return sparsification(records, metric, default_fractions());
}

/// Same as sparsification, ranked by each pixel's true error.
inline SparsificationCurve oracle_curve(std::span<const EvalRecord> records, Metric metric,
                                        std::span<const double> fractions) {
  check_records(records);
  std::vector<double> err(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) err[i] = pixel_error(metric, records[i].pred, records[i].gt);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return err[i] < err[j]; });
  return detail::curve_from_order(metric, records, order, fractions);
}

inline SparsificationCurve oracle_curve(std::span<const EvalRecord> records, Metric metric) {
  return oracle_curve(records, metric, default_fractions());
}

/// Trapezoidal area over the fraction axis. The first point's value is
/// repeated at fraction 0, and the area is divided by the covered width.
inline double auc(const SparsificationCurve& curve) {
  const auto& p = curve.points;
  require(p.size() >= 2, "auc: need at least two curve points");
  double area = p.front().fraction * p.front().value;
  for (std::size_t i = 1; i < p.size(); ++i) {
    area += 0.5 * (p[i].fraction - p[i - 1].fraction) * (p[i].value + p[i - 1].value);
  }
  return area / p.back().fraction;
}

/// Per pixel, the best of the first `count` hypotheses; then aggregate.
inline double oracle_multihyp(std::span<const EvalRecord> records, int count, Metric metric) {
  check_records(records);
  require(count >= 1, "oracle_multihyp: hypothesis count must be >= 1");
  std::vector<double> errors;
  errors.reserve(records.size());
  for (const auto& r : records) {
    require(static_cast<int>(r.hypotheses.size()) >= count, "oracle_multihyp: record has too few hypotheses");
    double best = INFINITY;
    for (int m = 0; m < count; ++m) {
      require(r.hypotheses[m] > 0.0, "oracle_multihyp: hypotheses must be > 0");
      best = std::min(best, pixel_error(metric, r.hypotheses[m], r.gt));
    }
    errors.push_back(best);
  }
  return aggregate(metric, errors);
}

/// Average ranks (1-based), ties share their mean rank.
inline std::vector<double> fractional_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation (Pearson on average ranks).
inline double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "spearman: need two equal-length series");
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace ddepth
