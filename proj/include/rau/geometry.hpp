#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rau/error.hpp"
#include "rau/hypersphere.hpp"
#include "rau/losses.hpp"

namespace rau::geometry {

// Points on the unit circle, given by angle in degrees.
struct CircleConfig {
  std::vector<double> angles;
};

struct CircleMetrics {
  double uniform_loss = 0.0;
  double kernel_variance = 0.0;
};

inline NormalizedBatch embed(const CircleConfig& cfg) {
  require(cfg.angles.size() >= 2, "circle configuration needs at least 2 points, got ",
          cfg.angles.size());
  NormalizedBatch batch{Matrix(cfg.angles.size(), 2),
                        std::vector<double>(cfg.angles.size(), 1.0)};
  for (std::size_t k = 0; k < cfg.angles.size(); ++k) {
    const double deg = cfg.angles[k];
    require(std::isfinite(deg), "angle ", k, " is not finite");
    const double rad = deg * std::numbers::pi / 180.0;
    batch.vectors(k, 0) = std::cos(rad);
    batch.vectors(k, 1) = std::sin(rad);
  }
  return batch;
}

inline CircleMetrics config_metrics(const CircleConfig& cfg) {
  const auto stats = kernel_stats(embed(cfg));
  return {std::log(stats.mean + kUniformEpsilon), stats.variance};
}

struct SweepRow {
  double moving_angle = 0.0;
  double uniform_loss = 0.0;
  double kernel_variance = 0.0;
};

// Adds one moving point to `fixed` and scans it over [0, 360) in `step`
// degree increments.
inline std::vector<SweepRow> sweep_moving_point(std::span<const double> fixed,
                                                double step) {
  require(std::isfinite(step) && step > 0.0, "sweep step must be positive, got ",
          step);
  const double count = std::round(360.0 / step);
  require(count >= 1.0 && std::abs(count * step - 360.0) <= 1e-9,
          "sweep step ", step, " does not divide 360 evenly");
  require(!fixed.empty(), "sweep needs at least one fixed point");

  const auto n = static_cast<std::size_t>(count);
  std::vector<SweepRow> rows;
  rows.reserve(n);
  CircleConfig cfg{std::vector<double>(fixed.begin(), fixed.end())};
  cfg.angles.push_back(0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double angle = static_cast<double>(s) * step;
    cfg.angles.back() = angle;
    const auto m = config_metrics(cfg);
    rows.push_back({angle, m.uniform_loss, m.kernel_variance});
  }
  return rows;
}

// Average ranks (1-based), ties share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    order[k] = k;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t stop = start + 1;
    while (stop < order.size() && values[order[stop]] == values[order[start]]) {
      ++stop;
    }
    const double rank = 0.5 * static_cast<double>(start + stop - 1) + 1.0;
    for (std::size_t k = start; k < stop; ++k) {
      ranks[order[k]] = rank;
    }
    start = stop;
  }
  return ranks;
}

// Spearman's rho as the Pearson correlation of average ranks. Empty when
// either series is constant.
inline std::optional<double> spearman(std::span<const double> x,
                                      std::span<const double> y) {
  require(x.size() == y.size(), "spearman: series lengths differ");
  if (x.size() < 2) {
    return std::nullopt;
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < rx.size(); ++k) {
    mx += rx[k];
    my += ry[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < rx.size(); ++k) {
    sxy += (rx[k] - mx) * (ry[k] - my);
    sxx += (rx[k] - mx) * (rx[k] - mx);
    syy += (ry[k] - my) * (ry[k] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    return std::nullopt;
  }
  return sxy / std::sqrt(sxx * syy);
}

struct ClaimReport {
  double min_loss_angle = 0.0;
  double min_uniform_loss = 0.0;
  double variance_at_min = 0.0;
  double max_variance = 0.0;
  std::optional<double> rank_correlation;
};

inline ClaimReport verify_low_variance_claim(std::span<const SweepRow> sweep) {
  require(!sweep.empty(), "empty sweep");
  ClaimReport report;
  const auto best = std::min_element(
      sweep.begin(), sweep.end(),
      [](const SweepRow& a, const SweepRow& b) { return a.uniform_loss < b.uniform_loss; });
  report.min_loss_angle = best->moving_angle;
  report.min_uniform_loss = best->uniform_loss;
  report.variance_at_min = best->kernel_variance;
  std::vector<double> loss;
  std::vector<double> variance;
  for (const auto& row : sweep) {
    loss.push_back(row.uniform_loss);
    variance.push_back(row.kernel_variance);
    report.max_variance = std::max(report.max_variance, row.kernel_variance);
  }
  report.rank_correlation = spearman(loss, variance);
  return report;
}

inline std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "moving_angle,uniform_loss,kernel_variance\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%.10g,%.17g,%.17g\n", r.moving_angle,
                  r.uniform_loss, r.kernel_variance);
    out += line;
  }
  return out;
}

inline nlohmann::json to_json(const ClaimReport& report) {
  nlohmann::json out = {
      {"min_loss_angle", report.min_loss_angle},
      {"min_uniform_loss", report.min_uniform_loss},
      {"variance_at_min", report.variance_at_min},
      {"max_variance", report.max_variance},
  };
  if (report.rank_correlation) {
    out["rank_correlation"] = *report.rank_correlation;
  } else {
    out["rank_correlation"] = nullptr;
  }
  return out;
}

}  // namespace rau::geometry
