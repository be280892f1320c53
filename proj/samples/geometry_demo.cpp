// Three points on the unit circle: two fixed, one swept around. Prints the
// uniformity loss and kernel variance every 30 degrees and the minimizer.

#include <cstdio>
#include <vector>

#include "rau/geometry.hpp"

int main() {
  namespace geo = rau::geometry;
  const std::vector<double> fixed{0.0, 120.0};
  const auto rows = geo::sweep_moving_point(fixed, 1.0);

  std::printf("%8s %14s %16s\n", "angle", "uniform_loss", "kernel_variance");
  for (const auto& r : rows) {
    if (static_cast<int>(r.moving_angle) % 30 == 0) {
      std::printf("%8.0f %14.6f %16.3e\n", r.moving_angle, r.uniform_loss, r.kernel_variance);
    }
  }

  const auto report = geo::verify_low_variance_claim(rows);
  const auto clustered = geo::config_metrics({{0.0, 0.0, 180.0}});
  std::printf("\nminimum at %.0f degrees: loss %.6f, variance %.3e\n", report.min_loss_angle,
              report.min_uniform_loss, report.variance_at_min);
  std::printf("clustered {0, 0, 180}: loss %.6f, variance %.6f\n", clustered.uniform_loss,
              clustered.kernel_variance);
  if (report.rank_correlation) {
    std::printf("spearman(loss, variance) = %.4f\n", *report.rank_correlation);
  }
}
