#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rau/error.hpp"
#include "rau/matrix.hpp"
#include "rau/rng.hpp"

namespace rau {

// Raw (unnormalized) embeddings, one row per user or item.
using EmbeddingTable = Matrix;

inline constexpr std::size_t kDefaultEmbeddingDim = 64;
inline constexpr double kMinRowNorm = 1e-12;

inline void check_embedding_table(const EmbeddingTable& table) {
  require(table.cols() >= 2, "embedding dim must be at least 2, got ",
          table.cols());
  require(all_finite(table.values()), "embedding table has non-finite entries");
}

// Xavier-uniform with fan_in = fan_out = dim: U(-a, a), a = sqrt(6 / 2dim).
inline double xavier_bound(std::size_t dim) {
  return std::sqrt(6.0 / static_cast<double>(dim + dim));
}

inline EmbeddingTable init_xavier(std::size_t rows, std::size_t dim,
                                  std::uint64_t seed) {
  require(rows >= 1, "embedding table needs at least one row");
  require(dim >= 2, "embedding dim must be at least 2, got ", dim);
  const double a = xavier_bound(dim);
  EmbeddingTable table(rows, dim);
  Rng rng(seed);
  for (double& v : table.values()) {
    v = rng.uniform(-a, a);
  }
  return table;
}

// Unit-norm rows plus the norms they were divided by; the norms are what the
// backward pass through normalization needs.
struct NormalizedBatch {
  Matrix vectors;
  std::vector<double> norms;

  std::size_t size() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }
  std::span<const double> row(std::size_t r) const { return vectors.row(r); }
};

inline NormalizedBatch l2_normalize(const Matrix& raw) {
  NormalizedBatch out{raw, std::vector<double>(raw.rows())};
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    const double norm = std::sqrt(squared_norm(raw.row(r)));
    require(norm >= kMinRowNorm, "cannot normalize row ", r,
            ": norm ", norm, " is below ", kMinRowNorm);
    out.norms[r] = norm;
    for (double& v : out.vectors.row(r)) {
      v /= norm;
    }
  }
  return out;
}

// Pulls a gradient taken w.r.t. the normalized rows back to the raw rows:
// g_raw = (I - x x^T) g / |e|.
inline Matrix normalize_backward(const NormalizedBatch& batch,
                                 const Matrix& grad_normalized) {
  require(batch.vectors.same_shape(grad_normalized),
          "gradient shape does not match normalized batch");
  Matrix grad_raw(grad_normalized.rows(), grad_normalized.cols());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto x = batch.row(r);
    const auto g = grad_normalized.row(r);
    const double radial = dot(x, g);
    auto out = grad_raw.row(r);
    const double inv = 1.0 / batch.norms[r];
    for (std::size_t c = 0; c < x.size(); ++c) {
      out[c] = (g[c] - radial * x[c]) * inv;
    }
  }
  return grad_raw;
}

// Squared euclidean distance over the condensed pair set j < k, ordered
// (0,1), (0,2), ..., (1,2), ... For unit rows this equals 2 - 2<x, y>; it is
// computed by direct subtraction and clamped to [0, 4].
inline std::vector<double> pairwise_sq_dists(const NormalizedBatch& batch) {
  const auto n = batch.size();
  require(n >= 2, "pairwise distances need at least 2 rows, got ", n);
  std::vector<double> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = j + 1; k < n; ++k) {
      out.push_back(std::min(4.0, squared_distance(batch.row(j), batch.row(k))));
    }
  }
  return out;
}

inline std::vector<double> batch_mean(const Matrix& rows) {
  require(rows.rows() >= 1, "batch mean of an empty batch");
  std::vector<double> mean(rows.cols(), 0.0);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    axpy(1.0, rows.row(r), mean);
  }
  const double inv = 1.0 / static_cast<double>(rows.rows());
  for (double& v : mean) {
    v *= inv;
  }
  return mean;
}

}  // namespace rau
