#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rau/error.hpp"
#include "rau/hypersphere.hpp"
#include "rau/matrix.hpp"

namespace rau {

// Added inside the uniformity log. Kernel values are at least e^-8, so this
// never changes a result beyond rounding; it only guards log(0).
inline constexpr double kUniformEpsilon = 1e-12;

// Coefficients of the combined objective
//   total = align + gamma_user * U(users) + gamma_item * U(items)
//         + alpha * RA + beta * RU.
struct LossWeights {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma_user = 0.5;
  double gamma_item = 0.5;

  bool operator==(const LossWeights&) const = default;
};

inline constexpr LossWeights kDirectAuWeights{0.0, 0.0, 0.5, 0.5};

inline void validate(const LossWeights& w) {
  for (double v : {w.alpha, w.beta, w.gamma_user, w.gamma_item}) {
    require(std::isfinite(v) && v >= 0.0,
            "loss weights must be finite and non-negative (alpha=", w.alpha,
            " beta=", w.beta, " gamma_user=", w.gamma_user,
            " gamma_item=", w.gamma_item, ")");
  }
}

// Non-fatal: the user/item uniformity weights are expected to sum to one.
inline std::optional<std::string> weights_warning(const LossWeights& w) {
  const double sum = w.gamma_user + w.gamma_item;
  if (std::abs(sum - 1.0) > 1e-9) {
    return detail::concat("gamma_user + gamma_item = ", sum,
                          " (expected 1); uniformity is rescaled");
  }
  return std::nullopt;
}

struct LossBreakdown {
  double align = 0.0;
  double weighted_uniform = 0.0;
  double ra = 0.0;
  double ru = 0.0;
  double total = 0.0;
};

// Gaussian kernel exp(-2 d) over the condensed pair set of one batch, with
// its mean and population variance.
struct KernelStats {
  std::vector<double> kernels;
  double mean = 0.0;
  double variance = 0.0;
};

inline KernelStats kernel_stats(const NormalizedBatch& batch) {
  KernelStats stats;
  stats.kernels = pairwise_sq_dists(batch);
  double sum = 0.0;
  for (double& k : stats.kernels) {
    k = std::exp(-2.0 * k);
    sum += k;
  }
  const auto pairs = static_cast<double>(stats.kernels.size());
  stats.mean = sum / pairs;
  double sq = 0.0;
  for (double k : stats.kernels) {
    const double dev = k - stats.mean;
    sq += dev * dev;
  }
  stats.variance = sq / pairs;
  return stats;
}

namespace detail {

inline void require_paired(const NormalizedBatch& users,
                           const NormalizedBatch& items) {
  require(users.size() == items.size(), "user batch has ", users.size(),
          " rows but item batch has ", items.size());
  require(users.size() >= 1, "empty batch");
  require(users.dim() == items.dim(), "user dim ", users.dim(),
          " != item dim ", items.dim());
}

inline double uniform_from(const KernelStats& stats) {
  return std::log(stats.mean + kUniformEpsilon);
}

}  // namespace detail

// Mean squared distance between positionally paired user and item rows.
inline double align_loss(const NormalizedBatch& users,
                         const NormalizedBatch& items) {
  detail::require_paired(users, items);
  double sum = 0.0;
  for (std::size_t k = 0; k < users.size(); ++k) {
    sum += squared_distance(users.row(k), items.row(k));
  }
  return sum / static_cast<double>(users.size());
}

// log of the mean pairwise Gaussian potential; 0 when all points coincide,
// more negative as the points spread out.
inline double uniform_part(const NormalizedBatch& batch) {
  return detail::uniform_from(kernel_stats(batch));
}

inline double weighted_uniform_loss(const NormalizedBatch& users,
                                    const NormalizedBatch& items,
                                    double gamma_user, double gamma_item) {
  return gamma_user * uniform_part(users) + gamma_item * uniform_part(items);
}

// Squared norm of the batch-mean user-item difference.
inline double ra_loss(const NormalizedBatch& users,
                      const NormalizedBatch& items) {
  detail::require_paired(users, items);
  const auto mu = batch_mean(users.vectors);
  const auto mi = batch_mean(items.vectors);
  double sum = 0.0;
  for (std::size_t c = 0; c < mu.size(); ++c) {
    const double diff = mu[c] - mi[c];
    sum += diff * diff;
  }
  return sum;
}

// Population variance of the pairwise kernel values of one batch.
inline double kernel_variance(const NormalizedBatch& batch) {
  return kernel_stats(batch).variance;
}

// Variance of the pairwise kernel values, summed over the user and item
// batches. The mean squared deviation is used: the signed mean deviation is
// identically zero.
inline double ru_loss(const NormalizedBatch& users,
                      const NormalizedBatch& items) {
  return kernel_variance(users) + kernel_variance(items);
}

struct RauGradient {
  Matrix users;
  Matrix items;
};

struct RauEvaluation {
  LossBreakdown loss;
  RauGradient grad;
};

namespace detail {

inline void require_raw_pair(const Matrix& users_raw, const Matrix& items_raw) {
  require(users_raw.rows() == items_raw.rows(), "user batch has ",
          users_raw.rows(), " rows but item batch has ", items_raw.rows());
  require(users_raw.cols() == items_raw.cols(), "user dim ", users_raw.cols(),
          " != item dim ", items_raw.cols());
  require(users_raw.rows() >= 2, "combined objective needs a batch of at least",
          " 2 pairs, got ", users_raw.rows());
}

// Accumulates d/dx of (gamma * log(mean K + eps) + beta * Var K) into grad,
// where K are the condensed pair kernels of `batch`.
inline void accumulate_uniform_grad(const NormalizedBatch& batch,
                                    const KernelStats& stats, double gamma,
                                    double beta, Matrix& grad) {
  if (gamma == 0.0 && beta == 0.0) {
    return;
  }
  const auto n = batch.size();
  const auto pairs = static_cast<double>(stats.kernels.size());
  const double d_log = gamma / (pairs * (stats.mean + kUniformEpsilon));
  const double d_var = beta * 2.0 / pairs;
  const auto dim = batch.dim();
  std::size_t p = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto xj = batch.row(j);
    auto gj = grad.row(j);
    for (std::size_t k = j + 1; k < n; ++k, ++p) {
      const double kernel = stats.kernels[p];
      const double d_kernel = d_log + d_var * (kernel - stats.mean);
      // dK/d(dist) = -2K, d(dist)/dx_j = 2 (x_j - x_k)
      const double coef = d_kernel * (-4.0 * kernel);
      const auto xk = batch.row(k);
      auto gk = grad.row(k);
      for (std::size_t c = 0; c < dim; ++c) {
        const double step = coef * (xj[c] - xk[c]);
        gj[c] += step;
        gk[c] -= step;
      }
    }
  }
}

}  // namespace detail

// Normalizes both raw batches once and evaluates every term of the combined
// objective; with want_grad, also the exact gradient w.r.t. the raw rows.
inline RauEvaluation evaluate_rau(const Matrix& users_raw,
                                  const Matrix& items_raw,
                                  const LossWeights& w, bool want_grad) {
  detail::require_raw_pair(users_raw, items_raw);
  validate(w);
  const auto users = l2_normalize(users_raw);
  const auto items = l2_normalize(items_raw);
  const auto user_stats = kernel_stats(users);
  const auto item_stats = kernel_stats(items);

  RauEvaluation out;
  auto& loss = out.loss;
  loss.align = align_loss(users, items);
  loss.weighted_uniform = w.gamma_user * detail::uniform_from(user_stats) +
                          w.gamma_item * detail::uniform_from(item_stats);
  loss.ra = ra_loss(users, items);
  loss.ru = user_stats.variance + item_stats.variance;
  loss.total = loss.align + loss.weighted_uniform + w.alpha * loss.ra +
               w.beta * loss.ru;
  if (!want_grad) {
    return out;
  }

  const auto batch = users.size();
  const auto dim = users.dim();
  const double inv_b = 1.0 / static_cast<double>(batch);
  Matrix gu(batch, dim);
  Matrix gi(batch, dim);

  // align: (1/B) sum |u_k - i_k|^2
  for (std::size_t k = 0; k < batch; ++k) {
    const auto u = users.row(k);
    const auto i = items.row(k);
    auto du = gu.row(k);
    auto di = gi.row(k);
    for (std::size_t c = 0; c < dim; ++c) {
      const double step = 2.0 * inv_b * (u[c] - i[c]);
      du[c] += step;
      di[c] -= step;
    }
  }

  // RA: |mean(u) - mean(i)|^2
  if (w.alpha != 0.0) {
    const auto mu = batch_mean(users.vectors);
    const auto mi = batch_mean(items.vectors);
    for (std::size_t c = 0; c < dim; ++c) {
      const double step = w.alpha * 2.0 * inv_b * (mu[c] - mi[c]);
      for (std::size_t k = 0; k < batch; ++k) {
        gu(k, c) += step;
        gi(k, c) -= step;
      }
    }
  }

  detail::accumulate_uniform_grad(users, user_stats, w.gamma_user, w.beta, gu);
  detail::accumulate_uniform_grad(items, item_stats, w.gamma_item, w.beta, gi);

  out.grad.users = normalize_backward(users, gu);
  out.grad.items = normalize_backward(items, gi);
  return out;
}

inline LossBreakdown rau_loss(const Matrix& users_raw, const Matrix& items_raw,
                              const LossWeights& w) {
  return evaluate_rau(users_raw, items_raw, w, false).loss;
}

inline RauGradient rau_gradient(const Matrix& users_raw,
                                const Matrix& items_raw, const LossWeights& w) {
  return evaluate_rau(users_raw, items_raw, w, true).grad;
}

// -log(sigmoid(x)), stable for large |x|.
inline double softplus_neg(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(-x, 0.0);
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Mean of -log(sigmoid(pos - neg)).
inline double bpr_loss(std::span<const double> pos_scores,
                       std::span<const double> neg_scores) {
  require(pos_scores.size() == neg_scores.size(), "bpr: ", pos_scores.size(),
          " positive scores but ", neg_scores.size(), " negative scores");
  require(!pos_scores.empty(), "bpr: empty batch");
  double sum = 0.0;
  for (std::size_t k = 0; k < pos_scores.size(); ++k) {
    sum += softplus_neg(pos_scores[k] - neg_scores[k]);
  }
  return sum / static_cast<double>(pos_scores.size());
}

struct BprEvaluation {
  double loss = 0.0;
  Matrix grad_users;
  Matrix grad_pos;
  Matrix grad_neg;
};

// BPR on raw dot-product scores s(u, i) = <e_u, e_i>, with the gradient
// w.r.t. each gathered row.
inline BprEvaluation evaluate_bpr(const Matrix& users_raw,
                                  const Matrix& pos_raw,
                                  const Matrix& neg_raw) {
  require(users_raw.same_shape(pos_raw) && users_raw.same_shape(neg_raw),
          "bpr: user, positive and negative batches must share a shape");
  const auto batch = users_raw.rows();
  std::vector<double> pos(batch);
  std::vector<double> neg(batch);
  for (std::size_t k = 0; k < batch; ++k) {
    pos[k] = dot(users_raw.row(k), pos_raw.row(k));
    neg[k] = dot(users_raw.row(k), neg_raw.row(k));
  }
  BprEvaluation out;
  out.loss = bpr_loss(pos, neg);
  const auto dim = users_raw.cols();
  out.grad_users = Matrix(batch, dim);
  out.grad_pos = Matrix(batch, dim);
  out.grad_neg = Matrix(batch, dim);
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t k = 0; k < batch; ++k) {
    const double coef = -sigmoid(neg[k] - pos[k]) * inv_b;
    const auto u = users_raw.row(k);
    const auto ip = pos_raw.row(k);
    const auto in = neg_raw.row(k);
    auto gu = out.grad_users.row(k);
    auto gp = out.grad_pos.row(k);
    auto gn = out.grad_neg.row(k);
    for (std::size_t c = 0; c < dim; ++c) {
      gu[c] = coef * (ip[c] - in[c]);
      gp[c] = coef * u[c];
      gn[c] = -coef * u[c];
    }
  }
  return out;
}

}  // namespace rau
