#pragma once

// Brute-force reference implementations used only by tests. They work on
// nested std::vector, iterate over ordered pairs, and evaluate the textbook
// formulas directly; nothing here calls into the library's loss code.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rau/matrix.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Rows = std::vector<Vec>;

inline Rows to_rows(const rau::Matrix& m) {
  Rows out(m.rows(), Vec(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out[r][c] = m(r, c);
    }
  }
  return out;
}

inline rau::Matrix to_matrix(const Rows& rows) {
  rau::Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(r, c) = rows[r][c];
    }
  }
  return m;
}

inline Rows normalize(const Rows& rows) {
  Rows out = rows;
  for (auto& row : out) {
    double sq = 0.0;
    for (double v : row) sq += v * v;
    const double n = std::sqrt(sq);
    for (double& v : row) v = v / n;
  }
  return out;
}

inline double dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return s;
}

// Kernel values over ordered pairs j != k; every unordered pair appears twice,
// which leaves means and variances unchanged.
inline Vec ordered_kernels(const Rows& x) {
  Vec out;
  for (std::size_t j = 0; j < x.size(); ++j) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (j != k) out.push_back(std::exp(-2.0 * dist(x[j], x[k])));
    }
  }
  return out;
}

inline double mean(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double align(const Rows& u, const Rows& i) {
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += dist(u[k], i[k]);
  return s / static_cast<double>(u.size());
}

inline double uniform(const Rows& x) {
  return std::log(mean(ordered_kernels(x)) + 1e-12);
}

inline double variance(const Rows& x) {
  const Vec k = ordered_kernels(x);
  const double m = mean(k);
  double s = 0.0;
  for (double v : k) s += (v - m) * (v - m);
  return s / static_cast<double>(k.size());
}

inline double ra(const Rows& u, const Rows& i) {
  const std::size_t d = u[0].size();
  double s = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    double diff = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) diff += u[k][c] - i[k][c];
    diff /= static_cast<double>(u.size());
    s += diff * diff;
  }
  return s;
}

struct Weights {
  double alpha, beta, gamma_user, gamma_item;
};

// Whole objective from raw rows.
inline double rau_total(const Rows& users_raw, const Rows& items_raw, const Weights& w) {
  const Rows u = normalize(users_raw);
  const Rows i = normalize(items_raw);
  return align(u, i) + w.gamma_user * uniform(u) + w.gamma_item * uniform(i) +
         w.alpha * ra(u, i) + w.beta * (variance(u) + variance(i));
}

inline double bpr(const Vec& pos, const Vec& neg) {
  double s = 0.0;
  for (std::size_t k = 0; k < pos.size(); ++k) {
    const double sig = 1.0 / (1.0 + std::exp(-(pos[k] - neg[k])));
    s += -std::log(sig);
  }
  return s / static_cast<double>(pos.size());
}

// Central differences of f over every entry of x.
inline rau::Matrix finite_difference(const std::function<double(const rau::Matrix&)>& f,
                                     const rau::Matrix& x, double h = 1e-4) {
  rau::Matrix grad(x.rows(), x.cols());
  rau::Matrix probe = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double orig = probe(r, c);
      probe(r, c) = orig + h;
      const double up = f(probe);
      probe(r, c) = orig - h;
      const double down = f(probe);
      probe(r, c) = orig;
      grad(r, c) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

// max_k |a_k - b_k| / max_k max(|a_k|, |b_k|): error relative to the scale of
// the gradient, so near-zero entries do not blow up the ratio.
inline double max_relative_error(const rau::Matrix& a, const rau::Matrix& b) {
  double err = 0.0;
  double scale = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) {
    err = std::max(err, std::abs(av[k] - bv[k]));
    scale = std::max({scale, std::abs(av[k]), std::abs(bv[k])});
  }
  return scale == 0.0 ? err : err / scale;
}

inline rau::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen,
                                 double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  rau::Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(gen);
  return m;
}

}  // namespace oracle
