#pragma once

#include <cmath>
#include <cstdint>

#include "rau/error.hpp"
#include "rau/matrix.hpp"

namespace rau {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::uint64_t step_count = 0;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols)
      : first_moment(rows, cols), second_moment(rows, cols) {}
};

// Adam with bias correction and decoupled weight decay: the parameters are
// first shrunk by (1 - lr * weight_decay), then moved by the Adam step.
// Every entry is updated, including rows whose gradient is zero this step.
inline void adam_step(Matrix& params, const Matrix& grads, AdamState& state,
                      double lr, double weight_decay) {
  require(params.same_shape(grads), "adam: gradient shape ", grads.rows(), "x",
          grads.cols(), " != parameter shape ", params.rows(), "x",
          params.cols());
  if (state.first_moment.empty() && !params.empty()) {
    state = AdamState(params.rows(), params.cols());
  }
  require(params.same_shape(state.first_moment),
          "adam: optimizer state shape does not match parameters");
  const auto g = grads.values();
  for (std::size_t k = 0; k < g.size(); ++k) {
    require(std::isfinite(g[k]), "adam: non-finite gradient at row ",
            k / grads.cols(), " col ", k % grads.cols(),
            "; try a smaller learning rate");
  }

  ++state.step_count;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  const double decay = 1.0 - lr * weight_decay;

  auto p = params.values();
  auto m = state.first_moment.values();
  auto v = state.second_moment.values();
  for (std::size_t k = 0; k < p.size(); ++k) {
    m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g[k];
    v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g[k] * g[k];
    const double m_hat = m[k] / correction1;
    const double v_hat = v[k] / correction2;
    p[k] = p[k] * decay - lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

}  // namespace rau
