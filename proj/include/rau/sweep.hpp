#pragma once

#include <cstdio>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "rau/config.hpp"
#include "rau/error.hpp"
#include "rau/eval.hpp"
#include "rau/trainer.hpp"

namespace rau {

struct GammaRatio {
  double user = 0.5;
  double item = 0.5;
};

struct SweepGrid {
  std::vector<double> alpha_values;
  std::vector<double> beta_values;
  std::vector<GammaRatio> gamma_ratios;

  std::size_t size() const {
    return alpha_values.size() * beta_values.size() * gamma_ratios.size();
  }
};

// alpha in {0.0, 0.1, ..., 1.0}, beta in {1, ..., 15},
// gamma_user/gamma_item in {0.5/0.5, 0.6/0.4, ..., 0.9/0.1}.
inline SweepGrid reference_grid() {
  SweepGrid g;
  for (int a = 0; a <= 10; ++a) g.alpha_values.push_back(a / 10.0);
  for (int b = 1; b <= 15; ++b) g.beta_values.push_back(b);
  for (int u = 5; u <= 9; ++u) g.gamma_ratios.push_back({u / 10.0, (10 - u) / 10.0});
  return g;
}

inline void validate(const SweepGrid& g) {
  require(!g.alpha_values.empty() && !g.beta_values.empty() && !g.gamma_ratios.empty(),
          "sweep grid lists must be non-empty");
  for (double v : g.alpha_values) require(v >= 0.0, "alpha values must be non-negative");
  for (double v : g.beta_values) require(v >= 0.0, "beta values must be non-negative");
  for (const auto& r : g.gamma_ratios) {
    require(r.user >= 0.0 && r.item >= 0.0, "gamma values must be non-negative");
  }
}

// "0,0.5,1"
inline std::vector<double> parse_value_list(std::string_view text) {
  std::vector<double> out;
  for (const auto field : detail::split_fields(text, FileFormat::csv)) {
    out.push_back(detail::parse_double("list", std::string(field)));
  }
  return out;
}

// "0.5/0.5,0.9/0.1"
inline std::vector<GammaRatio> parse_gamma_list(std::string_view text) {
  std::vector<GammaRatio> out;
  for (const auto field : detail::split_fields(text, FileFormat::csv)) {
    const auto slash = field.find('/');
    require(slash != std::string_view::npos, "gamma ratio '", field,
            "' must look like user/item, e.g. 0.7/0.3");
    out.push_back({detail::parse_double("gamma", std::string(field.substr(0, slash))),
                   detail::parse_double("gamma", std::string(field.substr(slash + 1)))});
  }
  return out;
}

struct SweepResult {
  LossWeights weights;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double best_val_ndcg = 0.0;
  MetricsReport test;
};

// One fit per grid point (alpha outermost, gamma innermost), with up to
// `jobs` fits running at once. Results come back in grid order.
inline std::vector<SweepResult> run_sweep(const SplitDataset& split,
                                          const TrainConfig& base,
                                          const SweepGrid& grid,
                                          const std::vector<std::size_t>& ks,
                                          std::size_t jobs = 1) {
  validate(grid);
  std::vector<LossWeights> points;
  for (double a : grid.alpha_values) {
    for (double b : grid.beta_values) {
      for (const auto& g : grid.gamma_ratios) {
        points.push_back({a, b, g.user, g.item});
      }
    }
  }
  std::vector<SweepResult> results(points.size());
  std::mutex error_mutex;
  std::string first_error;
  auto run_one = [&](std::size_t p) {
    try {
      TrainConfig cfg = base;
      cfg.objective = Objective::rau;
      cfg.weights = points[p];
      auto fitted = fit(split, cfg);
      Trainer trainer(split, cfg);
      trainer.set_state(std::move(fitted.best));
      auto& r = results[p];
      r.weights = points[p];
      r.best_epoch = fitted.report.best_epoch;
      r.epochs_run = fitted.report.epochs_run;
      if (fitted.report.best_validation) {
        r.best_val_ndcg = fitted.report.best_validation->at(cfg.eval_k_for_stopping).ndcg;
      }
      r.test = trainer.evaluate(EvalPart::test, ks);
    } catch (const std::exception& e) {
      std::lock_guard lock(error_mutex);
      if (first_error.empty()) first_error = e.what();
    }
  };
  // Each worker takes every jobs-th grid point; fits share only the split.
  parallel_for(std::max<std::size_t>(jobs, 1), std::max<std::size_t>(jobs, 1),
               [&](std::size_t begin, std::size_t end) {
    for (std::size_t w = begin; w < end; ++w) {
      for (std::size_t p = w; p < points.size(); p += std::max<std::size_t>(jobs, 1)) {
        run_one(p);
      }
    }
  });
  require(first_error.empty(), "sweep failed: ", first_error);
  return results;
}

// Index of the row with the highest best validation NDCG (first on ties).
inline std::size_t best_sweep_row(const std::vector<SweepResult>& rows) {
  require(!rows.empty(), "empty sweep");
  std::size_t best = 0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].best_val_ndcg > rows[best].best_val_ndcg) best = k;
  }
  return best;
}

inline std::string sweep_csv(const std::vector<SweepResult>& rows,
                             std::size_t stopping_k) {
  std::string out = "alpha,beta,gamma_user,gamma_item,best_epoch,epochs_run,best_val_ndcg@" +
                    std::to_string(stopping_k);
  if (!rows.empty()) {
    for (const auto& m : rows.front().test.per_k) {
      out += ",test_recall@" + std::to_string(m.k) + ",test_ndcg@" + std::to_string(m.k);
    }
  }
  out += ",best\n";
  const auto best = rows.empty() ? 0 : best_sweep_row(rows);
  char cell[192];
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    std::snprintf(cell, sizeof(cell), "%.10g,%.10g,%.10g,%.10g,%zu,%zu,%.10g",
                  row.weights.alpha, row.weights.beta, row.weights.gamma_user,
                  row.weights.gamma_item, row.best_epoch, row.epochs_run,
                  row.best_val_ndcg);
    out += cell;
    for (const auto& m : row.test.per_k) {
      std::snprintf(cell, sizeof(cell), ",%.10g,%.10g", m.recall, m.ndcg);
      out += cell;
    }
    out += r == best ? ",1\n" : ",0\n";
  }
  return out;
}

}  // namespace rau
