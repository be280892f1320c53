#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rau/config.hpp"
#include "rau/data.hpp"
#include "rau/encoders.hpp"
#include "rau/error.hpp"
#include "rau/eval.hpp"
#include "rau/hypersphere.hpp"
#include "rau/losses.hpp"
#include "rau/optim.hpp"
#include "rau/parallel.hpp"
#include "rau/rng.hpp"

namespace rau {

// Seed streams derived from TrainConfig::seed.
namespace seed_stream {
inline constexpr std::uint64_t user_init = 1;
inline constexpr std::uint64_t item_init = 2;
inline constexpr std::uint64_t probe = 3;
inline constexpr std::uint64_t epoch_order = 1'000'000;
inline constexpr std::uint64_t negatives = 2'000'000;
}  // namespace seed_stream

struct EpochDiagnostics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double align = 0.0;
  double uniform_user = 0.0;
  double uniform_item = 0.0;
  double kernel_variance_user = 0.0;
  double kernel_variance_item = 0.0;
  double wall_time_s = 0.0;
};

struct EpochRecord {
  EpochDiagnostics diagnostics;
  std::optional<MetricsReport> validation;
};

struct TrainReport {
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  EpochDiagnostics initial;
  std::vector<EpochRecord> epochs;
  std::optional<MetricsReport> best_validation;
  double total_time_s = 0.0;
};

struct ModelState {
  EmbeddingTable users;
  EmbeddingTable items;
};

// Patience counter on a maximized metric: stop once `patience` consecutive
// updates fail to beat the best value seen.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when `metric` is a new best.
  bool update(double metric) {
    ++updates_;
    if (metric > best_) {
      best_ = metric;
      best_update_ = updates_;
      bad_updates_ = 0;
      return true;
    }
    ++bad_updates_;
    return false;
  }

  bool should_stop() const { return bad_updates_ >= patience_; }
  double best() const { return best_; }
  // 1-based index of the update that produced best(); 0 before any.
  std::size_t best_update() const { return best_update_; }

 private:
  std::size_t patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t updates_ = 0;
  std::size_t best_update_ = 0;
  std::size_t bad_updates_ = 0;
};

// Owns the embedding tables and optimizer state for one training run and
// executes epochs of minibatch gradient descent on the selected objective.
class Trainer {
 public:
  Trainer(const SplitDataset& split, TrainConfig cfg)
      : split_(split), cfg_(std::move(cfg)) {
    validate(cfg_);
    require(!split_.train.empty(), "training set is empty");
    const auto weights = cfg_.effective_weights();
    if (cfg_.objective != Objective::bpr) {
      if (auto warning = weights_warning(weights)) {
        std::cerr << "warning: " << *warning << '\n';
      }
    } else {
      require(split_.train.num_items() >= 2, "bpr needs at least two items");
    }
    num_threads_ = resolve_num_threads(cfg_.single_thread);
    state_.users = init_xavier(split_.train.num_users(), cfg_.dim,
                               derive_seed(cfg_.seed, seed_stream::user_init));
    state_.items = init_xavier(split_.train.num_items(), cfg_.dim,
                               derive_seed(cfg_.seed, seed_stream::item_init));
    user_adam_ = AdamState(state_.users.rows(), state_.users.cols());
    item_adam_ = AdamState(state_.items.rows(), state_.items.cols());
    if (cfg_.encoder == EncoderKind::lightgcn) {
      adjacency_ = build_norm_adjacency(split_.train);
    }
    Rng probe_rng(derive_seed(cfg_.seed, seed_stream::probe));
    probe_users_ = sample_probe(split_.train.num_users(), probe_rng);
    probe_items_ = sample_probe(split_.train.num_items(), probe_rng);
  }

  const TrainConfig& config() const { return cfg_; }
  const ModelState& state() const { return state_; }
  void set_state(ModelState state) { state_ = std::move(state); }

  // Final user and item representations under the configured encoder.
  std::pair<Matrix, Matrix> representations() const {
    if (cfg_.encoder == EncoderKind::mf) {
      return {state_.users, state_.items};
    }
    return lightgcn_full(state_.users, state_.items, *adjacency_,
                         GraphEncoderConfig{cfg_.num_layers}, num_threads_);
  }

  // One pass over the training pairs followed by diagnostics. `epoch` is
  // 1-based and selects the batch order and negative samples.
  EpochDiagnostics train_epoch(std::size_t epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches = epoch_batches(
        split_.train, cfg_.batch_size,
        derive_seed(cfg_.seed, seed_stream::epoch_order + epoch));
    Rng negative_rng(derive_seed(cfg_.seed, seed_stream::negatives + epoch));
    Matrix grad_users(state_.users.rows(), state_.users.cols());
    Matrix grad_items(state_.items.rows(), state_.items.cols());
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      grad_users.fill(0.0);
      grad_items.fill(0.0);
      loss_sum += batch_gradient(batch, negative_rng, grad_users, grad_items);
      adam_step(state_.users, grad_users, user_adam_, cfg_.lr, cfg_.weight_decay);
      adam_step(state_.items, grad_items, item_adam_, cfg_.lr, cfg_.weight_decay);
    }
    const auto stop = std::chrono::steady_clock::now();
    auto diag = diagnostics();
    diag.epoch = epoch;
    diag.train_loss = batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size());
    diag.wall_time_s = std::chrono::duration<double>(stop - start).count();
    return diag;
  }

  // Alignment over all training pairs; uniformity and kernel variance over
  // the fixed probe sample of users and items.
  EpochDiagnostics diagnostics() const {
    const auto [user_reps, item_reps] = representations();
    EpochDiagnostics d;
    double align_sum = 0.0;
    for (const auto& x : split_.train.interactions()) {
      const auto u = user_reps.row(x.user);
      const auto i = item_reps.row(x.item);
      const double nu = std::sqrt(squared_norm(u));
      const double ni = std::sqrt(squared_norm(i));
      double s = 0.0;
      for (std::size_t c = 0; c < u.size(); ++c) {
        const double diff = u[c] / nu - i[c] / ni;
        s += diff * diff;
      }
      align_sum += s;
    }
    d.align = align_sum / static_cast<double>(split_.train.size());
    if (probe_users_.size() >= 2) {
      const auto stats = kernel_stats(l2_normalize(gather_rows(user_reps, probe_users_)));
      d.uniform_user = std::log(stats.mean + kUniformEpsilon);
      d.kernel_variance_user = stats.variance;
    }
    if (probe_items_.size() >= 2) {
      const auto stats = kernel_stats(l2_normalize(gather_rows(item_reps, probe_items_)));
      d.uniform_item = std::log(stats.mean + kUniformEpsilon);
      d.kernel_variance_item = stats.variance;
    }
    return d;
  }

  MetricsReport evaluate(EvalPart part, std::vector<std::size_t> ks) const {
    const auto [user_reps, item_reps] = representations();
    EvalOptions options;
    options.ks = std::move(ks);
    options.score_mode = cfg_.effective_score_mode();
    options.exclude_validation_at_test = cfg_.exclude_validation_at_test;
    options.num_threads = num_threads_;
    return rau::evaluate(split_, user_reps, item_reps, part, options);
  }

 private:
  std::vector<Index> sample_probe(std::size_t n, Rng& rng) const {
    std::vector<Index> all(n);
    for (std::size_t k = 0; k < n; ++k) {
      all[k] = static_cast<Index>(k);
    }
    if (n > cfg_.probe_size) {
      rng.shuffle(std::span<Index>(all));
      all.resize(cfg_.probe_size);
      std::sort(all.begin(), all.end());
    }
    return all;
  }

  Index sample_negative(Index user, Index positive, Rng& rng) const {
    const auto n = split_.train.num_items();
    if (cfg_.bpr_full_history_rejection) {
      require(split_.train.items_of(user).size() < n, "user ", user,
              " has interacted with every item; no negative to sample");
    }
    while (true) {
      const auto j = static_cast<Index>(rng.below(n));
      if (j == positive) {
        continue;
      }
      if (cfg_.bpr_full_history_rejection && split_.train.contains(user, j)) {
        continue;
      }
      return j;
    }
  }

  // Accumulates the batch gradient w.r.t. the raw tables; returns the loss.
  double batch_gradient(const PositivePairBatch& batch, Rng& negative_rng,
                        Matrix& grad_users, Matrix& grad_items) const {
    const bool graph = cfg_.encoder == EncoderKind::lightgcn;
    std::optional<std::pair<Matrix, Matrix>> full;
    if (graph) {
      full = lightgcn_full(state_.users, state_.items, *adjacency_,
                           GraphEncoderConfig{cfg_.num_layers}, num_threads_);
    }
    const Matrix& user_source = graph ? full->first : state_.users;
    const Matrix& item_source = graph ? full->second : state_.items;
    // With the graph encoder gradients land on propagated rows first.
    Matrix prop_grad_users;
    Matrix prop_grad_items;
    if (graph) {
      prop_grad_users = Matrix(grad_users.rows(), grad_users.cols());
      prop_grad_items = Matrix(grad_items.rows(), grad_items.cols());
    }
    Matrix& gu = graph ? prop_grad_users : grad_users;
    Matrix& gi = graph ? prop_grad_items : grad_items;

    const auto users = gather_rows(user_source, batch.users);
    const auto items = gather_rows(item_source, batch.items);
    double loss = 0.0;
    if (cfg_.objective == Objective::bpr) {
      std::vector<Index> negatives(batch.size());
      for (std::size_t k = 0; k < batch.size(); ++k) {
        negatives[k] = sample_negative(batch.users[k], batch.items[k], negative_rng);
      }
      const auto neg = gather_rows(item_source, negatives);
      auto ev = evaluate_bpr(users, items, neg);
      scatter_add_rows(ev.grad_users, batch.users, gu);
      scatter_add_rows(ev.grad_pos, batch.items, gi);
      scatter_add_rows(ev.grad_neg, negatives, gi);
      loss = ev.loss;
    } else {
      auto ev = evaluate_rau(users, items, cfg_.effective_weights(), true);
      scatter_add_rows(ev.grad.users, batch.users, gu);
      scatter_add_rows(ev.grad.items, batch.items, gi);
      loss = ev.loss.total;
    }
    if (graph) {
      auto [bu, bi] = lightgcn_backward(*adjacency_, GraphEncoderConfig{cfg_.num_layers},
                                        prop_grad_users, prop_grad_items, num_threads_);
      grad_users = std::move(bu);
      grad_items = std::move(bi);
    }
    return loss;
  }

  const SplitDataset& split_;
  TrainConfig cfg_;
  std::size_t num_threads_ = 1;
  ModelState state_;
  AdamState user_adam_;
  AdamState item_adam_;
  std::optional<NormalizedAdjacency> adjacency_;
  std::vector<Index> probe_users_;
  std::vector<Index> probe_items_;
};

struct FitResult {
  TrainReport report;
  ModelState best;
};

// Trains until max_epochs or until validation NDCG@K (K = eval_k_for_stopping)
// has not improved for `patience` consecutive epochs, and returns the tables
// of the best epoch. In fixed-epoch mode the last epoch is kept.
// `on_epoch` is called after every epoch (may be empty).
inline FitResult fit(const SplitDataset& split, const TrainConfig& cfg,
                     const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  require(cfg.fixed_epochs || !split.validation.empty(),
          "validation set is empty: early stopping is impossible; ",
          "enable fixed-epoch mode (fixed_epochs = true)");
  const auto fit_start = std::chrono::steady_clock::now();
  Trainer trainer(split, cfg);
  FitResult result;
  result.report.initial = trainer.diagnostics();
  result.best = trainer.state();
  EarlyStopping stopper(cfg.patience);
  const std::vector<std::size_t> val_ks = {cfg.eval_k_for_stopping};

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord record;
    record.diagnostics = trainer.train_epoch(epoch);
    if (!split.validation.empty()) {
      record.validation = trainer.evaluate(EvalPart::validation, val_ks);
    }
    result.report.epochs.push_back(record);
    result.report.epochs_run = epoch;
    if (on_epoch) {
      on_epoch(record);
    }
    if (cfg.fixed_epochs) {
      result.report.best_epoch = epoch;
      result.report.best_validation = record.validation;
      result.best = trainer.state();
      continue;
    }
    const double metric = record.validation->at(cfg.eval_k_for_stopping).ndcg;
    if (stopper.update(metric)) {
      result.report.best_epoch = epoch;
      result.report.best_validation = record.validation;
      result.best = trainer.state();
    }
    if (stopper.should_stop()) {
      break;
    }
  }
  result.report.total_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - fit_start).count();
  return result;
}

// One row per epoch: diagnostics (wall time excluded so identical runs give
// identical files) and validation metrics at the stopping K.
inline std::string diagnostics_csv(const TrainReport& report, std::size_t k) {
  const auto ks = std::to_string(k);
  std::string out = "epoch,train_loss,align,uniform_user,uniform_item,"
                    "kernel_variance_user,kernel_variance_item,val_recall@" +
                    ks + ",val_ndcg@" + ks + "\n";
  char line[512];
  for (const auto& r : report.epochs) {
    const auto& d = r.diagnostics;
    double recall = std::nan("");
    double ndcg = std::nan("");
    if (r.validation) {
      recall = r.validation->at(k).recall;
      ndcg = r.validation->at(k).ndcg;
    }
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  d.epoch, d.train_loss, d.align, d.uniform_user, d.uniform_item,
                  d.kernel_variance_user, d.kernel_variance_item, recall, ndcg);
    out += line;
  }
  return out;
}

inline std::string timing_csv(const TrainReport& report) {
  std::string out = "epoch,wall_time_s\n";
  char line[64];
  for (const auto& r : report.epochs) {
    std::snprintf(line, sizeof(line), "%zu,%.6f\n", r.diagnostics.epoch,
                  r.diagnostics.wall_time_s);
    out += line;
  }
  return out;
}

inline nlohmann::json to_json(const EpochDiagnostics& d) {
  return {
      {"epoch", d.epoch},
      {"train_loss", d.train_loss},
      {"align", d.align},
      {"uniform_user", d.uniform_user},
      {"uniform_item", d.uniform_item},
      {"kernel_variance_user", d.kernel_variance_user},
      {"kernel_variance_item", d.kernel_variance_item},
      {"wall_time_s", d.wall_time_s},
  };
}

inline nlohmann::json to_json(const TrainReport& report) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& r : report.epochs) {
    auto e = to_json(r.diagnostics);
    if (r.validation) {
      e["validation"] = to_json(*r.validation);
    }
    epochs.push_back(std::move(e));
  }
  nlohmann::json out = {
      {"best_epoch", report.best_epoch},
      {"epochs_run", report.epochs_run},
      {"total_time_s", report.total_time_s},
      {"initial", to_json(report.initial)},
      {"epochs", std::move(epochs)},
  };
  out["best_validation"] =
      report.best_validation ? to_json(*report.best_validation) : nlohmann::json(nullptr);
  if (report.epochs_run > 0) {
    double sum = 0.0;
    for (const auto& r : report.epochs) {
      sum += r.diagnostics.wall_time_s;
    }
    out["time_per_epoch_s"] = sum / static_cast<double>(report.epochs_run);
  }
  return out;
}

}  // namespace rau
