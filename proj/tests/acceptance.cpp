// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any gated criterion fails. Criterion 7 needs a real dataset and runs
// only when RAU_BEAUTY_PATH points at a user-item interaction file.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "rau/rau.hpp"

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string name;
  double time_limit_s;
  std::function<Outcome()> run;
};

template <typename... Args>
std::string fmt(const char* format, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// Criterion 1 --------------------------------------------------------------

Outcome loss_oracle() {
  std::mt19937_64 gen(20240601);
  std::uniform_int_distribution<std::size_t> batch_size(2, 64);
  std::uniform_int_distribution<std::size_t> dim_size(2, 16);
  std::uniform_real_distribution<double> weight(0.0, 5.0);
  double worst = 0.0;
  const char* worst_name = "";
  auto check = [&](const char* name, double got, double want) {
    const double err = std::abs(got - want);
    if (!(err <= worst)) {
      worst = std::isnan(err) ? INFINITY : err;
      worst_name = name;
    }
  };
  for (int trial = 0; trial < 200; ++trial) {
    const auto b = batch_size(gen);
    const auto d = dim_size(gen);
    const double scale = trial % 4 == 0 ? 0.05 : 1.0;  // some near-collapsed batches
    const auto u = oracle::random_matrix(b, d, gen, -scale, scale);
    const auto i = oracle::random_matrix(b, d, gen);
    const auto neg = oracle::random_matrix(b, d, gen);
    const oracle::Weights ow{weight(gen), weight(gen), weight(gen) / 5.0, weight(gen) / 5.0};
    const rau::LossWeights w{ow.alpha, ow.beta, ow.gamma_user, ow.gamma_item};

    const auto ru = oracle::to_rows(u);
    const auto ri = oracle::to_rows(i);
    const auto ou = oracle::normalize(ru);
    const auto oi = oracle::normalize(ri);
    const auto nu = rau::l2_normalize(u);
    const auto ni = rau::l2_normalize(i);
    check("align", rau::align_loss(nu, ni), oracle::align(ou, oi));
    check("uniform_part", rau::uniform_part(nu), oracle::uniform(ou));
    check("weighted_uniform", rau::weighted_uniform_loss(nu, ni, w.gamma_user, w.gamma_item),
          ow.gamma_user * oracle::uniform(ou) + ow.gamma_item * oracle::uniform(oi));
    check("ra", rau::ra_loss(nu, ni), oracle::ra(ou, oi));
    check("ru", rau::ru_loss(nu, ni), oracle::variance(ou) + oracle::variance(oi));
    check("rau_total", rau::rau_loss(u, i, w).total, oracle::rau_total(ru, ri, ow));

    oracle::Vec pos(b);
    oracle::Vec negs(b);
    const auto rn = oracle::to_rows(neg);
    for (std::size_t k = 0; k < b; ++k) {
      for (std::size_t c = 0; c < d; ++c) {
        pos[k] += ru[k][c] * ri[k][c];
        negs[k] += ru[k][c] * rn[k][c];
      }
    }
    check("bpr", rau::bpr_loss(pos, negs), oracle::bpr(pos, negs));
    check("bpr_eval", rau::evaluate_bpr(u, i, neg).loss, oracle::bpr(pos, negs));
  }
  return {worst <= 1e-10, fmt("200 batches, max abs error %.2e (%s), tolerance 1e-10", worst, worst_name)};
}

// Criterion 2 --------------------------------------------------------------

Outcome gradient_check() {
  double worst_mf = 0.0;
  double worst_graph = 0.0;
  // 2 users + 3 items = 5 graph nodes.
  const rau::InteractionDataset graph(2, 3, {{0, 0}, {0, 1}, {1, 1}, {1, 2}});
  const auto adj = rau::build_norm_adjacency(graph);
  const rau::GraphEncoderConfig layers{2};
  const std::vector<rau::Index> uids{0, 1, 0, 1};
  const std::vector<rau::Index> iids{0, 2, 1, 1};

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> weight(0.0, 3.0);
    const rau::LossWeights w{weight(gen), weight(gen), 0.6, 0.4};

    const auto u = oracle::random_matrix(8, 4, gen);
    const auto i = oracle::random_matrix(8, 4, gen);
    const auto g = rau::rau_gradient(u, i, w);
    worst_mf = std::max(
        {worst_mf,
         oracle::max_relative_error(g.users, oracle::finite_difference(
             [&](const rau::Matrix& x) { return rau::rau_loss(x, i, w).total; }, u)),
         oracle::max_relative_error(g.items, oracle::finite_difference(
             [&](const rau::Matrix& x) { return rau::rau_loss(u, x, w).total; }, i))});

    const auto tu = oracle::random_matrix(2, 4, gen);
    const auto ti = oracle::random_matrix(3, 4, gen);
    auto loss = [&](const rau::Matrix& a, const rau::Matrix& b) {
      const auto [bu, bi] = rau::lightgcn_encode(a, b, adj, layers, uids, iids);
      return rau::rau_loss(bu, bi, w).total;
    };
    const auto [bu, bi] = rau::lightgcn_encode(tu, ti, adj, layers, uids, iids);
    const auto bg = rau::rau_gradient(bu, bi, w);
    rau::Matrix full_u(2, 4);
    rau::Matrix full_i(3, 4);
    rau::scatter_add_rows(bg.users, uids, full_u);
    rau::scatter_add_rows(bg.items, iids, full_i);
    const auto [gu, gi] = rau::lightgcn_backward(adj, layers, full_u, full_i);
    worst_graph = std::max(
        {worst_graph,
         oracle::max_relative_error(gu, oracle::finite_difference(
             [&](const rau::Matrix& x) { return loss(x, ti); }, tu)),
         oracle::max_relative_error(gi, oracle::finite_difference(
             [&](const rau::Matrix& x) { return loss(tu, x); }, ti))});
  }
  return {worst_mf <= 1e-4 && worst_graph <= 1e-4,
          fmt("5 seeds, max relative error mf %.2e, lightgcn %.2e, tolerance 1e-4", worst_mf,
              worst_graph)};
}

// Shared synthetic setup -----------------------------------------------------

constexpr std::uint64_t kSyntheticSeed = 42;
constexpr std::size_t kRecallK = 10;

const rau::SplitDataset& synthetic_split() {
  static const auto split = rau::split_per_user(
      rau::make_two_cluster_dataset({200, 100, 10}, kSyntheticSeed), rau::kDefaultSplitRatios,
      kSyntheticSeed);
  return split;
}

rau::TrainConfig synthetic_config(rau::Objective objective) {
  rau::TrainConfig cfg;
  cfg.objective = objective;
  cfg.dim = 64;
  cfg.lr = 1e-3;
  cfg.batch_size = 256;
  cfg.patience = 10;
  cfg.max_epochs = 100;
  cfg.eval_k_for_stopping = kRecallK;
  cfg.seed = kSyntheticSeed;
  return cfg;
}

// Criterion 3 --------------------------------------------------------------

Outcome directau_reduction() {
  const auto& split = synthetic_split();
  auto rau_cfg = synthetic_config(rau::Objective::rau);
  rau_cfg.weights = {0.0, 0.0, 0.5, 0.5};
  const auto a = rau::fit(split, rau_cfg);
  const auto b = rau::fit(split, synthetic_config(rau::Objective::directau));
  const bool tables = a.best.users == b.best.users && a.best.items == b.best.items;
  const bool csv = rau::diagnostics_csv(a.report, kRecallK) == rau::diagnostics_csv(b.report, kRecallK);
  const bool epochs = a.report.epochs_run == b.report.epochs_run;
  return {tables && csv && epochs,
          fmt("%zu vs %zu epochs, diagnostics %s, tables %s", a.report.epochs_run,
              b.report.epochs_run, csv ? "identical" : "differ", tables ? "identical" : "differ")};
}

// Criterion 4 --------------------------------------------------------------

Outcome geometry_reproduction() {
  namespace geo = rau::geometry;
  const std::vector<double> fixed{0.0, 120.0};
  const auto rows = geo::sweep_moving_point(fixed, 1.0);
  const auto report = geo::verify_low_variance_claim(rows);
  const double case_a = geo::config_metrics({{0.0, 0.0, 180.0}}).kernel_variance;
  bool all_below = true;
  for (const auto& r : rows) all_below = all_below && r.kernel_variance < case_a;
  const bool at_equilateral = std::abs(report.min_loss_angle - 240.0) < 1e-9;
  const bool low_var = report.variance_at_min <= 1e-12;
  const bool positive = report.rank_correlation && *report.rank_correlation > 0.0;
  return {rows.size() == 360 && at_equilateral && low_var && all_below && positive,
          fmt("min at %.0f deg, variance there %.1e, max variance %.5f < case-a %.5f: %s, "
              "spearman %.4f",
              report.min_loss_angle, report.variance_at_min, report.max_variance, case_a,
              all_below ? "yes" : "no", report.rank_correlation.value_or(NAN))};
}

// Criterion 5 --------------------------------------------------------------

struct SyntheticRun {
  double recall = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  bool align_trend = false;
  double random_recall = 0.0;
};

// Trailing 5-epoch moving average of align over the first 80% of epochs.
bool smoothed_align_non_increasing(const rau::TrainReport& report) {
  const std::size_t window = 5;
  const auto n = static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(report.epochs.size())));
  if (n < window + 1) return false;
  double prev = INFINITY;
  for (std::size_t e = window - 1; e < n; ++e) {
    double sum = 0.0;
    for (std::size_t k = e + 1 - window; k <= e; ++k) sum += report.epochs[k].diagnostics.align;
    const double avg = sum / window;
    if (avg > prev) return false;
    prev = avg;
  }
  return true;
}

SyntheticRun synthetic_run(const rau::TrainConfig& cfg) {
  const auto& split = synthetic_split();
  const auto fitted = rau::fit(split, cfg);
  rau::Trainer trainer(split, cfg);
  SyntheticRun out;
  out.random_recall = trainer.evaluate(rau::EvalPart::test, {kRecallK}).at(kRecallK).recall;
  trainer.set_state(fitted.best);
  out.recall = trainer.evaluate(rau::EvalPart::test, {kRecallK}).at(kRecallK).recall;
  out.best_epoch = fitted.report.best_epoch;
  out.epochs_run = fitted.report.epochs_run;
  out.align_trend = smoothed_align_non_increasing(fitted.report);
  return out;
}

Outcome synthetic_end_to_end() {
  const auto direct = synthetic_run(synthetic_config(rau::Objective::directau));
  const auto full = synthetic_run(synthetic_config(rau::Objective::rau));
  const bool pass = direct.recall >= 0.60 && full.recall >= 0.60 && direct.align_trend &&
                    full.align_trend && direct.epochs_run <= 100 && full.epochs_run <= 100;
  return {pass, fmt("test R@10 directau %.3f (epoch %zu/%zu), rau %.3f (epoch %zu/%zu), "
                    "untrained %.3f; smoothed align non-increasing: %s/%s",
                    direct.recall, direct.best_epoch, direct.epochs_run, full.recall,
                    full.best_epoch, full.epochs_run, full.random_recall,
                    direct.align_trend ? "yes" : "no", full.align_trend ? "yes" : "no")};
}

Outcome synthetic_lightgcn() {
  auto cfg = synthetic_config(rau::Objective::rau);
  cfg.encoder = rau::EncoderKind::lightgcn;
  const auto run = synthetic_run(cfg);
  return {run.recall >= 0.60 && run.recall > run.random_recall,
          fmt("test R@10 %.3f after %zu epochs vs %.3f untrained", run.recall, run.epochs_run,
              run.random_recall)};
}

// Criterion 6 --------------------------------------------------------------

Outcome determinism() {
  const auto& split = synthetic_split();
  auto cfg = synthetic_config(rau::Objective::rau);
  cfg.single_thread = true;
  const auto a = rau::diagnostics_csv(rau::fit(split, cfg).report, kRecallK);
  const auto b = rau::diagnostics_csv(rau::fit(split, cfg).report, kRecallK);
  const auto lines = std::count(a.begin(), a.end(), '\n');
  return {a == b, fmt("%zu-byte diagnostics CSV (%ld lines) %s", a.size(), static_cast<long>(lines),
                      a == b ? "byte-identical" : "differs")};
}

// Criterion 7 --------------------------------------------------------------

Outcome beauty_reproduction(const std::string& path) {
  const auto ds = rau::load_interactions(
      path, rau::parse_file_format(path.ends_with(".csv") ? "csv" : "tsv"));
  const auto split = rau::split_per_user(ds, rau::kDefaultSplitRatios, 2024);
  auto run = [&](rau::TrainConfig cfg) {
    cfg.dim = 64;
    cfg.lr = 1e-3;
    cfg.batch_size = 256;
    cfg.patience = 10;
    cfg.eval_k_for_stopping = 20;
    const auto fitted = rau::fit(split, cfg);
    rau::Trainer trainer(split, cfg);
    trainer.set_state(fitted.best);
    return 100.0 * trainer.evaluate(rau::EvalPart::test, {20}).at(20).recall;
  };
  rau::TrainConfig direct_cfg;
  direct_cfg.objective = rau::Objective::directau;
  rau::TrainConfig rau_cfg;
  rau_cfg.weights = {0.5, 1.0, 0.9, 0.1};
  if (const char* w = std::getenv("RAU_BEAUTY_WEIGHTS")) {
    const auto v = rau::parse_value_list(w);
    rau::require(v.size() == 4, "RAU_BEAUTY_WEIGHTS must be alpha,beta,gamma_user,gamma_item");
    rau_cfg.weights = {v[0], v[1], v[2], v[3]};
  }
  const double direct = run(direct_cfg);
  const double full = run(rau_cfg);
  const bool pass = std::abs(direct - 14.07) <= 0.7 && std::abs(full - 14.58) <= 0.7 && full > direct;
  return {pass, fmt("R@20 directau %.2f (target 14.07 +- 0.7), rau %.2f (target 14.58 +- 0.7)",
                    direct, full)};
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"1", "loss-oracle equivalence", 10.0, loss_oracle},
      {"2", "gradient correctness", 30.0, gradient_check},
      {"3", "DirectAU reduction", 60.0, directau_reduction},
      {"4", "geometry reproduction", 5.0, geometry_reproduction},
      {"5", "synthetic end-to-end", 300.0, synthetic_end_to_end},
      {"5b", "synthetic end-to-end, lightgcn encoder", 300.0, synthetic_lightgcn},
      {"6", "determinism", 300.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.time_limit_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("criterion %-2s %s  %s: %s [%.1fs, limit %.0fs]\n", c.id.c_str(),
                pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), secs, c.time_limit_s);
    std::fflush(stdout);
  }

  if (const char* beauty = std::getenv("RAU_BEAUTY_PATH"); beauty && *beauty) {
    Outcome o;
    try {
      o = beauty_reproduction(beauty);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion 7  %s  Beauty reproduction (extended): %s\n", o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
  } else {
    std::printf("criterion 7  SKIP  Beauty reproduction (extended): set RAU_BEAUTY_PATH to run\n");
  }
  return failures == 0 ? 0 : 1;
}
