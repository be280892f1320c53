#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rau/rau.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitError = 2;
constexpr std::string_view kSyntheticPrefix = "synthetic:";

// Raw flag values, applied on top of the config file through the same
// parser the file uses.
struct TrainFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  bool single_thread = false;
  std::vector<std::string> sets;
  std::string out_dir = "runs";
  std::vector<std::size_t> ks = rau::kDefaultEvalKs;
};

void add_train_flags(CLI::App& cmd, TrainFlags& f) {
  cmd.add_option("--config", f.config_path, "Config file (JSON or key = value lines)");
  const std::pair<const char*, const char*> keyed[] = {
      {"--dataset", "dataset"},       {"--format", "format"},
      {"--objective", "objective"},   {"--encoder", "encoder"},
      {"--alpha", "alpha"},           {"--beta", "beta"},
      {"--gamma-user", "gamma_user"}, {"--gamma-item", "gamma_item"},
      {"--lr", "lr"},                 {"--batch-size", "batch_size"},
      {"--max-epochs", "max_epochs"}, {"--patience", "patience"},
      {"--seed", "seed"},
  };
  for (const auto& [flag, key] : keyed) {
    cmd.add_option(flag, f.values[key], std::string("Config key ") + key);
  }
  cmd.add_flag("--single-thread", f.single_thread, "Run every stage on one thread");
  cmd.add_option("--set", f.sets, "Extra config override, key=value (repeatable)");
  cmd.add_option("--out-dir", f.out_dir, "Output root directory")->capture_default_str();
  cmd.add_option("--k", f.ks, "Cut-offs for reported metrics")
      ->delimiter(',')
      ->capture_default_str();
}

rau::TrainConfig resolve_config(const CLI::App& cmd, const TrainFlags& f) {
  rau::TrainConfig cfg;
  if (!f.config_path.empty()) {
    rau::apply_config_file(cfg, f.config_path);
  }
  for (const auto& [key, raw] : f.values) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (cmd.count(flag) > 0) {
      rau::set_config_value(cfg, key, raw);
    }
  }
  if (cmd.count("--format") == 0 && f.config_path.empty() && cfg.dataset.ends_with(".csv")) {
    cfg.format = "csv";
  }
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    rau::require(eq != std::string::npos, "--set expects key=value, got '", s, "'");
    rau::set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (f.single_thread) {
    cfg.single_thread = true;
  }
  rau::require(!cfg.dataset.empty(), "no dataset given (use --dataset or the config file)");
  rau::require(!f.ks.empty(), "--k needs at least one value");
  for (auto k : f.ks) rau::require(k >= 1, "--k values must be positive");
  rau::validate(cfg);
  return cfg;
}

rau::InteractionDataset load_dataset(const rau::TrainConfig& cfg) {
  if (cfg.dataset.starts_with(kSyntheticPrefix)) {
    const auto name = cfg.dataset.substr(kSyntheticPrefix.size());
    rau::require(name == "two-cluster", "unknown synthetic dataset '", name,
                 "' (expected synthetic:two-cluster)");
    return rau::make_two_cluster_dataset({}, cfg.seed);
  }
  rau::require(fs::exists(cfg.dataset), "dataset '", cfg.dataset, "' does not exist");
  return rau::load_interactions(cfg.dataset, rau::parse_file_format(cfg.format));
}

rau::SplitDataset load_split(const rau::TrainConfig& cfg) {
  return rau::split_per_user(load_dataset(cfg), rau::kDefaultSplitRatios, cfg.seed);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  rau::require(out.good(), "cannot write '", path.string(), "'");
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

fs::path run_dir(const std::string& root, const rau::TrainConfig& cfg) {
  return fs::path(root) / (rau::config_hash(cfg) + "_seed" + std::to_string(cfg.seed));
}

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> ks) {
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

void print_epoch(const rau::EpochRecord& r, std::size_t k) {
  const auto& d = r.diagnostics;
  std::fprintf(stderr, "epoch %3zu  loss %.5f  align %.4f  unif_u %.4f  unif_i %.4f", d.epoch,
               d.train_loss, d.align, d.uniform_user, d.uniform_item);
  if (r.validation) {
    std::fprintf(stderr, "  val N@%zu %.4f", k, r.validation->at(k).ndcg);
  }
  std::fprintf(stderr, "  %.2fs\n", d.wall_time_s);
}

int cmd_train(const CLI::App& cmd, const TrainFlags& f) {
  const auto cfg = resolve_config(cmd, f);
  const auto split = load_split(cfg);
  const auto dir = run_dir(f.out_dir, cfg);
  fs::create_directories(dir);
  write_json(dir / "config.json", rau::to_json(cfg));
  rau::write_split_manifest(split, (dir / "split_manifest.json").string());

  auto fitted = rau::fit(split, cfg, [&](const rau::EpochRecord& r) {
    print_epoch(r, cfg.eval_k_for_stopping);
  });
  rau::Trainer trainer(split, cfg);
  trainer.set_state(fitted.best);
  const auto test = trainer.evaluate(rau::EvalPart::test, sorted_unique(f.ks));

  const auto hash = rau::config_hash(cfg);
  rau::save_embeddings((dir / "user.emb").string(), fitted.best.users,
                       {rau::EmbeddingRole::user, cfg.seed, hash});
  rau::save_embeddings((dir / "item.emb").string(), fitted.best.items,
                       {rau::EmbeddingRole::item, cfg.seed, hash});
  auto report = rau::to_json(fitted.report);
  report["test"] = rau::to_json(test);
  report["config_hash"] = hash;
  write_json(dir / "report.json", report);
  write_text(dir / "diagnostics.csv", rau::diagnostics_csv(fitted.report, cfg.eval_k_for_stopping));
  write_text(dir / "timing.csv", rau::timing_csv(fitted.report));
  write_json(dir / "metrics.json", rau::to_json(test));
  write_text(dir / "metrics.csv", rau::to_csv(test));

  std::cout << "run directory: " << dir.string() << '\n'
            << "best epoch " << fitted.report.best_epoch << " of " << fitted.report.epochs_run
            << "\n"
            << rau::to_table(test);
  return 0;
}

struct EvalFlags {
  std::string run;
  std::string dataset;
  std::string part = "test";
  std::vector<std::size_t> ks = rau::kDefaultEvalKs;
};

int cmd_eval(const EvalFlags& f) {
  const fs::path dir(f.run);
  rau::TrainConfig cfg;
  const auto config_path = dir / "config.json";
  rau::require(fs::exists(config_path), "run directory '", f.run, "' has no config.json");
  rau::apply_config_file(cfg, config_path.string());
  if (!f.dataset.empty()) {
    cfg.dataset = f.dataset;
  }
  rau::require(f.part == "test" || f.part == "validation", "--part must be test or validation");
  const auto split = load_split(cfg);
  auto users = rau::load_embeddings((dir / "user.emb").string());
  auto items = rau::load_embeddings((dir / "item.emb").string());
  rau::require(users.role == rau::EmbeddingRole::user && items.role == rau::EmbeddingRole::item,
               "checkpoint roles are swapped in '", f.run, "'");
  rau::require(users.table.rows() == split.train.num_users() &&
                   items.table.rows() == split.train.num_items(),
               "checkpoint (", users.table.rows(), " users, ", items.table.rows(),
               " items) does not match the dataset (", split.train.num_users(), " users, ",
               split.train.num_items(), " items)");
  rau::require(users.table.cols() == items.table.cols(), "user and item checkpoints differ in dim");
  cfg.dim = users.table.cols();
  rau::Trainer trainer(split, cfg);
  trainer.set_state({std::move(users.table), std::move(items.table)});
  const auto part = f.part == "test" ? rau::EvalPart::test : rau::EvalPart::validation;
  const auto report = trainer.evaluate(part, sorted_unique(f.ks));
  std::cout << rau::to_json(report).dump(2) << '\n' << rau::to_table(report);
  return 0;
}

struct SweepFlags {
  std::string alphas = "0,0.5,1";
  std::string betas = "1,5,10";
  std::string gammas = "0.5/0.5,0.7/0.3,0.9/0.1";
  bool reference = false;
  std::size_t jobs = 1;
};

int cmd_sweep(const CLI::App& cmd, const TrainFlags& f, const SweepFlags& s) {
  const auto cfg = resolve_config(cmd, f);
  const auto grid = s.reference ? rau::reference_grid()
                                : rau::SweepGrid{rau::parse_value_list(s.alphas),
                                                 rau::parse_value_list(s.betas),
                                                 rau::parse_gamma_list(s.gammas)};
  rau::validate(grid);
  rau::require(s.jobs >= 1, "--jobs must be at least 1");
  const auto split = load_split(cfg);
  std::fprintf(stderr, "sweeping %zu grid points with %zu job(s)\n", grid.size(), s.jobs);
  const auto rows = rau::run_sweep(split, cfg, grid, sorted_unique(f.ks), s.jobs);
  const auto dir = fs::path(f.out_dir);
  fs::create_directories(dir);
  const auto path = dir / ("sweep_" + rau::config_hash(cfg) + "_seed" + std::to_string(cfg.seed) + ".csv");
  const auto csv = rau::sweep_csv(rows, cfg.eval_k_for_stopping);
  write_text(path, csv);
  const auto& best = rows[rau::best_sweep_row(rows)];
  std::cout << csv << "wrote " << path.string() << '\n'
            << "best: alpha " << best.weights.alpha << " beta " << best.weights.beta
            << " gamma " << best.weights.gamma_user << "/" << best.weights.gamma_item << '\n'
            << rau::to_table(best.test);
  return 0;
}

struct GeometryFlags {
  std::vector<double> fixed = {0.0, 120.0};
  double step = 1.0;
  std::vector<double> case_angles = {0.0, 0.0, 180.0};
  std::string out_dir = "runs";
};

int cmd_geometry(const GeometryFlags& f) {
  namespace geo = rau::geometry;
  const auto rows = geo::sweep_moving_point(f.fixed, f.step);
  const auto report = geo::verify_low_variance_claim(rows);
  const auto reference = geo::config_metrics({f.case_angles});
  auto j = geo::to_json(report);
  j["case_angles"] = f.case_angles;
  j["case_uniform_loss"] = reference.uniform_loss;
  j["case_kernel_variance"] = reference.kernel_variance;
  j["all_rows_below_case_variance"] =
      std::all_of(rows.begin(), rows.end(), [&](const geo::SweepRow& r) {
        return r.kernel_variance < reference.kernel_variance;
      });
  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  write_text(dir / "geometry_sweep.csv", geo::sweep_csv(rows));
  write_json(dir / "geometry_report.json", j);
  std::cout << j.dump(2) << "\nwrote " << (dir / "geometry_sweep.csv").string() << " ("
            << rows.size() << " rows)\n";
  return 0;
}

struct InspectFlags {
  std::string path;
  std::string format;
  std::uint64_t seed = rau::TrainConfig{}.seed;
};

int inspect_checkpoint(const std::string& path) {
  const auto loaded = rau::load_embeddings(path);
  const auto& t = loaded.table;
  double lo = INFINITY;
  double hi = 0.0;
  double sum = 0.0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double n = std::sqrt(rau::squared_norm(t.row(r)));
    lo = std::min(lo, n);
    hi = std::max(hi, n);
    sum += n;
  }
  nlohmann::json j = {
      {"role", rau::role_name(loaded.role)},
      {"rows", t.rows()},
      {"dim", t.cols()},
      {"row_norm_min", lo},
      {"row_norm_mean", sum / static_cast<double>(t.rows())},
      {"row_norm_max", hi},
  };
  if (fs::exists(path + ".json")) {
    std::ifstream side(path + ".json");
    j["sidecar"] = nlohmann::json::parse(side);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int inspect_dataset(const InspectFlags& f) {
  rau::TrainConfig cfg;
  cfg.dataset = f.path;
  cfg.seed = f.seed;
  cfg.format = !f.format.empty() ? f.format : (f.path.ends_with(".csv") ? "csv" : "tsv");
  const auto ds = load_dataset(cfg);
  std::size_t min_deg = ds.num_users() ? SIZE_MAX : 0;
  std::size_t max_deg = 0;
  std::size_t cold = 0;
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    const auto d = ds.items_of(u).size();
    min_deg = std::min(min_deg, d);
    max_deg = std::max(max_deg, d);
    cold += d < 3 ? 1 : 0;
  }
  const auto split = rau::split_per_user(ds, rau::kDefaultSplitRatios, cfg.seed);
  nlohmann::json j = {
      {"num_users", ds.num_users()},
      {"num_items", ds.num_items()},
      {"num_interactions", ds.size()},
      {"density", static_cast<double>(ds.size()) /
                      (static_cast<double>(ds.num_users()) * static_cast<double>(ds.num_items()))},
      {"user_degree_min", min_deg},
      {"user_degree_max", max_deg},
      {"user_degree_mean", static_cast<double>(ds.size()) / static_cast<double>(ds.num_users())},
      {"users_with_fewer_than_3", cold},
      {"split", rau::split_manifest(split)},
  };
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_inspect(const InspectFlags& f) {
  if (f.path.ends_with(".emb")) {
    return inspect_checkpoint(f.path);
  }
  return inspect_dataset(f);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alignment/uniformity embedding training for implicit-feedback recommendation"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "Train embeddings and evaluate on the test split");
  add_train_flags(*train, train_flags);

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained run directory");
  eval->add_option("run", eval_flags.run, "Run directory written by 'train'")->required();
  eval->add_option("--dataset", eval_flags.dataset, "Override the dataset recorded in the run");
  eval->add_option("--part", eval_flags.part, "test or validation")->capture_default_str();
  eval->add_option("--k", eval_flags.ks, "Cut-offs")->delimiter(',')->capture_default_str();

  TrainFlags sweep_flags;
  SweepFlags sweep_grid;
  auto* sweep = app.add_subcommand("sweep", "Grid search over alpha, beta and gamma");
  add_train_flags(*sweep, sweep_flags);
  sweep->add_option("--alphas", sweep_grid.alphas, "Comma-separated alpha values")->capture_default_str();
  sweep->add_option("--betas", sweep_grid.betas, "Comma-separated beta values")->capture_default_str();
  sweep->add_option("--gammas", sweep_grid.gammas, "Comma-separated user/item gamma pairs")
      ->capture_default_str();
  sweep->add_flag("--reference-grid", sweep_grid.reference,
                  "alpha 0..1 step 0.1, beta 1..15, gamma 0.5/0.5..0.9/0.1");
  sweep->add_option("--jobs", sweep_grid.jobs, "Concurrent fits")->capture_default_str();

  GeometryFlags geo_flags;
  auto* geometry = app.add_subcommand("geometry", "Unit-circle uniformity/variance sweep");
  geometry->add_option("--fixed", geo_flags.fixed, "Fixed point angles in degrees")
      ->delimiter(',')
      ->capture_default_str();
  geometry->add_option("--step", geo_flags.step, "Sweep step in degrees")->capture_default_str();
  geometry->add_option("--case", geo_flags.case_angles, "Reference configuration angles")
      ->delimiter(',')
      ->capture_default_str();
  geometry->add_option("--out-dir", geo_flags.out_dir, "Output directory")->capture_default_str();

  InspectFlags inspect_flags;
  auto* inspect = app.add_subcommand("inspect", "Summarize a dataset or a .emb checkpoint");
  inspect->add_option("path", inspect_flags.path, "Dataset file, synthetic:two-cluster, or .emb")
      ->required();
  inspect->add_option("--format", inspect_flags.format, "tsv or csv (default from extension)");
  inspect->add_option("--seed", inspect_flags.seed, "Seed for synthetic data and the split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*train) return cmd_train(*train, train_flags);
    if (*eval) return cmd_eval(eval_flags);
    if (*sweep) return cmd_sweep(*sweep, sweep_flags, sweep_grid);
    if (*geometry) return cmd_geometry(geo_flags);
    if (*inspect) return cmd_inspect(inspect_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
