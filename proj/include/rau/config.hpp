#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "rau/data.hpp"
#include "rau/encoders.hpp"
#include "rau/error.hpp"
#include "rau/eval.hpp"
#include "rau/losses.hpp"

namespace rau {

enum class Objective { rau, directau, bpr };

inline std::string_view objective_name(Objective o) {
  switch (o) {
    case Objective::rau: return "rau";
    case Objective::directau: return "directau";
    case Objective::bpr: return "bpr";
  }
  return "?";
}

inline Objective parse_objective(std::string_view s) {
  if (s == "rau") return Objective::rau;
  if (s == "directau") return Objective::directau;
  if (s == "bpr") return Objective::bpr;
  throw Error("unknown objective '" + std::string(s) +
              "' (expected rau, directau or bpr)");
}

inline std::string_view encoder_name(EncoderKind e) {
  return e == EncoderKind::mf ? "mf" : "lightgcn";
}

inline EncoderKind parse_encoder(std::string_view s) {
  if (s == "mf") return EncoderKind::mf;
  if (s == "lightgcn") return EncoderKind::lightgcn;
  throw Error("unknown encoder '" + std::string(s) + "' (expected mf or lightgcn)");
}

inline std::string_view score_mode_name(ScoreMode m) {
  return m == ScoreMode::dot ? "dot" : "cosine";
}

inline ScoreMode parse_score_mode(std::string_view s) {
  if (s == "dot") return ScoreMode::dot;
  if (s == "cosine") return ScoreMode::cosine;
  throw Error("unknown score mode '" + std::string(s) + "' (expected dot or cosine)");
}

struct TrainConfig {
  Objective objective = Objective::rau;
  EncoderKind encoder = EncoderKind::mf;
  LossWeights weights{0.5, 1.0, 0.5, 0.5};
  double lr = 1e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 300;
  std::size_t patience = 10;
  double weight_decay = 1e-6;
  std::uint64_t seed = 2024;
  std::size_t eval_k_for_stopping = 20;
  std::size_t dim = kDefaultEmbeddingDim;
  std::size_t num_layers = 2;
  // Train for exactly max_epochs and keep the last epoch; no early stopping.
  bool fixed_epochs = false;
  // BPR negatives avoid the user's whole training history, not only the
  // sampled positive.
  bool bpr_full_history_rejection = false;
  bool single_thread = false;
  // Unset: cosine for alignment/uniformity objectives, dot for BPR.
  std::optional<ScoreMode> score_mode;
  bool exclude_validation_at_test = true;
  std::size_t probe_size = 2048;

  // Dataset source; consumed by the CLI, not by fit().
  std::string dataset;
  std::string format = "tsv";

  LossWeights effective_weights() const {
    return objective == Objective::directau ? kDirectAuWeights : weights;
  }

  ScoreMode effective_score_mode() const {
    if (score_mode) {
      return *score_mode;
    }
    return objective == Objective::bpr ? ScoreMode::dot : ScoreMode::cosine;
  }
};

inline void validate(const TrainConfig& cfg) {
  require(cfg.lr >= 0.0 && std::isfinite(cfg.lr), "lr must be non-negative, got ", cfg.lr);
  require(cfg.patience >= 1, "patience must be at least 1");
  require(cfg.batch_size >= 2, "batch_size must be at least 2, got ", cfg.batch_size);
  require(cfg.weight_decay >= 0.0 && std::isfinite(cfg.weight_decay),
          "weight_decay must be non-negative");
  require(cfg.dim >= 2, "dim must be at least 2");
  require(cfg.eval_k_for_stopping >= 1, "eval_k_for_stopping must be at least 1");
  require(cfg.probe_size >= 2, "probe_size must be at least 2");
  validate(GraphEncoderConfig{cfg.num_layers});
  validate(cfg.weights);
}

inline nlohmann::json to_json(const TrainConfig& cfg) {
  nlohmann::json j = {
      {"objective", objective_name(cfg.objective)},
      {"encoder", encoder_name(cfg.encoder)},
      {"alpha", cfg.weights.alpha},
      {"beta", cfg.weights.beta},
      {"gamma_user", cfg.weights.gamma_user},
      {"gamma_item", cfg.weights.gamma_item},
      {"lr", cfg.lr},
      {"batch_size", cfg.batch_size},
      {"max_epochs", cfg.max_epochs},
      {"patience", cfg.patience},
      {"weight_decay", cfg.weight_decay},
      {"seed", cfg.seed},
      {"eval_k_for_stopping", cfg.eval_k_for_stopping},
      {"dim", cfg.dim},
      {"num_layers", cfg.num_layers},
      {"fixed_epochs", cfg.fixed_epochs},
      {"bpr_full_history_rejection", cfg.bpr_full_history_rejection},
      {"single_thread", cfg.single_thread},
      {"exclude_validation_at_test", cfg.exclude_validation_at_test},
      {"probe_size", cfg.probe_size},
      {"dataset", cfg.dataset},
      {"format", cfg.format},
  };
  j["score_mode"] = cfg.score_mode ? nlohmann::json(score_mode_name(*cfg.score_mode))
                                   : nlohmann::json(nullptr);
  return j;
}

namespace detail {

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(concat("config key '", key, "': expected a boolean, got '", v, "'"));
}

inline double parse_double(std::string_view key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(concat("config key '", key, "': expected a number, got '", v, "'"));
}

inline std::uint64_t parse_unsigned(std::string_view key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v.front() != '-') {
      const auto n = std::stoull(v, &used);
      if (used == v.size()) return n;
    }
  } catch (const std::exception&) {
  }
  throw Error(concat("config key '", key, "': expected a non-negative integer, got '",
                     v, "'"));
}

inline std::string unquote(std::string_view v) {
  v = trim(v);
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    v = v.substr(1, v.size() - 2);
  }
  return std::string(v);
}

}  // namespace detail

// Sets one field from its textual value. Shared by config files and CLI
// overrides so both accept the same spellings.
inline void set_config_value(TrainConfig& cfg, std::string_view key,
                             const std::string& raw) {
  const std::string v = detail::unquote(raw);
  using namespace detail;
  if (key == "objective") cfg.objective = parse_objective(v);
  else if (key == "encoder") cfg.encoder = parse_encoder(v);
  else if (key == "alpha") cfg.weights.alpha = parse_double(key, v);
  else if (key == "beta") cfg.weights.beta = parse_double(key, v);
  else if (key == "gamma_user") cfg.weights.gamma_user = parse_double(key, v);
  else if (key == "gamma_item") cfg.weights.gamma_item = parse_double(key, v);
  else if (key == "lr") cfg.lr = parse_double(key, v);
  else if (key == "batch_size") cfg.batch_size = parse_unsigned(key, v);
  else if (key == "max_epochs") cfg.max_epochs = parse_unsigned(key, v);
  else if (key == "patience") cfg.patience = parse_unsigned(key, v);
  else if (key == "weight_decay") cfg.weight_decay = parse_double(key, v);
  else if (key == "seed") cfg.seed = parse_unsigned(key, v);
  else if (key == "eval_k_for_stopping") cfg.eval_k_for_stopping = parse_unsigned(key, v);
  else if (key == "dim") cfg.dim = parse_unsigned(key, v);
  else if (key == "num_layers") cfg.num_layers = parse_unsigned(key, v);
  else if (key == "fixed_epochs") cfg.fixed_epochs = parse_bool(key, v);
  else if (key == "bpr_full_history_rejection") cfg.bpr_full_history_rejection = parse_bool(key, v);
  else if (key == "single_thread") cfg.single_thread = parse_bool(key, v);
  else if (key == "exclude_validation_at_test") cfg.exclude_validation_at_test = parse_bool(key, v);
  else if (key == "probe_size") cfg.probe_size = parse_unsigned(key, v);
  else if (key == "score_mode") {
    if (v == "auto" || v.empty()) cfg.score_mode.reset();
    else cfg.score_mode = parse_score_mode(v);
  }
  else if (key == "dataset") cfg.dataset = v;
  else if (key == "format") { parse_file_format(v); cfg.format = v; }
  else throw Error(concat("unknown config key '", key, "'"));
}

inline void apply_json(TrainConfig& cfg, const nlohmann::json& j) {
  require(j.is_object(), "config JSON must be an object");
  for (const auto& [key, value] : j.items()) {
    if (value.is_null()) {
      set_config_value(cfg, key, "");
    } else if (value.is_string()) {
      set_config_value(cfg, key, value.get<std::string>());
    } else {
      set_config_value(cfg, key, value.dump());
    }
  }
}

// Flat key/value file: either a JSON object or "key = value" lines with '#'
// comments (TOML-like).
inline void apply_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file '", path, "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto body = detail::trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(detail::concat("config '", path, "': ", e.what()));
    }
    apply_json(cfg, j);
    return;
  }
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    auto l = detail::trim(line);
    if (l.empty() || l.front() == '#' || l.front() == '[') {
      continue;
    }
    const auto eq = l.find_first_of("=:");
    require(eq != std::string_view::npos, path, ":", line_no,
            ": expected 'key = value'");
    const auto key = detail::trim(l.substr(0, eq));
    auto value = detail::trim(l.substr(eq + 1));
    if (const auto hash = value.find(" #"); hash != std::string_view::npos) {
      value = detail::trim(value.substr(0, hash));
    }
    set_config_value(cfg, key, std::string(value));
  }
}

// FNV-1a over the canonical JSON of every field that affects training
// results. Output-only switches are left out.
inline std::string config_hash(const TrainConfig& cfg) {
  auto j = to_json(cfg);
  j.erase("single_thread");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace rau
