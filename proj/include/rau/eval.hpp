#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rau/data.hpp"
#include "rau/error.hpp"
#include "rau/hypersphere.hpp"
#include "rau/matrix.hpp"
#include "rau/parallel.hpp"

namespace rau {

inline const std::vector<std::size_t> kDefaultEvalKs = {20, 50};

// Top-K by dot product, excluded items removed, ties broken by ascending
// item index. Returns fewer than K items when not enough remain.
inline std::vector<Index> rank_items_for_user(std::span<const double> user_vec,
                                              const Matrix& items,
                                              std::span<const Index> exclude,
                                              std::size_t k) {
  require(k >= 1, "K must be at least 1");
  require(user_vec.size() == items.cols(), "user vector dim ", user_vec.size(),
          " != item dim ", items.cols());
  std::vector<char> excluded(items.rows(), 0);
  for (const Index i : exclude) {
    require(i < items.rows(), "excluded item ", i, " out of range");
    excluded[i] = 1;
  }
  std::vector<std::pair<double, Index>> scored;
  scored.reserve(items.rows());
  for (std::size_t i = 0; i < items.rows(); ++i) {
    if (!excluded[i]) {
      scored.emplace_back(dot(user_vec, items.row(i)), static_cast<Index>(i));
    }
  }
  const auto top = std::min(k, scored.size());
  const auto better = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(top),
                    scored.end(), better);
  std::vector<Index> ranked(top);
  for (std::size_t r = 0; r < top; ++r) {
    ranked[r] = scored[r].second;
  }
  return ranked;
}

// `relevant` must be sorted.
inline double recall_at_k(std::span<const Index> ranked,
                          std::span<const Index> relevant) {
  require(!relevant.empty(), "recall@K of a user with no relevant items");
  std::size_t hits = 0;
  for (const Index i : ranked) {
    hits += std::binary_search(relevant.begin(), relevant.end(), i) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

// Binary-relevance NDCG over the first K entries of `ranked`; `relevant`
// must be sorted.
inline double ndcg_at_k(std::span<const Index> ranked,
                        std::span<const Index> relevant, std::size_t k) {
  require(!relevant.empty(), "NDCG@K of a user with no relevant items");
  double dcg = 0.0;
  const auto depth = std::min(k, ranked.size());
  for (std::size_t r = 0; r < depth; ++r) {
    if (std::binary_search(relevant.begin(), relevant.end(), ranked[r])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  double idcg = 0.0;
  const auto ideal = std::min(k, relevant.size());
  for (std::size_t r = 0; r < ideal; ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / idcg;
}

struct KMetrics {
  std::size_t k = 0;
  double recall = 0.0;
  double ndcg = 0.0;

  bool operator==(const KMetrics&) const = default;
};

struct MetricsReport {
  std::vector<KMetrics> per_k;
  std::size_t num_users_evaluated = 0;

  const KMetrics& at(std::size_t k) const {
    for (const auto& m : per_k) {
      if (m.k == k) {
        return m;
      }
    }
    throw Error(detail::concat("no metrics computed for K=", k));
  }

  bool operator==(const MetricsReport&) const = default;
};

enum class EvalPart { validation, test };

enum class ScoreMode { dot, cosine };

struct EvalOptions {
  std::vector<std::size_t> ks = kDefaultEvalKs;
  ScoreMode score_mode = ScoreMode::cosine;
  // When ranking for the test part, also hide the user's validation items.
  bool exclude_validation_at_test = true;
  std::size_t num_threads = 1;
};

namespace detail {

inline Matrix normalized_copy(const Matrix& m) {
  return l2_normalize(m).vectors;
}

}  // namespace detail

// Full-ranking evaluation of final user/item representations. Every user
// with at least one interaction in `part` is ranked against all items except
// their training items (plus validation items for the test part).
inline MetricsReport evaluate(const SplitDataset& split,
                              const Matrix& user_reps, const Matrix& item_reps,
                              EvalPart part, const EvalOptions& options = {}) {
  require(user_reps.rows() == split.train.num_users() &&
              item_reps.rows() == split.train.num_items(),
          "representations (", user_reps.rows(), " users, ", item_reps.rows(),
          " items) do not match the dataset (", split.train.num_users(),
          " users, ", split.train.num_items(), " items)");
  require(user_reps.cols() == item_reps.cols(), "user dim ", user_reps.cols(),
          " != item dim ", item_reps.cols());
  require(!options.ks.empty(), "no K values requested");
  const auto max_k = *std::max_element(options.ks.begin(), options.ks.end());
  require(max_k >= 1, "K values must be positive");

  const bool cosine = options.score_mode == ScoreMode::cosine;
  const Matrix users = cosine ? detail::normalized_copy(user_reps) : user_reps;
  const Matrix items = cosine ? detail::normalized_copy(item_reps) : item_reps;

  const auto& target = part == EvalPart::test ? split.test : split.validation;
  std::vector<Index> eval_users;
  for (std::size_t u = 0; u < target.num_users(); ++u) {
    if (!target.items_of(u).empty()) {
      eval_users.push_back(static_cast<Index>(u));
    }
  }

  const auto nk = options.ks.size();
  std::vector<double> per_user(eval_users.size() * nk * 2, 0.0);
  parallel_for(eval_users.size(), options.num_threads,
               [&](std::size_t begin, std::size_t end) {
    std::vector<Index> exclude;
    for (std::size_t e = begin; e < end; ++e) {
      const auto u = eval_users[e];
      const auto train_items = split.train.items_of(u);
      exclude.assign(train_items.begin(), train_items.end());
      if (part == EvalPart::test && options.exclude_validation_at_test) {
        const auto val_items = split.validation.items_of(u);
        exclude.insert(exclude.end(), val_items.begin(), val_items.end());
      }
      const auto ranked = rank_items_for_user(users.row(u), items, exclude, max_k);
      const auto relevant = target.items_of(u);
      for (std::size_t j = 0; j < nk; ++j) {
        const auto k = options.ks[j];
        const auto head = std::span<const Index>(ranked).first(std::min(k, ranked.size()));
        per_user[(e * nk + j) * 2] = recall_at_k(head, relevant);
        per_user[(e * nk + j) * 2 + 1] = ndcg_at_k(head, relevant, k);
      }
    }
  });

  MetricsReport report;
  report.num_users_evaluated = eval_users.size();
  for (std::size_t j = 0; j < nk; ++j) {
    KMetrics m{options.ks[j], 0.0, 0.0};
    for (std::size_t e = 0; e < eval_users.size(); ++e) {
      m.recall += per_user[(e * nk + j) * 2];
      m.ndcg += per_user[(e * nk + j) * 2 + 1];
    }
    if (!eval_users.empty()) {
      m.recall /= static_cast<double>(eval_users.size());
      m.ndcg /= static_cast<double>(eval_users.size());
    }
    report.per_k.push_back(m);
  }
  return report;
}

inline nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json out;
  out["num_users_evaluated"] = report.num_users_evaluated;
  for (const auto& m : report.per_k) {
    out["recall@" + std::to_string(m.k)] = m.recall;
    out["ndcg@" + std::to_string(m.k)] = m.ndcg;
  }
  return out;
}

inline std::string to_csv(const MetricsReport& report) {
  std::string out = "k,recall,ndcg,num_users_evaluated\n";
  char line[128];
  for (const auto& m : report.per_k) {
    std::snprintf(line, sizeof(line), "%zu,%.10g,%.10g,%zu\n", m.k, m.recall,
                  m.ndcg, report.num_users_evaluated);
    out += line;
  }
  return out;
}

// "R@20  R@50  N@20  N@50" header and percentages with two decimals.
inline std::string to_table(const MetricsReport& report) {
  std::string header;
  std::string values;
  char cell[32];
  for (const char* name : {"R", "N"}) {
    for (const auto& m : report.per_k) {
      std::snprintf(cell, sizeof(cell), "%8s", (name + std::string("@") + std::to_string(m.k)).c_str());
      header += cell;
      std::snprintf(cell, sizeof(cell), "%8.2f",
                    100.0 * (name[0] == 'R' ? m.recall : m.ndcg));
      values += cell;
    }
  }
  return header + "\n" + values + "\n";
}

}  // namespace rau
