#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "rau/error.hpp"
#include "rau/rng.hpp"

namespace rau {

using Index = std::uint32_t;

struct Interaction {
  Index user = 0;
  Index item = 0;

  auto operator<=>(const Interaction&) const = default;
};

// Raw external ids in index order; index -> raw id.
struct IdMapping {
  std::vector<std::string> users;
  std::vector<std::string> items;
};

// Binary implicit-feedback matrix over a fixed user/item universe. The
// interaction list keeps its construction order; a per-user CSR view with
// sorted item lists is built alongside it.
class InteractionDataset {
 public:
  InteractionDataset() = default;

  InteractionDataset(std::size_t num_users, std::size_t num_items,
                     std::vector<Interaction> interactions,
                     std::shared_ptr<const IdMapping> ids = nullptr)
      : num_users_(num_users),
        num_items_(num_items),
        interactions_(std::move(interactions)),
        ids_(std::move(ids)) {
    offsets_.assign(num_users_ + 1, 0);
    for (std::size_t k = 0; k < interactions_.size(); ++k) {
      const auto& x = interactions_[k];
      require(x.user < num_users_, "interaction ", k, ": user index ", x.user,
              " out of range (num_users=", num_users_, ")");
      require(x.item < num_items_, "interaction ", k, ": item index ", x.item,
              " out of range (num_items=", num_items_, ")");
      ++offsets_[x.user + 1];
    }
    for (std::size_t u = 0; u < num_users_; ++u) {
      offsets_[u + 1] += offsets_[u];
    }
    adjacency_.resize(interactions_.size());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const auto& x : interactions_) {
      adjacency_[cursor[x.user]++] = x.item;
    }
    for (std::size_t u = 0; u < num_users_; ++u) {
      auto first = adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[u]);
      auto last = adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[u + 1]);
      std::sort(first, last);
      require(std::adjacent_find(first, last) == last,
              "duplicate interaction for user index ", u);
    }
  }

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t size() const { return interactions_.size(); }
  bool empty() const { return interactions_.empty(); }

  std::span<const Interaction> interactions() const { return interactions_; }

  // Sorted item indices of one user.
  std::span<const Index> items_of(std::size_t user) const {
    return {adjacency_.data() + offsets_[user],
            offsets_[user + 1] - offsets_[user]};
  }

  bool contains(Index user, Index item) const {
    const auto items = items_of(user);
    return std::binary_search(items.begin(), items.end(), item);
  }

  const std::shared_ptr<const IdMapping>& ids() const { return ids_; }

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<Interaction> interactions_;
  std::vector<std::size_t> offsets_ = {0};
  std::vector<Index> adjacency_;
  std::shared_ptr<const IdMapping> ids_;
};

enum class FileFormat { tsv, csv };

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) {
    return {};
  }
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line,
                                                  FileFormat format) {
  std::vector<std::string_view> fields;
  if (format == FileFormat::csv) {
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(',', start);
      fields.push_back(trim(line.substr(start, pos - start)));
      if (pos == std::string_view::npos) {
        break;
      }
      start = pos + 1;
    }
  } else {
    // Tabs or runs of spaces.
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                                 line[i] == '\r')) {
        ++i;
      }
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' &&
             line[i] != '\r') {
        ++i;
      }
      if (i > start) {
        fields.push_back(line.substr(start, i - start));
      }
    }
  }
  return fields;
}

// RecBole atomic files start with a typed header such as
// "user_id:token\titem_id:token\trating:float".
inline bool is_typed_header(const std::vector<std::string_view>& fields) {
  return fields.size() >= 2 && fields[0].find(':') != std::string_view::npos &&
         fields[1].find(':') != std::string_view::npos;
}

class IdIndexer {
 public:
  Index get_or_add(std::string_view raw, std::vector<std::string>& names) {
    auto [it, inserted] =
        lookup_.try_emplace(std::string(raw), static_cast<Index>(names.size()));
    if (inserted) {
      names.emplace_back(raw);
    }
    return it->second;
  }

 private:
  std::unordered_map<std::string, Index> lookup_;
};

}  // namespace detail

inline FileFormat parse_file_format(std::string_view name) {
  if (name == "tsv") {
    return FileFormat::tsv;
  }
  if (name == "csv") {
    return FileFormat::csv;
  }
  throw Error("unknown file format '" + std::string(name) +
              "' (expected tsv or csv)");
}

// Reads "<user><sep><item>[<sep>ignored...]" lines. Ids are remapped to
// contiguous indices in first-appearance order; repeated pairs collapse.
inline InteractionDataset load_interactions(const std::string& path,
                                            FileFormat format) {
  std::ifstream in(path);
  require(in.good(), "cannot open interaction file '", path, "'");

  auto ids = std::make_shared<IdMapping>();
  detail::IdIndexer users;
  detail::IdIndexer items;
  std::vector<Interaction> interactions;
  std::unordered_set<std::uint64_t> seen;

  std::string line;
  std::size_t line_no = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') {
      continue;
    }
    const auto fields = detail::split_fields(body, format);
    if (first_data_line) {
      first_data_line = false;
      if (detail::is_typed_header(fields)) {
        continue;
      }
    }
    require(fields.size() >= 2 && !fields[0].empty() && !fields[1].empty(),
            path, ":", line_no, ": malformed line, expected <user>",
            format == FileFormat::csv ? "," : "<tab>", "<item>");
    const Index u = users.get_or_add(fields[0], ids->users);
    const Index i = items.get_or_add(fields[1], ids->items);
    if (!seen.insert((std::uint64_t{u} << 32) | i).second) {
      continue;
    }
    interactions.push_back({u, i});
  }
  require(!in.bad(), "read error on '", path, "'");
  require(!interactions.empty(), "no interactions found in '", path, "'");
  const auto nu = ids->users.size();
  const auto ni = ids->items.size();
  return InteractionDataset(nu, ni, std::move(interactions), std::move(ids));
}

using SplitRatios = std::array<double, 3>;

inline constexpr SplitRatios kDefaultSplitRatios = {0.8, 0.1, 0.1};

struct SplitDataset {
  InteractionDataset train;
  InteractionDataset validation;
  InteractionDataset test;
  std::uint64_t split_seed = 0;
  SplitRatios ratios = kDefaultSplitRatios;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

// Per-user part sizes. Rounding is to nearest with ties to even, so a user
// with 5 interactions gets 4/0/1. Users with fewer than three interactions
// stay entirely in train.
inline SplitCounts split_counts(std::size_t n, const SplitRatios& ratios) {
  if (n < 3) {
    return {n, 0, 0};
  }
  const auto nd = static_cast<double>(n);
  auto train = static_cast<std::size_t>(std::nearbyint(ratios[0] * nd));
  auto validation = static_cast<std::size_t>(std::nearbyint(ratios[1] * nd));
  train = std::clamp<std::size_t>(train, 1, n);
  validation = std::min(validation, n - train);
  return {train, validation, n - train - validation};
}

inline SplitDataset split_per_user(const InteractionDataset& ds,
                                   const SplitRatios& ratios,
                                   std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    require(r >= 0.0 && std::isfinite(r), "split ratios must be non-negative");
    total += r;
  }
  require(std::abs(total - 1.0) <= 1e-9, "split ratios must sum to 1, got ",
          total);

  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
  train.reserve(ds.size());
  std::vector<Index> items;
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    const auto own = ds.items_of(u);
    items.assign(own.begin(), own.end());
    Rng rng(derive_seed(seed, u));
    rng.shuffle(std::span<Index>(items));
    const auto counts = split_counts(items.size(), ratios);
    const auto user = static_cast<Index>(u);
    std::size_t k = 0;
    for (; k < counts.train; ++k) {
      train.push_back({user, items[k]});
    }
    for (; k < counts.train + counts.validation; ++k) {
      validation.push_back({user, items[k]});
    }
    for (; k < items.size(); ++k) {
      test.push_back({user, items[k]});
    }
  }
  const auto nu = ds.num_users();
  const auto ni = ds.num_items();
  return SplitDataset{InteractionDataset(nu, ni, std::move(train), ds.ids()),
                      InteractionDataset(nu, ni, std::move(validation), ds.ids()),
                      InteractionDataset(nu, ni, std::move(test), ds.ids()),
                      seed, ratios};
}

inline nlohmann::json split_manifest(const SplitDataset& split) {
  return {
      {"seed", split.split_seed},
      {"ratios", split.ratios},
      {"num_users", split.train.num_users()},
      {"num_items", split.train.num_items()},
      {"counts",
       {{"train", split.train.size()},
        {"validation", split.validation.size()},
        {"test", split.test.size()}}},
  };
}

inline void write_split_manifest(const SplitDataset& split,
                                 const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot write split manifest '", path, "'");
  out << split_manifest(split).dump(2) << '\n';
}

struct PositivePairBatch {
  std::vector<Index> users;
  std::vector<Index> items;

  std::size_t size() const { return users.size(); }
};

// One full pass over the training pairs in seeded random order. A trailing
// batch with fewer than two pairs is dropped.
inline std::vector<PositivePairBatch> epoch_batches(
    const InteractionDataset& train, std::size_t batch_size,
    std::uint64_t epoch_seed) {
  require(batch_size >= 2, "batch size must be at least 2, got ", batch_size);
  std::vector<Interaction> order(train.interactions().begin(),
                                 train.interactions().end());
  Rng rng(epoch_seed);
  rng.shuffle(std::span<Interaction>(order));

  std::vector<PositivePairBatch> batches;
  batches.reserve(order.size() / batch_size + 1);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto stop = std::min(order.size(), start + batch_size);
    if (stop - start < 2) {
      break;
    }
    PositivePairBatch batch;
    batch.users.reserve(stop - start);
    batch.items.reserve(stop - start);
    for (std::size_t k = start; k < stop; ++k) {
      batch.users.push_back(order[k].user);
      batch.items.push_back(order[k].item);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

struct TwoClusterOptions {
  std::size_t num_users = 200;
  std::size_t num_items = 100;
  std::size_t items_per_user = 10;
};

// Synthetic benchmark: users and items are split into two halves; each user
// only touches items of its own half. Within a half, items sit on a ring and
// a user interacts with a contiguous arc of `items_per_user` items starting
// at a random position, so neighbouring items share users. Item indices are
// shuffled so index order carries no information.
inline InteractionDataset make_two_cluster_dataset(
    const TwoClusterOptions& options, std::uint64_t seed) {
  const auto half_users = options.num_users / 2;
  const auto half_items = options.num_items / 2;
  require(half_users >= 1 && half_items >= 1,
          "two-cluster dataset needs at least two users and two items");
  require(options.items_per_user >= 1 && options.items_per_user <= half_items,
          "items_per_user must be in [1, num_items/2]");

  Rng rng(seed);
  std::vector<Index> relabel(options.num_items);
  for (std::size_t i = 0; i < relabel.size(); ++i) {
    relabel[i] = static_cast<Index>(i);
  }
  rng.shuffle(std::span<Index>(relabel));

  std::vector<Interaction> interactions;
  interactions.reserve(options.num_users * options.items_per_user);
  for (std::size_t u = 0; u < options.num_users; ++u) {
    const std::size_t cluster = u < half_users ? 0 : 1;
    const auto start = rng.below(half_items);
    for (std::size_t t = 0; t < options.items_per_user; ++t) {
      const auto ring_pos = (start + t) % half_items;
      const auto item = relabel[cluster * half_items + ring_pos];
      interactions.push_back({static_cast<Index>(u), item});
    }
  }
  return InteractionDataset(options.num_users, options.num_items,
                            std::move(interactions));
}

}  // namespace rau
