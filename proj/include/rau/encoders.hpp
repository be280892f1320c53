#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "rau/data.hpp"
#include "rau/error.hpp"
#include "rau/hypersphere.hpp"
#include "rau/matrix.hpp"
#include "rau/parallel.hpp"

namespace rau {

enum class EncoderKind { mf, lightgcn };

inline constexpr std::size_t kMaxGraphLayers = 8;

struct GraphEncoderConfig {
  std::size_t num_layers = 2;
};

inline void validate(const GraphEncoderConfig& cfg) {
  require(cfg.num_layers <= kMaxGraphLayers, "num_layers must be <= ",
          kMaxGraphLayers, ", got ", cfg.num_layers);
}

// Symmetrically normalized user-item graph D^-1/2 A D^-1/2 in CSR form.
// Node ids: users [0, num_users), items [num_users, num_users + num_items).
// No self loops.
struct NormalizedAdjacency {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<std::size_t> offsets;
  std::vector<Index> neighbors;
  std::vector<double> weights;

  std::size_t size() const { return num_users + num_items; }
  std::size_t num_edges() const { return neighbors.size(); }
};

inline NormalizedAdjacency build_norm_adjacency(const InteractionDataset& train) {
  NormalizedAdjacency adj;
  adj.num_users = train.num_users();
  adj.num_items = train.num_items();
  const auto n = adj.size();
  std::vector<std::size_t> degree(n, 0);
  for (const auto& x : train.interactions()) {
    ++degree[x.user];
    ++degree[adj.num_users + x.item];
  }
  adj.offsets.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) {
    adj.offsets[v + 1] = adj.offsets[v] + degree[v];
  }
  adj.neighbors.resize(adj.offsets[n]);
  adj.weights.resize(adj.offsets[n]);
  std::vector<std::size_t> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
  // Users in index order, items sorted per user: item rows come out sorted by
  // user index too, so each CSR row is ordered.
  for (std::size_t u = 0; u < adj.num_users; ++u) {
    for (const Index i : train.items_of(u)) {
      const auto item_node = adj.num_users + i;
      const double w = 1.0 / std::sqrt(static_cast<double>(degree[u]) *
                                       static_cast<double>(degree[item_node]));
      adj.neighbors[cursor[u]] = static_cast<Index>(item_node);
      adj.weights[cursor[u]++] = w;
      adj.neighbors[cursor[item_node]] = static_cast<Index>(u);
      adj.weights[cursor[item_node]++] = w;
    }
  }
  return adj;
}

// y = A x
inline void spmm(const NormalizedAdjacency& adj, const Matrix& x, Matrix& y,
                 std::size_t num_threads) {
  y.fill(0.0);
  parallel_for(adj.size(), num_threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      auto out = y.row(v);
      for (std::size_t e = adj.offsets[v]; e < adj.offsets[v + 1]; ++e) {
        axpy(adj.weights[e], x.row(adj.neighbors[e]), out);
      }
    }
  });
}

// Mean of layers 0..K of x_{l+1} = A x_l. The operator is symmetric, so the
// same call maps output gradients back to input gradients.
inline Matrix propagate(const NormalizedAdjacency& adj, const Matrix& x0,
                        std::size_t num_layers, std::size_t num_threads = 1) {
  require(x0.rows() == adj.size(), "propagation input has ", x0.rows(),
          " rows but the graph has ", adj.size(), " nodes");
  Matrix acc = x0;
  if (num_layers == 0) {
    return acc;
  }
  Matrix cur = x0;
  Matrix next(x0.rows(), x0.cols());
  for (std::size_t l = 0; l < num_layers; ++l) {
    spmm(adj, cur, next, num_threads);
    std::swap(cur, next);
    auto a = acc.values();
    const auto c = cur.values();
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] += c[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(num_layers + 1);
  for (double& v : acc.values()) {
    v *= inv;
  }
  return acc;
}

inline Matrix stack_tables(const EmbeddingTable& users,
                           const EmbeddingTable& items) {
  require(users.cols() == items.cols(), "user dim ", users.cols(),
          " != item dim ", items.cols());
  Matrix out(users.rows() + items.rows(), users.cols());
  std::copy(users.values().begin(), users.values().end(), out.values().begin());
  std::copy(items.values().begin(), items.values().end(),
            out.values().begin() + static_cast<std::ptrdiff_t>(users.values().size()));
  return out;
}

inline std::pair<Matrix, Matrix> unstack_tables(const Matrix& stacked,
                                                std::size_t num_users) {
  Matrix users(num_users, stacked.cols());
  Matrix items(stacked.rows() - num_users, stacked.cols());
  const auto split = static_cast<std::ptrdiff_t>(users.values().size());
  std::copy(stacked.values().begin(), stacked.values().begin() + split,
            users.values().begin());
  std::copy(stacked.values().begin() + split, stacked.values().end(),
            items.values().begin());
  return {std::move(users), std::move(items)};
}

// Row gather: out[k] = table[offset + ids[k]].
inline Matrix gather_rows(const Matrix& table, std::span<const Index> ids,
                          std::size_t offset = 0) {
  Matrix out(ids.size(), table.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto r = offset + ids[k];
    require(r < table.rows(), "id ", ids[k], " out of range (", table.rows() - offset,
            " rows)");
    const auto src = table.row(r);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

// Transpose of gather_rows: repeated ids accumulate.
inline void scatter_add_rows(const Matrix& rows, std::span<const Index> ids,
                             Matrix& table, std::size_t offset = 0) {
  require(rows.rows() == ids.size(), "scatter: ", rows.rows(), " rows for ",
          ids.size(), " ids");
  for (std::size_t k = 0; k < ids.size(); ++k) {
    require(offset + ids[k] < table.rows(), "id ", ids[k], " out of range (",
            table.rows() - offset, " rows)");
    axpy(1.0, rows.row(k), table.row(offset + ids[k]));
  }
}

inline Matrix mf_encode(const EmbeddingTable& table, std::span<const Index> ids) {
  return gather_rows(table, ids);
}

// Propagated representations of every user and item.
inline std::pair<Matrix, Matrix> lightgcn_full(const EmbeddingTable& users,
                                               const EmbeddingTable& items,
                                               const NormalizedAdjacency& adj,
                                               const GraphEncoderConfig& cfg,
                                               std::size_t num_threads = 1) {
  validate(cfg);
  require(users.rows() == adj.num_users && items.rows() == adj.num_items,
          "embedding tables (", users.rows(), " users, ", items.rows(),
          " items) do not match the graph (", adj.num_users, " users, ",
          adj.num_items, " items)");
  return unstack_tables(propagate(adj, stack_tables(users, items), cfg.num_layers,
                                  num_threads),
                        adj.num_users);
}

inline std::pair<Matrix, Matrix> lightgcn_encode(
    const EmbeddingTable& users, const EmbeddingTable& items,
    const NormalizedAdjacency& adj, const GraphEncoderConfig& cfg,
    std::span<const Index> user_ids, std::span<const Index> item_ids) {
  const auto [fu, fi] = lightgcn_full(users, items, adj, cfg);
  return {gather_rows(fu, user_ids), gather_rows(fi, item_ids)};
}

// Maps gradients w.r.t. propagated user/item representations back to the
// raw tables.
inline std::pair<Matrix, Matrix> lightgcn_backward(
    const NormalizedAdjacency& adj, const GraphEncoderConfig& cfg,
    const Matrix& grad_users, const Matrix& grad_items,
    std::size_t num_threads = 1) {
  return unstack_tables(propagate(adj, stack_tables(grad_users, grad_items),
                                  cfg.num_layers, num_threads),
                        adj.num_users);
}

}  // namespace rau
