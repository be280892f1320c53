#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "rau/error.hpp"
#include "rau/hypersphere.hpp"

namespace rau {

// Binary embedding file:
//   offset 0   char[4]  magic "RAUE"
//   offset 4   u32      format version (1)
//   offset 8   u64      rows
//   offset 16  u32      dim
//   offset 20  u32      role (0 = user, 1 = item)
//   offset 24  f32[rows*dim] row-major values
// All integers and floats little-endian. A JSON sidecar "<path>.json"
// records role, shape, seed and the training config hash.

enum class EmbeddingRole : std::uint32_t { user = 0, item = 1 };

inline std::string_view role_name(EmbeddingRole role) {
  return role == EmbeddingRole::user ? "user" : "item";
}

inline constexpr std::array<char, 4> kCheckpointMagic = {'R', 'A', 'U', 'E'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 24;

struct CheckpointMeta {
  EmbeddingRole role = EmbeddingRole::user;
  std::uint64_t seed = 0;
  std::string config_hash;
};

namespace detail {

template <typename T>
void put_le(std::string& buf, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    buf.push_back(static_cast<char>((value >> (8 * b)) & 0xff));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    value |= static_cast<T>(p[b]) << (8 * b);
  }
  return value;
}

}  // namespace detail

inline void save_embeddings(const std::string& path,
                            const EmbeddingTable& table,
                            const CheckpointMeta& meta) {
  std::string buf;
  buf.reserve(kCheckpointHeaderBytes + table.values().size() * 4);
  buf.append(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_le<std::uint32_t>(buf, kCheckpointVersion);
  detail::put_le<std::uint64_t>(buf, table.rows());
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(table.cols()));
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(meta.role));
  for (double v : table.values()) {
    detail::put_le<std::uint32_t>(
        buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write checkpoint '", path, "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(out.good(), "write failed for checkpoint '", path, "'");

  const nlohmann::json sidecar = {
      {"role", role_name(meta.role)},
      {"rows", table.rows()},
      {"dim", table.cols()},
      {"seed", meta.seed},
      {"config_hash", meta.config_hash},
  };
  std::ofstream side(path + ".json");
  require(side.good(), "cannot write checkpoint sidecar '", path, ".json'");
  side << sidecar.dump(2) << '\n';
}

struct LoadedEmbeddings {
  EmbeddingTable table;
  EmbeddingRole role = EmbeddingRole::user;
};

inline LoadedEmbeddings load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint '", path, "'");
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  require(buf.size() >= kCheckpointHeaderBytes, "checkpoint '", path,
          "' is truncated (", buf.size(), " bytes)");
  require(std::memcmp(buf.data(), kCheckpointMagic.data(), 4) == 0,
          "checkpoint '", path, "' has a bad magic number");
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const auto version = detail::get_le<std::uint32_t>(p + 4);
  require(version == kCheckpointVersion, "checkpoint '", path,
          "' has unsupported version ", version);
  const auto rows = detail::get_le<std::uint64_t>(p + 8);
  const auto dim = detail::get_le<std::uint32_t>(p + 16);
  const auto role = detail::get_le<std::uint32_t>(p + 20);
  require(role <= 1, "checkpoint '", path, "' has unknown role ", role);
  require(dim >= 2 && rows >= 1, "checkpoint '", path, "' has bad shape ",
          rows, "x", dim);
  require(buf.size() == kCheckpointHeaderBytes + rows * dim * 4,
          "checkpoint '", path, "' size does not match its ", rows, "x", dim,
          " header");
  LoadedEmbeddings out{EmbeddingTable(rows, dim),
                       static_cast<EmbeddingRole>(role)};
  auto values = out.table.values();
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto bits =
        detail::get_le<std::uint32_t>(p + kCheckpointHeaderBytes + 4 * k);
    values[k] = std::bit_cast<float>(bits);
  }
  require(all_finite(values), "checkpoint '", path,
          "' contains non-finite values");
  return out;
}

}  // namespace rau
