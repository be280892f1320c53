#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "oracle.hpp"
#include "rau/checkpoint.hpp"
#include "rau/hypersphere.hpp"

namespace fs = std::filesystem;

namespace {

rau::Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
  oracle::Rows r;
  for (const auto& row : values) r.emplace_back(row);
  return oracle::to_matrix(r);
}

}  // namespace

TEST(InitXavier, EntriesWithinBound) {
  const double a = rau::xavier_bound(64);
  EXPECT_NEAR(a, 0.21650635094610965, 1e-15);
  const auto t = rau::init_xavier(100, 64, 3);
  for (double v : t.values()) {
    EXPECT_GE(v, -a);
    EXPECT_LE(v, a);
  }
}

TEST(InitXavier, DeterministicUnderSeed) {
  EXPECT_EQ(rau::init_xavier(10, 8, 42), rau::init_xavier(10, 8, 42));
  EXPECT_NE(rau::init_xavier(10, 8, 42), rau::init_xavier(10, 8, 43));
}

TEST(InitXavier, SampleMeanWithinThreeStandardErrors) {
  const std::size_t rows = 500;
  const std::size_t dim = 64;
  const auto t = rau::init_xavier(rows, dim, 7);
  double sum = 0.0;
  for (double v : t.values()) sum += v;
  const double n = static_cast<double>(rows * dim);
  const double a = rau::xavier_bound(dim);
  // U(-a, a) has variance a^2 / 3.
  const double standard_error = std::sqrt(a * a / 3.0 / n);
  EXPECT_LT(std::abs(sum / n), 3.0 * standard_error);
}

TEST(InitXavier, RejectsDegenerateShapes) {
  EXPECT_THROW(rau::init_xavier(0, 8, 1), rau::Error);
  EXPECT_THROW(rau::init_xavier(4, 1, 1), rau::Error);
}

TEST(L2Normalize, ScalesRowsToUnitLength) {
  const auto n = rau::l2_normalize(rows({{3, 4}, {1, 0}}));
  EXPECT_DOUBLE_EQ(n.vectors(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(n.vectors(0, 1), 0.8);
  EXPECT_DOUBLE_EQ(n.vectors(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(n.vectors(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(n.norms[0], 5.0);
}

TEST(L2Normalize, ZeroRowIsAnErrorNamingTheRow) {
  try {
    rau::l2_normalize(rows({{1, 1}, {0, 0}}));
    FAIL();
  } catch (const rau::Error& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(L2Normalize, IsIdempotent) {
  std::mt19937_64 gen(1);
  const auto x = oracle::random_matrix(16, 5, gen);
  const auto once = rau::l2_normalize(x).vectors;
  const auto twice = rau::l2_normalize(once).vectors;
  for (std::size_t k = 0; k < once.values().size(); ++k) {
    EXPECT_NEAR(once.values()[k], twice.values()[k], 1e-12);
  }
}

TEST(PairwiseSqDists, ClosedFormCases) {
  EXPECT_DOUBLE_EQ(rau::pairwise_sq_dists(rau::l2_normalize(rows({{1, 0}, {-1, 0}})))[0], 4.0);
  EXPECT_DOUBLE_EQ(rau::pairwise_sq_dists(rau::l2_normalize(rows({{0.3, 0.2}, {0.3, 0.2}})))[0],
                   0.0);
  EXPECT_DOUBLE_EQ(rau::pairwise_sq_dists(rau::l2_normalize(rows({{1, 0}, {0, 1}})))[0], 2.0);
  EXPECT_THROW(rau::pairwise_sq_dists(rau::l2_normalize(rows({{1, 0}}))), rau::Error);
}

TEST(PairwiseSqDists, MatchesInnerProductFormAndStaysInRange) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = rau::l2_normalize(oracle::random_matrix(9, 6, gen));
    const auto d = rau::pairwise_sq_dists(b);
    ASSERT_EQ(d.size(), 9u * 8u / 2u);
    std::size_t p = 0;
    for (std::size_t j = 0; j < 9; ++j) {
      for (std::size_t k = j + 1; k < 9; ++k, ++p) {
        EXPECT_NEAR(d[p], 2.0 - 2.0 * rau::dot(b.row(j), b.row(k)), 1e-10);
        EXPECT_GE(d[p], 0.0);
        EXPECT_LE(d[p], 4.0);
      }
    }
  }
}

TEST(BatchMean, ArithmeticCases) {
  EXPECT_EQ(rau::batch_mean(rows({{1, 0}, {0, 1}})), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(rau::batch_mean(rows({{0.25, -2}})), (std::vector<double>{0.25, -2}));
  EXPECT_EQ(rau::batch_mean(rows({{0.7, -0.3}, {-0.7, 0.3}})), (std::vector<double>{0, 0}));
  EXPECT_THROW(rau::batch_mean(rau::Matrix(0, 2)), rau::Error);
}

TEST(NormalizeBackward, AnnihilatesTheRadialDirection) {
  std::mt19937_64 gen(3);
  const auto raw = oracle::random_matrix(5, 4, gen);
  const auto g = oracle::random_matrix(5, 4, gen);
  const auto back = rau::normalize_backward(rau::l2_normalize(raw), g);
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_NEAR(rau::dot(back.row(r), raw.row(r)), 0.0, 1e-12);
  }
}

TEST(Checkpoint, RoundTripsThroughFloat32) {
  const auto dir = fs::temp_directory_path() / ("rau_ckpt_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto path = (dir / "item.emb").string();
  const auto table = rau::init_xavier(7, 5, 9);
  rau::save_embeddings(path, table, {rau::EmbeddingRole::item, 9, "abc"});

  EXPECT_EQ(fs::file_size(path), rau::kCheckpointHeaderBytes + 7 * 5 * 4);
  const auto loaded = rau::load_embeddings(path);
  EXPECT_EQ(loaded.role, rau::EmbeddingRole::item);
  ASSERT_TRUE(loaded.table.same_shape(table));
  for (std::size_t k = 0; k < table.values().size(); ++k) {
    EXPECT_EQ(loaded.table.values()[k], static_cast<double>(static_cast<float>(table.values()[k])));
  }
  std::ifstream side(path + ".json");
  const auto j = nlohmann::json::parse(side);
  EXPECT_EQ(j["role"], "item");
  EXPECT_EQ(j["rows"], 7);
  EXPECT_EQ(j["config_hash"], "abc");

  // Header bytes are little-endian: rows = 7 at offset 8.
  std::ifstream raw(path, std::ios::binary);
  std::array<unsigned char, rau::kCheckpointHeaderBytes> header{};
  raw.read(reinterpret_cast<char*>(header.data()), header.size());
  EXPECT_EQ(header[0], 'R');
  EXPECT_EQ(header[8], 7);
  EXPECT_EQ(header[16], 5);
  EXPECT_EQ(header[20], 1);
  fs::remove_all(dir);
}

TEST(Checkpoint, MalformedFilesAreRejected) {
  const auto path = (fs::temp_directory_path() / ("rau_bad_" + std::to_string(::getpid()))).string();
  std::ofstream(path) << "not a checkpoint at all, definitely";
  EXPECT_THROW(rau::load_embeddings(path), rau::Error);
  std::ofstream(path) << "RAUE";
  EXPECT_THROW(rau::load_embeddings(path), rau::Error);
  fs::remove(path);
  EXPECT_THROW(rau::load_embeddings(path), rau::Error);
}
