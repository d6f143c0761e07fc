#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "autov/avt.hpp"
#include "autov/error.hpp"
#include "autov/matrix.hpp"
#include "autov/parallel.hpp"
#include "autov/rng.hpp"
#include "oracles.hpp"

using namespace autov;

TEST(Matrix, RejectsZeroDimensions) {
  EXPECT_THROW(TokenMatrix(0, 3), ShapeError);
  EXPECT_THROW(TokenMatrix(2, 0), ShapeError);
  EXPECT_THROW(TokenMatrix(2, 2, std::vector<float>(3)), ShapeError);
  EXPECT_THROW((TokenMatrix{{1.f, 2.f}, {3.f}}), ShapeError);
}

TEST(Matrix, ProductsMatchLoopOracle) {
  Rng rng(3);
  const auto a = oracle::random_tokens(rng, 3, 5).cast<double>();
  const auto b = oracle::random_tokens(rng, 5, 4).cast<double>();
  const auto c = oracle::random_tokens(rng, 4, 5).cast<double>();
  const auto ab = matmul(a, b);
  const auto ref = oracle::mul(oracle::to_grid(a.cast<float>()), oracle::to_grid(b.cast<float>()));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(ab(i, j), ref[i][j], 1e-12);
  EXPECT_EQ(matmul_nt(a, c), matmul(a, transpose(c)));
  const auto tn = matmul_tn(a, a);
  const auto direct = matmul(transpose(a), a);
  for (std::size_t i = 0; i < tn.size(); ++i) EXPECT_NEAR(tn.data()[i], direct.data()[i], 1e-12);
  EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST(Matrix, SoftmaxRowsSumToOneAndSurviveLargeLogits) {
  const MatrixD m{{1000.0, 1001.0, 999.0}, {-5.0, 0.0, 5.0}};
  const auto s = row_softmax(m);
  for (std::size_t r = 0; r < 2; ++r) {
    double sum = 0.0;
    for (double v : s.row(r)) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-15);
  }
  EXPECT_TRUE(s.all_finite());
  EXPECT_NEAR(s(0, 1) / s(0, 0), std::exp(1.0), 1e-9);
}

TEST(Matrix, CosineDistance) {
  const std::vector<float> a = {1.f, 0.f}, b = {0.f, 2.f}, c = {-3.f, 0.f}, z = {0.f, 0.f};
  EXPECT_NEAR(cosine_distance<float>(a, a), 0.0, 1e-12);
  EXPECT_NEAR(cosine_distance<float>(a, b), 1.0, 1e-12);
  EXPECT_NEAR(cosine_distance<float>(a, c), 2.0, 1e-12);
  EXPECT_THROW(cosine_distance<float>(a, z), DegenerateInputError);
}

TEST(Matrix, ActivationsAndNames) {
  const MatrixD pre{{-1.0, 0.5}};
  EXPECT_EQ(apply_activation(pre, Activation::relu), (MatrixD{{0.0, 0.5}}));
  EXPECT_EQ(activation_derivative(pre, Activation::relu), (MatrixD{{0.0, 1.0}}));
  EXPECT_NEAR(activation_derivative(pre, Activation::tanh)(0, 1), 1.0 - std::tanh(0.5) * std::tanh(0.5), 1e-15);
  for (auto a : {Activation::relu, Activation::tanh, Activation::identity})
    EXPECT_EQ(parse_activation(activation_name(a)), a);
  EXPECT_THROW(parse_activation("gelu"), Error);
}

TEST(Rng, DeterministicAndSplitIndependentOfParentDraws) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng fresh(42);
  const auto child_before = fresh.split(7).next_u64();
  for (int i = 0; i < 10; ++i) fresh.next_u64();
  EXPECT_EQ(fresh.split(7).next_u64(), child_before);
  EXPECT_NE(Rng(42).split(7).next_u64(), Rng(42).split(8).next_u64());
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(1);
  const int n = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(Rng, BelowIsUnbiasedAndPermutationIsValid) {
  Rng rng(5);
  std::map<std::uint64_t, int> counts;
  for (int i = 0; i < 60000; ++i) ++counts[rng.below(6)];
  for (const auto& [k, c] : counts) {
    EXPECT_LT(k, 6u);
    EXPECT_NEAR(c, 10000, 400);
  }
  const auto p = rng.permutation(50);
  std::set<std::size_t> seen(p.begin(), p.end());
  EXPECT_EQ(seen.size(), 50u);
  EXPECT_EQ(*seen.rbegin(), 49u);
  EXPECT_THROW(rng.below(0), DegenerateInputError);
}

TEST(Avt, RoundTripIsBitExact) {
  Rng rng(9);
  const auto m = oracle::random_tokens(rng, 7, 5);
  std::stringstream ss;
  write_avt(ss, m);
  EXPECT_EQ(ss.str().size(), 12u + 4u * 35u);
  EXPECT_EQ(ss.str().substr(0, 4), "AVT1");
  EXPECT_EQ(read_avt(ss), m);
}

TEST(Avt, HeaderIsLittleEndian) {
  std::stringstream ss;
  write_avt(ss, TokenMatrix(258, 1, 1.0f));
  const std::string s = ss.str();
  EXPECT_EQ(static_cast<unsigned char>(s[4]), 2);
  EXPECT_EQ(static_cast<unsigned char>(s[5]), 1);
  EXPECT_EQ(static_cast<unsigned char>(s[8]), 1);
  EXPECT_EQ(static_cast<unsigned char>(s[15]), 0x3f);  // 1.0f = 0x3f800000
}

TEST(Avt, RejectsCorruptInput) {
  std::stringstream bad(std::string("AVT2\x01\0\0\0\x01\0\0\0abcd", 16));
  EXPECT_THROW(read_avt(bad), FormatError);
  std::stringstream truncated;
  write_avt(truncated, TokenMatrix(2, 2, 1.f));
  std::stringstream cut(truncated.str().substr(0, 20));
  EXPECT_THROW(read_avt(cut), FormatError);
  TokenMatrix nan(1, 1, std::nanf(""));
  std::stringstream with_nan;
  write_avt(with_nan, nan);
  EXPECT_THROW(read_avt(with_nan), FormatError);
}

TEST(Avt, FilesReportMissingAndTrailingBytes) {
  oracle::TempDir dir("avt");
  EXPECT_THROW(load_avt(dir / "absent.avt"), MissingBlobError);
  const auto path = dir / "m.avt";
  save_avt(path, TokenMatrix(2, 3, 0.5f));
  EXPECT_EQ(load_avt(path), TokenMatrix(2, 3, 0.5f));
  std::ofstream(path, std::ios::app | std::ios::binary) << "x";
  EXPECT_THROW(load_avt(path), FormatError);
}

TEST(Parallel, CoversEveryIndexAndRethrows) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 5) throw StateError("boom");
               }),
               StateError);
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}
