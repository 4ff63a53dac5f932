#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sarreg/error.hpp"
#include "sarreg/robustfit.hpp"

using namespace sarreg;

namespace {

std::vector<Correspondence> affine_set(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, 800.0);
  std::vector<Correspondence> out(n);
  for (auto& c : out) {
    c.ref_col = pos(rng);
    c.ref_row = pos(rng);
    c.sensed_col = 1.01 * c.ref_col + 0.02 * c.ref_row + 12.0;
    c.sensed_row = -0.03 * c.ref_col + 0.99 * c.ref_row - 7.0;
  }
  return out;
}

}  // namespace

TEST(Ransac, CleanSetIsAllInliers) {
  const auto cs = affine_set(50, 1);
  const auto res = ransac_filter(cs, RansacParams{});
  EXPECT_EQ(res.inliers.size(), 50u);
  EXPECT_TRUE(res.outliers.empty());
  EXPECT_NEAR(res.model.apply(100, 200).x, 1.01 * 100 + 0.02 * 200 + 12.0, 1e-9);
}

TEST(Ransac, MinimalSampleIsInlier) {
  const auto res = ransac_filter(affine_set(3, 2), RansacParams{});
  EXPECT_EQ(res.inliers, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Ransac, TooFewPoints) {
  EXPECT_THROW(ransac_filter(affine_set(2, 3), RansacParams{}), Error);
  RansacParams p;
  p.model = RansacModel::projective;
  EXPECT_THROW(ransac_filter(affine_set(3, 3), p), Error);
}

TEST(Ransac, PlantedOutliersRemoved) {
  auto cs = affine_set(100, 4);
  std::vector<std::size_t> planted;
  for (std::size_t i = 0; i < 100; i += 4) {
    cs[i].sensed_col += 25.0;
    cs[i].sensed_row -= 12.0;
    planted.push_back(i);
  }
  RansacParams p;
  p.seed = 9;
  const auto res = ransac_filter(cs, p);
  EXPECT_EQ(res.outliers, planted);
  EXPECT_EQ(res.inliers.size() + res.outliers.size(), cs.size());
}

TEST(Ransac, ProjectiveModel) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0.0, 500.0);
  std::vector<Correspondence> cs(40);
  for (auto& c : cs) {
    c.ref_col = pos(rng);
    c.ref_row = pos(rng);
    const double w = 1.0 + 1e-4 * c.ref_col - 2e-4 * c.ref_row;
    c.sensed_col = (1.1 * c.ref_col + 0.1 * c.ref_row + 5) / w;
    c.sensed_row = (-0.05 * c.ref_col + c.ref_row + 2) / w;
  }
  cs[7].sensed_col += 40;
  RansacParams p;
  p.model = RansacModel::projective;
  const auto res = ransac_filter(cs, p);
  EXPECT_EQ(res.outliers, (std::vector<std::size_t>{7}));
}

TEST(Ransac, SeededDeterminism) {
  auto cs = affine_set(60, 6);
  for (std::size_t i = 0; i < 60; i += 3) cs[i].sensed_row += 30.0 + static_cast<double>(i);
  RansacParams p;
  p.seed = 42;
  const auto a = ransac_filter(cs, p);
  const auto b = ransac_filter(cs, p);
  EXPECT_EQ(a.inliers, b.inliers);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.model.h, b.model.h);
}

TEST(Ransac, ParamsValidate) {
  RansacParams p;
  p.inlier_tol = 0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.confidence = 1.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(FitPlanar, CollinearIsDegenerate) {
  std::vector<Correspondence> cs(5);
  for (int i = 0; i < 5; ++i) cs[i] = {double(i), double(i), double(i), double(i), {}, {}, 0};
  EXPECT_THROW(fit_planar(RansacModel::affine, cs), Error);
}

TEST(TopK, FullKOrdersByResidual) {
  auto cs = affine_set(20, 7);
  for (std::size_t i = 0; i < cs.size(); ++i) cs[i].sensed_col += 0.01 * double(20 - i);
  const auto out = select_top_k(cs, cs.size());
  ASSERT_EQ(out.size(), cs.size());
  const auto t = fit_planar(RansacModel::affine, cs);
  for (std::size_t i = 1; i < out.size(); ++i) {
    EXPECT_LE(reprojection_error(t, out[i - 1]), reprojection_error(t, out[i]));
  }
}

TEST(TopK, KeepsK) {
  auto cs = affine_set(318, 8);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 0.5);
  for (auto& c : cs) c.sensed_col += n(rng);
  EXPECT_EQ(select_top_k(cs, 143).size(), 143u);
  EXPECT_EQ(select_top_k(cs, 318).size(), 318u);
  EXPECT_THROW(select_top_k(cs, 319), Error);
}

TEST(TopK, ZeroResidualTiesKeepInputOrder) {
  const auto cs = affine_set(10, 9);
  const auto out = select_top_k(cs, 4);
  ASSERT_EQ(out.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out[i].ref_col, cs[i].ref_col);
}

TEST(Select, ByIndex) {
  const auto cs = affine_set(5, 10);
  const auto out = select(cs, {4, 1});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].ref_col, cs[4].ref_col);
  EXPECT_EQ(out[1].ref_col, cs[1].ref_col);
}
