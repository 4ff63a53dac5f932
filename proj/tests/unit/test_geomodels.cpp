#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sarreg/error.hpp"
#include "sarreg/geomodels.hpp"

using namespace sarreg;

namespace {

FittedModel model_with(const ModelSpec& spec, std::vector<double> cx, std::vector<double> cy) {
  FittedModel m;
  m.spec = spec;
  m.coeffs_x = std::move(cx);
  m.coeffs_y = std::move(cy);
  return m;
}

std::vector<ControlPoint> generated(const std::function<Point2(double, double, double)>& f,
                                    std::size_t n, bool with_z, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x(500000, 520000), y(4000000, 4020000), z(0, 300);
  std::vector<ControlPoint> out;
  for (std::size_t i = 0; i < n; ++i) {
    ControlPoint cp{x(rng), y(rng), std::nullopt, 0, 0};
    const double zz = with_z ? z(rng) : 0.0;
    if (with_z) cp.ref_z = zz;
    const Point2 p = f(cp.ref_x, cp.ref_y, zz);
    cp.sensed_x = p.x;
    cp.sensed_y = p.y;
    out.push_back(cp);
  }
  return out;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::io;
}

}  // namespace

TEST(ModelSpec, MinimumCounts) {
  EXPECT_EQ(min_cp_count(ModelSpec::polynomial(3)), 10);
  EXPECT_EQ(min_cp_count(ModelSpec::rfm(3, DenomMode::distinct)), 39);
  EXPECT_EQ(ModelSpec::rfm(3, DenomMode::distinct).parameter_count(), 78);
  EXPECT_EQ(min_cp_count(ModelSpec::projective(10)), 5);
  EXPECT_EQ(min_cp_count(ModelSpec::projective(22)), 11);
  EXPECT_EQ(min_cp_count(ModelSpec::projective(38)), 19);
  for (int n = 1; n <= 5; ++n) EXPECT_EQ(min_cp_count(ModelSpec::polynomial(n)), (n + 1) * (n + 2) / 2);
}

TEST(ModelSpec, RfmTable) {
  const int params[3][3] = {{8, 11, 14}, {20, 29, 38}, {40, 59, 78}};
  const int mins[3][3] = {{4, 6, 7}, {10, 15, 19}, {20, 30, 39}};
  const DenomMode modes[3] = {DenomMode::unit, DenomMode::shared, DenomMode::distinct};
  for (int o = 1; o <= 3; ++o)
    for (int d = 0; d < 3; ++d) {
      const auto s = ModelSpec::rfm(o, modes[d]);
      EXPECT_EQ(s.parameter_count(), params[o - 1][d]) << s.name();
      EXPECT_EQ(min_cp_count(s), mins[o - 1][d]) << s.name();
    }
}

TEST(ModelSpec, NamesRoundTrip) {
  const auto all = all_models();
  ASSERT_EQ(all.size(), 17u);
  for (const auto& s : all) EXPECT_EQ(ModelSpec::parse(s.name()), s);
  EXPECT_EQ(all[5].name(), "proj10");
  EXPECT_EQ(all[16].name(), "rfm3d");
  EXPECT_THROW(ModelSpec::parse("poly9"), Error);
  EXPECT_THROW(ModelSpec::parse("proj12"), Error);
  EXPECT_THROW(ModelSpec::parse("bogus"), Error);
}

TEST(Basis, Expansions) {
  EXPECT_EQ(poly_basis(4, 5, 1), (std::vector<double>{1, 4, 5}));
  EXPECT_EQ(poly_basis(2, 3, 2), (std::vector<double>{1, 2, 3, 4, 6, 9}));
  EXPECT_EQ(poly_basis(1, 1, 5).size(), 21u);
  EXPECT_EQ(poly_basis_3d(2, 3, 5, 1), (std::vector<double>{1, 2, 3, 5}));
  EXPECT_EQ(poly_basis_3d(1, 1, 1, 3).size(), 20u);
}

TEST(Apply, IdentityAndTranslation) {
  const auto id = model_with(ModelSpec::polynomial(1), {0, 1, 0}, {0, 0, 1});
  const auto p = id.apply(7, -2);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->x, 7);
  EXPECT_EQ(p->y, -2);
  const auto tr = model_with(ModelSpec::polynomial(1), {5, 1, 0}, {-3, 0, 1});
  EXPECT_EQ(tr.apply(0, 0)->x, 5);
  EXPECT_EQ(tr.apply(0, 0)->y, -3);
  EXPECT_THROW(id.apply(0, 0, 1.0), Error);
}

TEST(Fit, CubicInterpolatesAtMinimum) {
  auto f = [](double X, double Y, double) {
    const double u = (X - 510000) / 1e4, v = (Y - 4010000) / 1e4;
    return Point2{X + 30 + 5 * u * u * u - 2 * u * v, Y - 20 + 3 * v * v * u + u};
  };
  const auto cps = generated(f, 10, false, 1);
  const auto res = fit(ModelSpec::polynomial(3), cps);
  for (double r : res.residuals) EXPECT_LT(r, 1e-9);
  EXPECT_THROW(fit(ModelSpec::polynomial(3), generated(f, 9, false, 1)), Error);
}

TEST(Fit, ProjectiveRecoversGenerator) {
  auto f = [](double X, double Y, double) {
    const double u = (X - 510000) / 1e4, v = (Y - 4010000) / 1e4;
    const double w1 = 1 + 0.02 * u - 0.01 * v, w2 = 1 - 0.015 * u + 0.03 * v;
    return Point2{510000 + 1e4 * (0.1 + 1.02 * u + 0.05 * v) / w1,
                  4010000 + 1e4 * (-0.2 - 0.03 * u + 0.98 * v) / w2};
  };
  const auto res = fit(ModelSpec::projective(10), generated(f, 20, false, 2));
  for (const auto& cp : generated(f, 1000, false, 3)) {
    const auto p = res.model.apply(cp.ref_x, cp.ref_y);
    ASSERT_TRUE(p);
    EXPECT_NEAR(p->x, cp.sensed_x, 1e-8);
    EXPECT_NEAR(p->y, cp.sensed_y, 1e-8);
  }
}

TEST(Fit, ResidualsMatchApply) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 3);
  auto cps = generated([](double X, double Y, double Z) { return Point2{X + 0.01 * Z, Y}; }, 60,
                       true, 4);
  for (auto& cp : cps) {
    cp.sensed_x += n(rng);
    cp.sensed_y += n(rng);
  }
  for (const auto& spec : all_models()) {
    const auto res = fit(spec, cps);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      const auto p = res.model.apply(cps[i].ref_x, cps[i].ref_y,
                                     spec.family == ModelFamily::rfm ? cps[i].ref_z : std::nullopt);
      ASSERT_TRUE(p);
      EXPECT_NEAR(std::hypot(p->x - cps[i].sensed_x, p->y - cps[i].sensed_y), res.residuals[i],
                  1e-6)
          << spec.name();
    }
  }
}

TEST(Fit, PolynomialRmseNonIncreasingWithOrder) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 5);
  auto cps = generated(
      [](double X, double Y, double) {
        const double u = (X - 510000) / 1e4;
        return Point2{X + 100 * std::sin(u), Y + 50 * u * u};
      },
      80, false, 5);
  for (auto& cp : cps) cp.sensed_y += n(rng);
  double prev = INFINITY;
  for (int o = 1; o <= 5; ++o) {
    const double r = fit(ModelSpec::polynomial(o), cps).rmse;
    EXPECT_LE(r, prev + 1e-10);
    prev = r;
  }
}

TEST(Fit, Errors) {
  const auto f = [](double X, double Y, double) { return Point2{X, Y}; };
  EXPECT_EQ(code_of([&] { fit(ModelSpec::polynomial(2), generated(f, 5, false, 1)); }),
            Errc::insufficient_points);
  std::vector<ControlPoint> line;
  for (int i = 0; i < 10; ++i) line.push_back({double(i), double(2 * i), std::nullopt, 0, 0});
  EXPECT_EQ(code_of([&] { fit(ModelSpec::polynomial(1), line); }), Errc::degenerate_configuration);
  EXPECT_EQ(code_of([&] { fit(ModelSpec::rfm(1, DenomMode::unit), generated(f, 10, false, 1)); }),
            Errc::missing_dem);
}

TEST(FittedModel, SerializeRoundTrip) {
  auto cps = generated([](double X, double Y, double Z) { return Point2{X + Z / 7, Y - Z / 3}; },
                       50, true, 6);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0, 2);
  for (auto& cp : cps) {
    cp.sensed_x += n(rng);
    cp.sensed_y += n(rng);
  }
  const auto res = fit(ModelSpec::rfm(2, DenomMode::distinct), cps);
  const auto back = FittedModel::parse(res.model.serialize());
  EXPECT_EQ(back.spec, res.model.spec);
  EXPECT_EQ(back.norm, res.model.norm);
  EXPECT_EQ(back.coeffs_x, res.model.coeffs_x);
  EXPECT_EQ(back.coeffs_y, res.model.coeffs_y);
  EXPECT_THROW(FittedModel::parse("garbage"), Error);
}

TEST(Dem, AttachHeights) {
  RasterGrid dem(11, 11, 50.f);
  dem.geotransform = {0, 10, 0, 100, 0, -10};
  std::vector<ControlPoint> cps = {{15, 85, std::nullopt, 0, 0}, {99, 1, std::nullopt, 0, 0}};
  for (const auto& cp : attach_dem_heights(cps, dem)) EXPECT_EQ(*cp.ref_z, 50.0);

  for (int r = 0; r < 11; ++r)
    for (int c = 0; c < 11; ++c) dem.at(c, r) = static_cast<float>(0.01 * (10.0 * c));
  const auto ramp = attach_dem_heights(cps, dem);
  EXPECT_NEAR(*ramp[0].ref_z, 0.15, 1e-6);
  EXPECT_NEAR(*ramp[1].ref_z, 0.99, 1e-6);

  cps.push_back({500, 50, std::nullopt, 0, 0});
  try {
    attach_dem_heights(cps, dem);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dem_coverage);
    EXPECT_NE(std::string(e.what()).find('2'), std::string::npos);
  }
}
