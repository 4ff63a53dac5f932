#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "sarreg/error.hpp"
#include "sarreg/synthgen.hpp"
#include "scratch.hpp"

using namespace sarreg;

namespace {

bool same_pixels(const RasterGrid& a, const RasterGrid& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(Synthgen, IdentityWarpReproducesReference) {
  SynthSpec s;
  s.size = 96;
  s.sensed_pad = 16;
  s.seed = 3;
  const auto d = generate(s);
  for (int r = 0; r < s.size; ++r)
    for (int c = 0; c < s.size; ++c)
      ASSERT_EQ(d.sensed.at(c + 16, r + 16), d.reference.at(c, r)) << c << "," << r;
  const auto a = pixel_to_geo(d.reference.geotransform, 0, 0);
  const auto b = pixel_to_geo(d.sensed.geotransform, 16, 16);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
}

TEST(Synthgen, SameSeedIsBitwiseIdentical) {
  SynthSpec s = SynthSpec::translation(128, 2.5, -1.25, 9);
  s.radiometry = Radiometry::log_remap;
  s.speckle_var = 0.05;
  s.texture = Texture::blobs;
  const auto a = generate(s), b = generate(s);
  EXPECT_TRUE(same_pixels(a.reference, b.reference));
  EXPECT_TRUE(same_pixels(a.sensed, b.sensed));
  EXPECT_TRUE(same_pixels(a.dem, b.dem));
  EXPECT_EQ(a.truth.serialize(), b.truth.serialize());
  s.seed = 10;
  EXPECT_FALSE(same_pixels(a.sensed, generate(s).sensed));
}

TEST(Synthgen, TruthMatchesPlantedWarp) {
  SynthSpec s;
  s.size = 256;
  s.warp_order = 3;
  s.warp_dx = {20, 1, -2, 3, 1, -2, 2, 0, 1, 0};
  s.warp_dy = {-12, 0, 1, -2, 2, 1, 0, -1, 0, 2};
  const auto d = generate(s);
  for (int r = 0; r < s.size; r += 17)
    for (int c = 0; c < s.size; c += 13) {
      const Point2 disp = planted_displacement(s, c, r);
      const Point2 g = pixel_to_geo(d.reference.geotransform, c, r);
      const auto t = d.truth.apply(g.x, g.y);
      ASSERT_TRUE(t);
      const Point2 sp = geo_to_pixel(d.sensed.geotransform, t->x, t->y);
      EXPECT_NEAR(sp.x, c + disp.x + s.sensed_pad, 1e-7);
      EXPECT_NEAR(sp.y, r + disp.y + s.sensed_pad, 1e-7);
    }
}

TEST(Synthgen, SensedSamplesTheWarpedScene) {
  SynthSpec s;
  s.size = 128;
  s.sensed_pad = 32;
  s.warp_order = 2;
  s.warp_dx = {4, 1, 0, 2, 0, -1};
  s.warp_dy = {-3, 0, 1, 0, 1, 0};
  const auto d = generate(s);
  // Sensed pixel t shows the scene at the reference position p with
  // p + displacement(p) = t; the displacement is gentle so plain fixed-point
  // iteration finds p.
  for (int rs = 40; rs < 150; rs += 9)
    for (int cs = 40; cs < 150; cs += 11) {
      const double tc = cs - s.sensed_pad, tr = rs - s.sensed_pad;
      double c = tc, r = tr;
      for (int it = 0; it < 200; ++it) {
        const Point2 disp = planted_displacement(s, c, r);
        c = tc - disp.x;
        r = tr - disp.y;
      }
      EXPECT_NEAR(d.sensed.at(cs, rs) / 1000.0, texture_value(s.texture, s.seed, c, r), 1e-6);
    }
}

TEST(Synthgen, SpeckleHasUnitMean) {
  SynthSpec s;
  s.size = 256;
  s.sensed_pad = 0;
  s.speckle_var = 0.1;
  const auto d = generate(s);
  double sum = 0.0, sq = 0.0, n = 0.0;
  for (int r = 0; r < s.size; ++r)
    for (int c = 0; c < s.size; ++c) {
      const double ref = d.reference.at(c, r);
      if (ref < 50.0) continue;
      const double ratio = d.sensed.at(c, r) / ref;
      sum += ratio;
      sq += ratio * ratio;
      n += 1;
    }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 1.0, 0.01);
  EXPECT_NEAR(sq / n - mean * mean, 0.1, 0.01);
}

TEST(Synthgen, FoldingWarpIsRejected) {
  SynthSpec s;
  s.size = 64;
  s.warp_dx = {0, -40, 0};
  s.warp_dy = {0, 0, 0};
  try {
    generate(s);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_invertible_warp);
  }
}

TEST(Synthgen, ValidateRejectsBadSpecs) {
  SynthSpec s;
  s.speckle_var = -0.1;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.warp_dx = {1, 2};
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.size = 4;
  EXPECT_THROW(s.validate(), Error);
}

TEST(Synthgen, ManifestRoundTrip) {
  SynthSpec s;
  s.size = 300;
  s.texture = Texture::blobs;
  s.radiometry = Radiometry::gamma;
  s.gamma = 0.55;
  s.speckle_var = 0.03;
  s.seed = 77;
  s.warp_order = 2;
  s.warp_dx = {1.5, 0, 0, 0.25, 0, 0};
  s.warp_dy = {-2, 0, 0, 0, 0, 0.125};
  const auto back = SynthSpec::from_manifest(s.to_manifest());
  EXPECT_EQ(back.to_manifest().values(), s.to_manifest().values());
  EXPECT_EQ(back.warp_dx, s.warp_dx);
  EXPECT_EQ(back.texture, Texture::blobs);
  EXPECT_THROW(SynthSpec::from_manifest(KeyValueFile::parse("texture = plaid\n")), Error);
}

TEST(Synthgen, WriteDataset) {
  const auto dir = scratch_dir();
  SynthSpec s = SynthSpec::translation(64, 1, 1, 1);
  s.sensed_pad = 8;
  write_dataset(generate(s), s, dir.string());
  for (const char* f : {"reference.bin", "reference.hdr", "sensed.bin", "dem.bin", "truth.model",
                        "manifest.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto ref = load_raster((dir / "reference.bin").string());
  EXPECT_EQ(ref.width(), 64);
  EXPECT_EQ(FittedModel::load((dir / "truth.model").string()).spec, ModelSpec::polynomial(1));
}
