#include "sarreg/warp.hpp"

#include <atomic>
#include <cmath>

#include "sarreg/error.hpp"
#include "sarreg/parallel.hpp"

namespace sarreg {

namespace {

// Rounding in a fitted model can put an exact edge pixel a hair outside.
double snap_to_edge(double v, int extent) noexcept {
  constexpr double kEdge = 1e-9;
  if (v < 0.0 && v > -kEdge) return 0.0;
  const double last = extent - 1;
  if (v > last && v < last + kEdge) return last;
  return v;
}

}  // namespace

WarpResult warp(const RasterGrid& sensed, const FittedModel& model, const TargetGrid& target,
                const RasterGrid* dem, unsigned threads) {
  const bool is_rfm = model.spec.family == ModelFamily::rfm;
  if (is_rfm && dem == nullptr) {
    throw Error(Errc::missing_dem, "RFM warping requires a DEM");
  }
  const float fill = sensed.nodata.value_or(-9999.0f);
  WarpResult result{RasterGrid(target.width, target.height, fill)};
  result.image.geotransform = target.geotransform;
  result.image.crs = target.crs;
  result.image.nodata = fill;

  std::atomic<std::size_t> failures{0}, outside{0};
  parallel_for(static_cast<std::size_t>(target.height), threads, [&](std::size_t r) {
    std::size_t row_fail = 0, row_out = 0;
    auto out_row = result.image.data().subspan(r * target.width, target.width);
    for (int c = 0; c < target.width; ++c) {
      const Point2 g = pixel_to_geo(target.geotransform, c, static_cast<double>(r));
      std::optional<double> z;
      if (is_rfm) {
        z = dem_height(*dem, g.x, g.y);
        if (!z) {
          ++row_fail;
          continue;
        }
      }
      const auto p = model.apply(g.x, g.y, z);
      if (!p) {
        ++row_fail;
        continue;
      }
      const Point2 px = geo_to_pixel(sensed.geotransform, p->x, p->y);
      const double v = sample_bilinear(sensed, snap_to_edge(px.x, sensed.width()),
                                       snap_to_edge(px.y, sensed.height()));
      if (sensed.is_nodata(v) || std::isnan(v)) {
        ++row_out;
        continue;
      }
      out_row[c] = static_cast<float>(v);
    }
    failures += row_fail;
    outside += row_out;
  });
  result.evaluation_failures = failures;
  result.outside = outside;
  return result;
}

}  // namespace sarreg
