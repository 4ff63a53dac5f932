#pragma once

#include <cstddef>
#include <string>

#include "sarreg/geomodels.hpp"
#include "sarreg/raster.hpp"

namespace sarreg {

struct TargetGrid {
  GeoTransform geotransform;
  int width = 1;
  int height = 1;
  std::string crs;

  static TargetGrid like(const RasterGrid& grid) {
    return {grid.geotransform, grid.width(), grid.height(), grid.crs};
  }
};

struct WarpResult {
  RasterGrid image;
  std::size_t evaluation_failures = 0;  ///< model or DEM could not be evaluated
  std::size_t outside = 0;              ///< mapped outside the sensed grid or onto nodata

  double failure_fraction() const noexcept {
    return image.size() ? static_cast<double>(evaluation_failures) / image.size() : 0.0;
  }
};

/// Inverse-mapping resample of `sensed` onto `target`: each output pixel's
/// reference map position is pushed through `model` (with the DEM height for
/// RFMs) and the sensed grid is sampled bilinearly there. Unmappable pixels
/// get the sensed nodata value (-9999 when the sensed grid has none).
/// Throws Error(missing_dem) for an RFM without a DEM.
WarpResult warp(const RasterGrid& sensed, const FittedModel& model, const TargetGrid& target,
                const RasterGrid* dem = nullptr, unsigned threads = 0);

}  // namespace sarreg
