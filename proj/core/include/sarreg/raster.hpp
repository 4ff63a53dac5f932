#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sarreg/geotransform.hpp"

namespace sarreg {

/// Pixel rectangle, top-left inclusive.
struct Window {
  long col0 = 0;
  long row0 = 0;
  long w = 1;
  long h = 1;
};

/// Single-band georeferenced raster. Samples are float32, row-major.
class RasterGrid {
 public:
  RasterGrid() = default;
  RasterGrid(int width, int height, float fill = 0.0f);
  RasterGrid(int width, int height, std::vector<float> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  float at(int col, int row) const { return data_[index(col, row)]; }
  float& at(int col, int row) { return data_[index(col, row)]; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> row(int r) const {
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(r) * width_, width_);
  }

  GeoTransform geotransform;
  std::string crs;
  std::optional<float> nodata;

  /// True when v is the nodata sentinel (NaN sentinels compare by NaN-ness).
  bool is_nodata(double v) const noexcept;
  /// nodata if set, otherwise quiet NaN.
  double nodata_value() const noexcept;

  bool contains(const Window& win) const noexcept;

 private:
  std::size_t index(int col, int row) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Map-coordinate bounding box of all pixel positions [0, w-1] x [0, h-1].
struct GeoBounds {
  double min_x, min_y, max_x, max_y;
};
GeoBounds pixel_bounds(const RasterGrid& grid);

/// Loads either on-disk format, chosen from the file extension:
///   NAME.bin + NAME.hdr  little-endian float32 payload
///   NAME.pgm + NAME.hdr  16-bit binary PGM
/// A bare NAME (or NAME.hdr) is resolved by the header's dtype.
RasterGrid load_raster(const std::string& path);

/// Writes the format selected by the extension (.pgm -> PGM, otherwise raw
/// float32). Values written to PGM are rounded and clamped to [0, 65535].
void save_raster(const RasterGrid& grid, const std::string& path);

/// Exact copy of a window; geotransform shifted so map positions are preserved.
RasterGrid extract(const RasterGrid& grid, const Window& win);

/// Restricts `sensed` to the reference's bounding box grown by `margin` sensed
/// pixels on each side, clamped to the sensed extent.
RasterGrid crop_to_overlap(const RasterGrid& sensed, const RasterGrid& reference, int margin);

/// Bilinear sample at fractional pixel coordinates. Neighbours with zero
/// weight are not consulted, so integer coordinates return the stored sample.
/// Returns nodata_value() if any contributing neighbour is outside the grid
/// or is nodata.
double sample_bilinear(const RasterGrid& grid, double col, double row) noexcept;

}  // namespace sarreg
