#pragma once

namespace sarreg {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Affine pixel-to-map transform in the six-term GDAL layout:
///   x = origin_x + col * pixel_w + row * row_rot
///   y = origin_y + col * col_rot + row * pixel_h
struct GeoTransform {
  double origin_x = 0.0;
  double pixel_w = 1.0;
  double row_rot = 0.0;
  double origin_y = 0.0;
  double col_rot = 0.0;
  double pixel_h = 1.0;

  double determinant() const noexcept { return pixel_w * pixel_h - row_rot * col_rot; }
  bool operator==(const GeoTransform&) const = default;
};

Point2 pixel_to_geo(const GeoTransform& gt, double col, double row) noexcept;

/// Inverse of pixel_to_geo. Throws Error(singular_transform) when the linear
/// part has zero determinant.
Point2 geo_to_pixel(const GeoTransform& gt, double x, double y);

/// Geotransform of the sub-grid whose pixel (0, 0) is (col0, row0) of `gt`.
GeoTransform shifted(const GeoTransform& gt, double col0, double row0) noexcept;

}  // namespace sarreg
