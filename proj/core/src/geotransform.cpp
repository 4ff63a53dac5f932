#include "sarreg/geotransform.hpp"

#include "sarreg/error.hpp"

namespace sarreg {

Point2 pixel_to_geo(const GeoTransform& gt, double col, double row) noexcept {
  return {gt.origin_x + col * gt.pixel_w + row * gt.row_rot,
          gt.origin_y + col * gt.col_rot + row * gt.pixel_h};
}

Point2 geo_to_pixel(const GeoTransform& gt, double x, double y) {
  const double det = gt.determinant();
  if (det == 0.0) throw Error(Errc::singular_transform, "geotransform is singular");
  const double dx = x - gt.origin_x;
  const double dy = y - gt.origin_y;
  // Axis-aligned transforms avoid the cross terms so integer pixels stay exact.
  if (gt.row_rot == 0.0 && gt.col_rot == 0.0) {
    return {dx / gt.pixel_w, dy / gt.pixel_h};
  }
  return {(gt.pixel_h * dx - gt.row_rot * dy) / det, (gt.pixel_w * dy - gt.col_rot * dx) / det};
}

GeoTransform shifted(const GeoTransform& gt, double col0, double row0) noexcept {
  GeoTransform out = gt;
  const Point2 o = pixel_to_geo(gt, col0, row0);
  out.origin_x = o.x;
  out.origin_y = o.y;
  return out;
}

}  // namespace sarreg
