#pragma once

#include <array>
#include <optional>
#include <vector>

#include "sarreg/raster.hpp"

namespace sarreg {

struct InterestPoint {
  int col = 0;
  int row = 0;
  double score = 0.0;

  bool operator==(const InterestPoint&) const = default;
};

struct BlockGridParams {
  int n_blocks = 20;    ///< blocks per side
  int k_per_block = 1;  ///< points kept per block
  /// Segment-test threshold in intensity units; unset means 2% of the
  /// image's dynamic range.
  std::optional<double> fast_threshold;
  /// Minimum distance from every edge; at least 3 so the circle fits.
  int border = 50;

  void validate() const;
};

/// Bresenham circle of radius 3 in clockwise order starting at 12 o'clock.
inline constexpr std::array<std::array<int, 2>, 16> kFastCircle = {{
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
}};

inline constexpr int kFastArc = 9;

/// FAST-9 corner score at (col, row). Zero unless some run of at least nine
/// contiguous circle pixels is entirely brighter than centre + threshold or
/// entirely darker than centre - threshold; otherwise the sum of
/// |circle - centre| - threshold over that run. The pixel must lie at least
/// 3 px from every edge.
double fast_score(const RasterGrid& image, int col, int row, double threshold);

/// 2% of (max - min) over the non-nodata samples.
double default_fast_threshold(const RasterGrid& image);

/// Splits the image into n_blocks x n_blocks blocks (the last row/column of
/// blocks absorbs the remainder) and keeps the k highest positive FAST scores
/// in each. Ties are broken by (row, col). Output is block-major.
std::vector<InterestPoint> detect_block_fast(const RasterGrid& image,
                                             const BlockGridParams& params,
                                             unsigned threads = 0);

}  // namespace sarreg
