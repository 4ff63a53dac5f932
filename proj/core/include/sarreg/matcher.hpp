#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sarreg/cfog.hpp"
#include "sarreg/keypoints.hpp"
#include "sarreg/raster.hpp"

namespace sarreg {

enum class DescriptorMode {
  cfog,
  /// Single-channel raw intensities; a diagnostic baseline only.
  raw_intensity,
};

struct MatchParams {
  int template_size = 100;  ///< square side, even
  int search_size = 200;    ///< square side, even, > template_size
  CfogParams cfog;
  bool normalize = true;
  bool subpixel = false;
  DescriptorMode descriptor = DescriptorMode::cfog;

  void validate() const;
  /// Largest |offset| a match can report on either axis.
  int max_offset() const noexcept { return (search_size - template_size) / 2; }
};

struct Correspondence {
  double ref_col = 0.0;
  double ref_row = 0.0;
  double sensed_col = 0.0;
  double sensed_row = 0.0;
  Point2 ref_geo;
  Point2 sensed_geo;
  double peak = 0.0;
};

struct PixelPos {
  long col = 0;
  long row = 0;
  bool operator==(const PixelPos&) const = default;
};

/// Sensed pixel nearest to the map position of `pt` in the reference.
/// Throws Error(crs_mismatch) when the grids disagree on CRS.
PixelPos predict_search_center(const InterestPoint& pt, const RasterGrid& ref,
                               const RasterGrid& sensed);

/// True when a search_size square centred (at size/2) on `center` lies inside.
bool window_fits(const PixelPos& center, const RasterGrid& grid, int size) noexcept;

struct PhaseCorrelation {
  int x0 = 0;  ///< signed shift of s relative to t along columns
  int y0 = 0;  ///< signed shift along rows
  int peak_channel = 0;
  double peak = 0.0;         ///< inverse-transform value at the peak, scaled so a pure shift gives 1
  double second_peak = 0.0;  ///< largest value outside the 3x3 spatial neighbourhood of the peak
  /// Channel-0 surface values around the peak (circular neighbours).
  double left = 0.0, right = 0.0, up = 0.0, down = 0.0;
};

/// Translation between two descriptor volumes by 3D phase correlation. The
/// template is embedded at the top-left of a zero frame the size of `s_vol`;
/// with s(x, y, z) = t(x - x0, y - y0, z) the result is (x0, y0). Offsets are
/// unwrapped so values above size/2 become negative. Returns nullopt when
/// either volume is identically zero.
std::optional<PhaseCorrelation> phase_correlate_3d(const DescriptorVolume& t_vol,
                                                   const DescriptorVolume& s_vol);

enum class SkipReason {
  template_off_image,
  search_off_image,
  nodata_in_window,
  flat_descriptor,
  off_axis_peak,
  offset_out_of_range,
};
std::string_view skip_reason_name(SkipReason r) noexcept;

struct MatchResult {
  std::optional<Correspondence> match;
  SkipReason reason = SkipReason::flat_descriptor;  ///< meaningful only without a match
};

DescriptorVolume describe(const Plane& window, const MatchParams& params);

MatchResult match_point(const InterestPoint& pt, const RasterGrid& ref, const RasterGrid& sensed,
                        const MatchParams& params);

struct MatchReport {
  std::vector<Correspondence> matches;   ///< input order, skips omitted
  std::vector<std::size_t> point_index;  ///< source point of each match
  std::vector<std::pair<std::size_t, SkipReason>> skipped;
};

MatchReport match_all(const std::vector<InterestPoint>& points, const RasterGrid& ref,
                      const RasterGrid& sensed, const MatchParams& params, unsigned threads = 0);

/// `ref_col,ref_row,sensed_col,sensed_row,ref_x,ref_y,sensed_x,sensed_y,peak`
/// with an optional trailing `inlier` column (0/1).
void write_correspondences_csv(std::ostream& out, const std::vector<Correspondence>& corrs,
                               const std::vector<bool>* inlier = nullptr);
void save_correspondences_csv(const std::string& path, const std::vector<Correspondence>& corrs,
                              const std::vector<bool>* inlier = nullptr);
std::vector<Correspondence> parse_correspondences_csv(std::string_view text,
                                                      std::string_view origin = "<csv>");
std::vector<Correspondence> load_correspondences_csv(const std::string& path);

}  // namespace sarreg
