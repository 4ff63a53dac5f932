#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sarreg/geomodels.hpp"
#include "sarreg/raster.hpp"
#include "sarreg/textio.hpp"

namespace sarreg {

enum class Texture { fractal, blobs };
enum class Radiometry { identity, gamma, log_remap };

/// Description of a synthetic reference/sensed pair.
///
/// The planted warp is a polynomial displacement field in pixels,
///   dx(u, v) = sum_k warp_dx[k] * basis_k(u, v)   (columns, east)
///   dy(u, v) = sum_k warp_dy[k] * basis_k(u, v)   (rows, south)
/// where (u, v) are reference map coordinates scaled to [-1, 1] over the
/// reference footprint (v points north) and basis_k is poly_basis of
/// warp_order. A feature at reference pixel (c, r) shows up in the sensed
/// image at map position ref_geo + (dx * pixel_size, -dy * pixel_size).
struct SynthSpec {
  int size = 512;  ///< reference side, px
  Texture texture = Texture::fractal;
  Radiometry radiometry = Radiometry::identity;
  double gamma = 0.4;
  double speckle_var = 0.0;
  std::uint64_t seed = 0;
  int sensed_pad = 128;  ///< extra sensed pixels on every side
  double pixel_size = 10.0;
  double origin_x = 500000.0;
  double origin_y = 4000000.0;
  std::string crs = "EPSG:32650";
  int warp_order = 1;
  std::vector<double> warp_dx;  ///< empty means zero
  std::vector<double> warp_dy;
  double dem_relief = 100.0;  ///< metres, peak to peak

  void validate() const;

  static SynthSpec translation(int size, double dx, double dy, std::uint64_t seed);

  KeyValueFile to_manifest() const;
  /// Missing keys keep their defaults.
  static SynthSpec from_manifest(const KeyValueFile& kv);
};

struct SynthDataset {
  RasterGrid reference;
  RasterGrid sensed;
  RasterGrid dem;  ///< on the sensed grid, so it covers the reference with margin
  FittedModel truth;  ///< reference map -> sensed map, polynomial of warp_order
};

/// Seeded multi-octave value noise (fractal) or value noise plus hard-edged
/// discs (blobs), roughly in [0, 1]. Continuous in (col, row), so samples at
/// fractional positions are exact draws of the same scene.
double texture_value(Texture texture, std::uint64_t seed, double col, double row) noexcept;

/// width x height samples of texture_value starting at (col0, row0).
RasterGrid render_texture(Texture texture, std::uint64_t seed, int width, int height,
                          long col0 = 0, long row0 = 0);

/// Planted displacement (dx, dy) in pixels at reference pixel (col, row).
Point2 planted_displacement(const SynthSpec& spec, double col, double row);

/// Throws Error(non_invertible_warp) if the planted warp folds anywhere over
/// the sensed footprint.
SynthDataset generate(const SynthSpec& spec);

/// reference.bin, sensed.bin, dem.bin (each with .hdr), truth.model and
/// manifest.txt inside `dir`, which is created if needed.
void write_dataset(const SynthDataset& data, const SynthSpec& spec, const std::string& dir);

}  // namespace sarreg
