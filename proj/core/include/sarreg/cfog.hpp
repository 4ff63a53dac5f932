#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "sarreg/raster.hpp"

namespace sarreg {

/// Dense double-precision image used for intermediate products.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double at(int c, int r) const { return data[static_cast<std::size_t>(r) * width + c]; }
  double& at(int c, int r) { return data[static_cast<std::size_t>(r) * width + c]; }
};

Plane to_plane(const RasterGrid& grid);
Plane to_plane(const RasterGrid& grid, const Window& win);

/// H x W x m stack of orientated-gradient responses, row-major with the
/// channel index innermost.
struct DescriptorVolume {
  int width = 0;
  int height = 0;
  int m = 0;
  std::vector<double> values;

  DescriptorVolume() = default;
  DescriptorVolume(int w, int h, int channels)
      : width(w), height(h), m(channels),
        values(static_cast<std::size_t>(w) * h * channels, 0.0) {}

  std::size_t index(int c, int r, int k) const {
    return (static_cast<std::size_t>(r) * width + c) * m + k;
  }
  double at(int c, int r, int k) const { return values[index(c, r, k)]; }
  double& at(int c, int r, int k) { return values[index(c, r, k)]; }
  bool all_zero() const;
};

struct CfogParams {
  int m = 9;
  double sigma_spatial = 0.8;
  std::array<double, 3> z_kernel = {0.25, 0.5, 0.25};

  void validate() const;
};

struct Gradients {
  Plane gx;
  Plane gy;
};

/// Central differences with replicated borders. Needs at least 3x3.
Gradients gradient_xy(const Plane& image);

/// Channel i holds |cos(theta_i) gx + sin(theta_i) gy| with theta_i = i*180/m
/// degrees.
DescriptorVolume orientation_channels(const Plane& gx, const Plane& gy, int m);

/// Separable spatial Gaussian (radius ceil(3 sigma), replicated borders)
/// followed by z_kernel along the circular orientation axis.
DescriptorVolume smooth_3d(const DescriptorVolume& raw, const CfogParams& params);

/// Normalised 1D Gaussian taps of length 2*ceil(3 sigma)+1.
std::vector<double> gaussian_kernel(double sigma);

/// Full descriptor: gradients, orientation channels, 3D smoothing and, when
/// `normalize` is set, unit L2 norm per pixel (all-zero pixels stay zero).
DescriptorVolume build_cfog(const Plane& image, const CfogParams& params, bool normalize = true);

void normalize_pixels(DescriptorVolume& vol);

}  // namespace sarreg
