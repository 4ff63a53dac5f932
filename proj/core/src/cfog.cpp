#include "sarreg/cfog.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sarreg/error.hpp"

namespace sarreg {

Plane to_plane(const RasterGrid& grid) {
  Plane p(grid.width(), grid.height());
  std::copy(grid.data().begin(), grid.data().end(), p.data.begin());
  return p;
}

Plane to_plane(const RasterGrid& grid, const Window& win) {
  if (!grid.contains(win)) throw Error(Errc::invalid_argument, "window outside raster");
  Plane p(static_cast<int>(win.w), static_cast<int>(win.h));
  for (long r = 0; r < win.h; ++r) {
    const auto src = grid.row(static_cast<int>(win.row0 + r)).subspan(win.col0, win.w);
    std::copy(src.begin(), src.end(), p.data.begin() + r * win.w);
  }
  return p;
}

bool DescriptorVolume::all_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

void CfogParams::validate() const {
  if (m < 2) throw Error(Errc::invalid_argument, "CFOG needs at least 2 orientations");
  if (!(sigma_spatial > 0.0)) throw Error(Errc::invalid_argument, "sigma_spatial must be > 0");
  const double s = z_kernel[0] + z_kernel[1] + z_kernel[2];
  if (std::abs(s - 1.0) > 1e-12) throw Error(Errc::invalid_argument, "z_kernel must sum to 1");
}

Gradients gradient_xy(const Plane& image) {
  const int w = image.width;
  const int h = image.height;
  if (w < 3 || h < 3) throw Error(Errc::image_too_small, "gradient needs at least 3x3 pixels");
  Gradients g{Plane(w, h), Plane(w, h)};
  for (int r = 0; r < h; ++r) {
    const int ru = std::max(r - 1, 0);
    const int rd = std::min(r + 1, h - 1);
    for (int c = 0; c < w; ++c) {
      const int cl = std::max(c - 1, 0);
      const int cr = std::min(c + 1, w - 1);
      g.gx.at(c, r) = 0.5 * (image.at(cr, r) - image.at(cl, r));
      g.gy.at(c, r) = 0.5 * (image.at(c, rd) - image.at(c, ru));
    }
  }
  return g;
}

DescriptorVolume orientation_channels(const Plane& gx, const Plane& gy, int m) {
  if (m < 2) throw Error(Errc::invalid_argument, "need at least 2 orientations");
  if (gx.width != gy.width || gx.height != gy.height) {
    throw Error(Errc::size_mismatch, "gradient planes differ in size");
  }
  std::vector<double> cs(m), sn(m);
  for (int i = 0; i < m; ++i) {
    const double theta = std::numbers::pi * i / m;
    cs[i] = std::cos(theta);
    sn[i] = std::sin(theta);
  }
  // Exact axis values keep theta = 0 and 90 degrees free of rounding noise.
  sn[0] = 0.0;
  cs[0] = 1.0;
  if (m % 2 == 0) {
    cs[m / 2] = 0.0;
    sn[m / 2] = 1.0;
  }
  DescriptorVolume vol(gx.width, gx.height, m);
  const std::size_t n = gx.data.size();
  for (std::size_t p = 0; p < n; ++p) {
    const double x = gx.data[p];
    const double y = gy.data[p];
    double* out = vol.values.data() + p * m;
    for (int i = 0; i < m; ++i) out[i] = std::abs(cs[i] * x + sn[i] * y);
  }
  return vol;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

DescriptorVolume smooth_3d(const DescriptorVolume& raw, const CfogParams& params) {
  params.validate();
  if (raw.m != params.m) throw Error(Errc::size_mismatch, "channel count differs from params.m");
  const int w = raw.width;
  const int h = raw.height;
  const int m = raw.m;
  const auto taps = gaussian_kernel(params.sigma_spatial);
  const int radius = static_cast<int>(taps.size() / 2);

  // Both passes accumulate taps in ascending order into zeroed rows; away
  // from the borders a tap is a shifted multiply-add over a whole row.
  const std::size_t row_len = static_cast<std::size_t>(w) * m;
  DescriptorVolume tmp(w, h, m);
  for (int r = 0; r < h; ++r) {
    const double* src = raw.values.data() + r * row_len;
    double* dst = tmp.values.data() + r * row_len;
    auto clamped_column = [&](int c) {
      for (int t = -radius; t <= radius; ++t) {
        const double* s = src + static_cast<std::size_t>(std::clamp(c + t, 0, w - 1)) * m;
        double* d = dst + static_cast<std::size_t>(c) * m;
        for (int k = 0; k < m; ++k) d[k] += taps[t + radius] * s[k];
      }
    };
    const int lo = std::min(radius, w);
    const int hi = std::max(lo, w - radius);
    for (int c = 0; c < lo; ++c) clamped_column(c);
    for (int t = -radius; t <= radius; ++t) {
      const double wt = taps[t + radius];
      const double* s = src + static_cast<std::ptrdiff_t>(t) * m;
      const std::size_t end = static_cast<std::size_t>(hi) * m;
      for (std::size_t i = static_cast<std::size_t>(lo) * m; i < end; ++i) dst[i] += wt * s[i];
    }
    for (int c = hi; c < w; ++c) clamped_column(c);
  }
  DescriptorVolume spatial(w, h, m);
  for (int r = 0; r < h; ++r) {
    double* dst = spatial.values.data() + r * row_len;
    for (int t = -radius; t <= radius; ++t) {
      const double wt = taps[t + radius];
      const double* s = tmp.values.data() + std::clamp(r + t, 0, h - 1) * row_len;
      for (std::size_t i = 0; i < row_len; ++i) dst[i] += wt * s[i];
    }
  }
  // Orientation axis, circular.
  DescriptorVolume out(w, h, m);
  const auto& z = params.z_kernel;
  const std::size_t npix = static_cast<std::size_t>(w) * h;
  for (std::size_t p = 0; p < npix; ++p) {
    const double* src = spatial.values.data() + p * m;
    double* dst = out.values.data() + p * m;
    for (int k = 0; k < m; ++k) {
      dst[k] = z[0] * src[(k + m - 1) % m] + z[1] * src[k] + z[2] * src[(k + 1) % m];
    }
  }
  return out;
}

void normalize_pixels(DescriptorVolume& vol) {
  const std::size_t npix = static_cast<std::size_t>(vol.width) * vol.height;
  for (std::size_t p = 0; p < npix; ++p) {
    double* v = vol.values.data() + p * vol.m;
    double ss = 0.0;
    for (int k = 0; k < vol.m; ++k) ss += v[k] * v[k];
    if (ss > 0.0) {
      const double inv = 1.0 / std::sqrt(ss);
      for (int k = 0; k < vol.m; ++k) v[k] *= inv;
    }
  }
}

DescriptorVolume build_cfog(const Plane& image, const CfogParams& params, bool normalize) {
  params.validate();
  const Gradients g = gradient_xy(image);
  DescriptorVolume vol = smooth_3d(orientation_channels(g.gx, g.gy, params.m), params);
  if (normalize) normalize_pixels(vol);
  return vol;
}

}  // namespace sarreg
