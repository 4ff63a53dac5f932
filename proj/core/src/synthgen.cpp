#include "sarreg/synthgen.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>

#include "hash.hpp"
#include "sarreg/error.hpp"
#include "sarreg/parallel.hpp"

namespace sarreg {

namespace {

using detail::splitmix64;

constexpr double kIntensityScale = 1000.0;

double lattice(std::uint64_t seed, long ix, long iy, int octave) noexcept {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(octave) + 0x1000));
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iy) * 0x9E3779B97F4A7C15ull);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) noexcept { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, double x, double y, int octave) noexcept {
  const double fx = std::floor(x), fy = std::floor(y);
  const long ix = static_cast<long>(fx), iy = static_cast<long>(fy);
  const double tx = smooth(x - fx), ty = smooth(y - fy);
  const double a = lattice(seed, ix, iy, octave), b = lattice(seed, ix + 1, iy, octave);
  const double c = lattice(seed, ix, iy + 1, octave), d = lattice(seed, ix + 1, iy + 1, octave);
  return (a + (b - a) * tx) * (1.0 - ty) + (c + (d - c) * tx) * ty;
}

// Octaves from 40 px down to 2.5 px, amplitude doubling towards the fine end.
// Averaging shrinks the spread, so it is stretched back to that of a single
// octave; phase correlation under speckle needs the fine-scale contrast.
double fractal(std::uint64_t seed, double col, double row) noexcept {
  double sum = 0.0, norm = 0.0, sq = 0.0, amp = 1.0, cell = 40.0;
  for (int o = 0; o < 5; ++o) {
    sum += amp * value_noise(seed, col / cell, row / cell, o);
    norm += amp;
    sq += amp * amp;
    amp *= 2.0;
    cell *= 0.5;
  }
  const double stretch = norm / std::sqrt(sq);
  return std::clamp(0.5 + (sum / norm - 0.5) * stretch, 0.0, 1.0);
}

double blobs(std::uint64_t seed, double col, double row) noexcept {
  constexpr double kCell = 40.0;
  double v = 0.35;
  const long cx = static_cast<long>(std::floor(col / kCell));
  const long cy = static_cast<long>(std::floor(row / kCell));
  for (long j = cy - 1; j <= cy + 1; ++j) {
    for (long i = cx - 1; i <= cx + 1; ++i) {
      const std::uint64_t s = seed ^ 0xB10B5ull;
      if (lattice(s, i, j, 100) > 0.7) continue;
      const double px = (static_cast<double>(i) + lattice(s, i, j, 101)) * kCell;
      const double py = (static_cast<double>(j) + lattice(s, i, j, 102)) * kCell;
      const double rad = 6.0 + 12.0 * lattice(s, i, j, 103);
      if ((col - px) * (col - px) + (row - py) * (row - py) <= rad * rad) {
        v = lattice(s, i, j, 104);
      }
    }
  }
  return 0.7 * v + 0.3 * fractal(seed, col, row);
}

/// Displacement polynomial and its partial derivatives in (u, v).
struct PolyEval {
  double value, du, dv;
};

PolyEval eval_poly(const std::vector<double>& coeffs, int order, double u, double v) noexcept {
  PolyEval e{0.0, 0.0, 0.0};
  if (coeffs.empty()) return e;
  std::array<double, 6> pu{1.0}, pv{1.0};
  for (int i = 1; i <= order; ++i) {
    pu[i] = pu[i - 1] * u;
    pv[i] = pv[i - 1] * v;
  }
  std::size_t k = 0;
  for (int d = 0; d <= order; ++d) {
    for (int i = d; i >= 0; --i, ++k) {
      const int j = d - i;
      const double a = coeffs[k];
      if (a == 0.0) continue;
      e.value += a * pu[i] * pv[j];
      if (i > 0) e.du += a * i * pu[i - 1] * pv[j];
      if (j > 0) e.dv += a * j * pu[i] * pv[j - 1];
    }
  }
  return e;
}

struct Warp {
  const SynthSpec& spec;
  double center, half;

  explicit Warp(const SynthSpec& s)
      : spec(s), center((s.size - 1) / 2.0), half((s.size - 1) / 2.0) {}

  /// Forward map in reference pixel space plus its Jacobian.
  void forward(double c, double r, double& fc, double& fr, double j[4]) const noexcept {
    const double u = (c - center) / half, v = (center - r) / half;
    const PolyEval ex = eval_poly(spec.warp_dx, spec.warp_order, u, v);
    const PolyEval ey = eval_poly(spec.warp_dy, spec.warp_order, u, v);
    fc = c + ex.value;
    fr = r + ey.value;
    j[0] = 1.0 + ex.du / half;
    j[1] = -ex.dv / half;
    j[2] = ey.du / half;
    j[3] = 1.0 - ey.dv / half;
  }

  /// Reference pixel whose feature lands at (tc, tr).
  bool invert(double tc, double tr, double& c, double& r) const noexcept {
    c = tc;
    r = tr;
    for (int it = 0; it < 50; ++it) {
      double fc, fr, j[4];
      forward(c, r, fc, fr, j);
      const double ec = fc - tc, er = fr - tr;
      if (ec == 0.0 && er == 0.0) return true;
      const double det = j[0] * j[3] - j[1] * j[2];
      if (!(det > 0.0)) return false;
      const double sc = (j[3] * ec - j[1] * er) / det;
      const double sr = (j[0] * er - j[2] * ec) / det;
      c -= sc;
      r -= sr;
      if (std::abs(sc) + std::abs(sr) < 1e-12) return true;
    }
    return false;
  }
};

double radiometric(const SynthSpec& spec, double v) noexcept {
  v = std::clamp(v, 0.0, 1.0);
  switch (spec.radiometry) {
    case Radiometry::gamma:
      return std::pow(v, spec.gamma);
    case Radiometry::log_remap:
      return std::log1p(50.0 * v) / std::log1p(50.0);
    case Radiometry::identity:
      break;
  }
  return v;
}

const char* texture_name(Texture t) { return t == Texture::blobs ? "blobs" : "fractal"; }

const char* radiometry_name(Radiometry r) {
  switch (r) {
    case Radiometry::gamma:
      return "gamma";
    case Radiometry::log_remap:
      return "log";
    case Radiometry::identity:
      break;
  }
  return "identity";
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

}  // namespace

double texture_value(Texture texture, std::uint64_t seed, double col, double row) noexcept {
  return texture == Texture::blobs ? blobs(seed, col, row) : fractal(seed, col, row);
}

RasterGrid render_texture(Texture texture, std::uint64_t seed, int width, int height, long col0,
                          long row0) {
  RasterGrid g(width, height);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      g.at(c, r) = static_cast<float>(
          kIntensityScale * texture_value(texture, seed, static_cast<double>(col0 + c),
                                          static_cast<double>(row0 + r)));
  return g;
}

void SynthSpec::validate() const {
  if (size < 16) throw Error(Errc::invalid_argument, "synthetic size must be at least 16");
  if (sensed_pad < 0) throw Error(Errc::invalid_argument, "sensed_pad must be >= 0");
  if (!(pixel_size > 0.0)) throw Error(Errc::invalid_argument, "pixel_size must be > 0");
  if (!(speckle_var >= 0.0)) throw Error(Errc::invalid_argument, "speckle_var must be >= 0");
  if (!(gamma > 0.0)) throw Error(Errc::invalid_argument, "gamma must be > 0");
  if (!(dem_relief >= 0.0)) throw Error(Errc::invalid_argument, "dem_relief must be >= 0");
  if (warp_order < 1 || warp_order > 5) {
    throw Error(Errc::invalid_argument, "warp_order must be in 1..5");
  }
  const std::size_t terms = static_cast<std::size_t>((warp_order + 1) * (warp_order + 2) / 2);
  for (const auto* w : {&warp_dx, &warp_dy}) {
    if (!w->empty() && w->size() != terms) {
      throw Error(Errc::invalid_argument,
                  "warp coefficients need " + std::to_string(terms) + " terms for order " +
                      std::to_string(warp_order));
    }
  }
}

SynthSpec SynthSpec::translation(int size, double dx, double dy, std::uint64_t seed) {
  SynthSpec s;
  s.size = size;
  s.seed = seed;
  s.warp_order = 1;
  s.warp_dx = {dx, 0.0, 0.0};
  s.warp_dy = {dy, 0.0, 0.0};
  return s;
}

KeyValueFile SynthSpec::to_manifest() const {
  KeyValueFile kv;
  kv.set("size", std::to_string(size));
  kv.set("texture", texture_name(texture));
  kv.set("radiometry", radiometry_name(radiometry));
  kv.set("gamma", format_double(gamma));
  kv.set("speckle_var", format_double(speckle_var));
  kv.set("seed", std::to_string(seed));
  kv.set("sensed_pad", std::to_string(sensed_pad));
  kv.set("pixel_size", format_double(pixel_size));
  kv.set("origin_x", format_double(origin_x));
  kv.set("origin_y", format_double(origin_y));
  kv.set("crs", crs);
  kv.set("warp_order", std::to_string(warp_order));
  kv.set("warp_dx", join(warp_dx));
  kv.set("warp_dy", join(warp_dy));
  kv.set("dem_relief", format_double(dem_relief));
  return kv;
}

SynthSpec SynthSpec::from_manifest(const KeyValueFile& kv) {
  SynthSpec s;
  auto num = [&](const char* k, double& out) {
    if (kv.has(k)) out = parse_double(kv.get(k));
  };
  auto integer = [&](const char* k, auto& out) {
    if (kv.has(k)) out = static_cast<std::remove_reference_t<decltype(out)>>(parse_int(kv.get(k)));
  };
  integer("size", s.size);
  if (kv.has("texture")) {
    const auto& t = kv.get("texture");
    if (t == "fractal") s.texture = Texture::fractal;
    else if (t == "blobs") s.texture = Texture::blobs;
    else throw Error(Errc::config, "unknown texture '" + t + "'");
  }
  if (kv.has("radiometry")) {
    const auto& r = kv.get("radiometry");
    if (r == "identity") s.radiometry = Radiometry::identity;
    else if (r == "gamma") s.radiometry = Radiometry::gamma;
    else if (r == "log") s.radiometry = Radiometry::log_remap;
    else throw Error(Errc::config, "unknown radiometry '" + r + "'");
  }
  num("gamma", s.gamma);
  num("speckle_var", s.speckle_var);
  if (kv.has("seed")) s.seed = std::stoull(kv.get("seed"));
  integer("sensed_pad", s.sensed_pad);
  num("pixel_size", s.pixel_size);
  num("origin_x", s.origin_x);
  num("origin_y", s.origin_y);
  if (kv.has("crs")) s.crs = kv.get("crs");
  integer("warp_order", s.warp_order);
  if (kv.has("warp_dx")) s.warp_dx = parse_double_list(kv.get("warp_dx"));
  if (kv.has("warp_dy")) s.warp_dy = parse_double_list(kv.get("warp_dy"));
  num("dem_relief", s.dem_relief);
  s.validate();
  return s;
}

Point2 planted_displacement(const SynthSpec& spec, double col, double row) {
  const Warp w(spec);
  double fc, fr, j[4];
  w.forward(col, row, fc, fr, j);
  return {fc - col, fr - row};
}

SynthDataset generate(const SynthSpec& spec) {
  spec.validate();
  const Warp warp(spec);
  const int pad = spec.sensed_pad;
  const int sw = spec.size + 2 * pad;
  const double p = spec.pixel_size;

  constexpr int kProbe = 41;
  for (int a = 0; a < kProbe; ++a) {
    for (int b = 0; b < kProbe; ++b) {
      const double c = -pad + (sw - 1.0) * a / (kProbe - 1);
      const double r = -pad + (sw - 1.0) * b / (kProbe - 1);
      double fc, fr, j[4];
      warp.forward(c, r, fc, fr, j);
      if (!(j[0] * j[3] - j[1] * j[2] > 0.0)) {
        throw Error(Errc::non_invertible_warp, "planted warp folds over the scene footprint");
      }
    }
  }

  SynthDataset out;
  out.reference = render_texture(spec.texture, spec.seed, spec.size, spec.size);
  out.reference.geotransform = {spec.origin_x, p, 0.0, spec.origin_y, 0.0, -p};
  out.reference.crs = spec.crs;

  out.sensed = RasterGrid(sw, sw);
  out.sensed.geotransform = {spec.origin_x - pad * p, p, 0.0, spec.origin_y + pad * p, 0.0, -p};
  out.sensed.crs = spec.crs;
  std::atomic<bool> folded{false};
  parallel_for(static_cast<std::size_t>(sw), 0, [&](std::size_t rs) {
    std::mt19937_64 rng(splitmix64(spec.seed ^ splitmix64(0x5EC0000000ull + rs)));
    std::gamma_distribution<double> speckle(
        spec.speckle_var > 0.0 ? 1.0 / spec.speckle_var : 1.0,
        spec.speckle_var > 0.0 ? spec.speckle_var : 1.0);
    for (int cs = 0; cs < sw; ++cs) {
      double c, r;
      if (!warp.invert(cs - pad, static_cast<double>(rs) - pad, c, r)) {
        folded = true;
        return;
      }
      double v = radiometric(spec, texture_value(spec.texture, spec.seed, c, r));
      if (spec.speckle_var > 0.0) v *= speckle(rng);
      out.sensed.at(cs, static_cast<int>(rs)) = static_cast<float>(kIntensityScale * v);
    }
  });
  if (folded) throw Error(Errc::non_invertible_warp, "planted warp could not be inverted");

  out.dem = RasterGrid(sw, sw);
  out.dem.geotransform = out.sensed.geotransform;
  out.dem.crs = spec.crs;
  const std::uint64_t dem_seed = splitmix64(spec.seed ^ 0xDE77ull);
  for (int r = 0; r < sw; ++r)
    for (int c = 0; c < sw; ++c)
      out.dem.at(c, r) = static_cast<float>(
          spec.dem_relief * value_noise(dem_seed, (c - pad) / 400.0, (r - pad) / 400.0, 0));

  const std::size_t terms =
      static_cast<std::size_t>((spec.warp_order + 1) * (spec.warp_order + 2) / 2);
  const double half = warp.half;
  FittedModel& t = out.truth;
  t.spec = ModelSpec::polynomial(spec.warp_order);
  const AxisNorm nx{spec.origin_x + warp.center * p, half * p};
  const AxisNorm ny{spec.origin_y - warp.center * p, half * p};
  t.norm.in = {nx, ny, AxisNorm{}};
  t.norm.out = {nx, ny};
  t.coeffs_x.assign(terms, 0.0);
  t.coeffs_y.assign(terms, 0.0);
  for (std::size_t k = 0; k < terms; ++k) {
    if (!spec.warp_dx.empty()) t.coeffs_x[k] = spec.warp_dx[k] / half;
    if (!spec.warp_dy.empty()) t.coeffs_y[k] = -spec.warp_dy[k] / half;
  }
  t.coeffs_x[1] += 1.0;
  t.coeffs_y[2] += 1.0;
  return out;
}

void write_dataset(const SynthDataset& data, const SynthSpec& spec, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create directory " + dir + ": " + ec.message());
  const fs::path d(dir);
  save_raster(data.reference, (d / "reference.bin").string());
  save_raster(data.sensed, (d / "sensed.bin").string());
  save_raster(data.dem, (d / "dem.bin").string());
  data.truth.save((d / "truth.model").string());
  std::string manifest;
  const KeyValueFile kv = spec.to_manifest();
  for (const auto& [k, v] : kv.values()) manifest += k + " = " + v + "\n";
  write_text_file((d / "manifest.txt").string(), manifest);
}

}  // namespace sarreg
