#include "sarreg/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "fft3d.hpp"
#include "sarreg/error.hpp"
#include "sarreg/parallel.hpp"
#include "sarreg/textio.hpp"

namespace sarreg {

void MatchParams::validate() const {
  if (template_size < 4 || template_size % 2 != 0) {
    throw Error(Errc::invalid_argument, "template_size must be even and >= 4");
  }
  if (search_size % 2 != 0 || search_size <= template_size) {
    throw Error(Errc::invalid_argument, "search_size must be even and > template_size");
  }
  cfog.validate();
}

PixelPos predict_search_center(const InterestPoint& pt, const RasterGrid& ref,
                               const RasterGrid& sensed) {
  if (ref.crs != sensed.crs) {
    throw Error(Errc::crs_mismatch, "CRS mismatch: '" + ref.crs + "' vs '" + sensed.crs + "'");
  }
  const Point2 g = pixel_to_geo(ref.geotransform, pt.col, pt.row);
  const Point2 p = geo_to_pixel(sensed.geotransform, g.x, g.y);
  return {std::lround(p.x), std::lround(p.y)};
}

bool window_fits(const PixelPos& center, const RasterGrid& grid, int size) noexcept {
  return grid.contains(Window{center.col - size / 2, center.row - size / 2, size, size});
}

std::string_view skip_reason_name(SkipReason r) noexcept {
  switch (r) {
    case SkipReason::template_off_image: return "template_off_image";
    case SkipReason::search_off_image: return "search_off_image";
    case SkipReason::nodata_in_window: return "nodata_in_window";
    case SkipReason::flat_descriptor: return "flat_descriptor";
    case SkipReason::off_axis_peak: return "off_axis_peak";
    case SkipReason::offset_out_of_range: return "offset_out_of_range";
  }
  return "unknown";
}

std::optional<PhaseCorrelation> phase_correlate_3d(const DescriptorVolume& t_vol,
                                                   const DescriptorVolume& s_vol) {
  if (t_vol.m != s_vol.m) throw Error(Errc::size_mismatch, "descriptor channel counts differ");
  if (t_vol.width > s_vol.width || t_vol.height > s_vol.height) {
    throw Error(Errc::size_mismatch, "template volume larger than search volume");
  }
  if (t_vol.all_zero() || s_vol.all_zero()) return std::nullopt;

  const int W = s_vol.width;
  const int H = s_vol.height;
  const int m = s_vol.m;
  auto& fft = detail::Fft3d::for_shape(H, W, m);
  double* t_buf = fft.real_a();
  double* s_buf = fft.real_b();
  std::fill(t_buf, t_buf + fft.real_size(), 0.0);
  const std::size_t t_row = static_cast<std::size_t>(t_vol.width) * m;
  for (int r = 0; r < t_vol.height; ++r) {
    std::copy_n(t_vol.values.data() + r * t_row, t_row,
                t_buf + static_cast<std::size_t>(r) * W * m);
  }
  std::copy(s_vol.values.begin(), s_vol.values.end(), s_buf);

  auto* T = fft.spec_a();
  auto* S = fft.spec_b();
  fft.forward(t_buf, T);
  fft.forward(s_buf, S);

  // Cross-power S T* has phase exp(-i(u x0 + v y0)); its inverse peaks at (x0, y0).
  const std::size_t nc = fft.complex_size();
  double max_norm = 0.0;
  for (std::size_t i = 0; i < nc; ++i) {
    const double re = S[i].real() * T[i].real() + S[i].imag() * T[i].imag();
    const double im = S[i].imag() * T[i].real() - S[i].real() * T[i].imag();
    T[i] = {re, im};
    max_norm = std::max(max_norm, std::norm(T[i]));
  }
  if (!(max_norm > 0.0)) return std::nullopt;
  const double eps = 1e-12 * std::sqrt(max_norm);
  for (std::size_t i = 0; i < nc; ++i) {
    const double mag = std::sqrt(std::norm(T[i]));
    T[i] = mag < eps ? std::complex<double>(0.0, 0.0) : T[i] * (1.0 / mag);
  }
  double* surf = fft.real_a();
  fft.inverse(T, surf);

  const std::size_t n = fft.real_size();
  const double scale = 1.0 / static_cast<double>(n);
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (surf[i] > surf[best]) best = i;
  }
  const int k = static_cast<int>(best % m);
  const int x = static_cast<int>((best / m) % W);
  const int y = static_cast<int>(best / (static_cast<std::size_t>(m) * W));

  auto at = [&](int cx, int cy, int ck) {
    cx = (cx % W + W) % W;
    cy = (cy % H + H) % H;
    return surf[(static_cast<std::size_t>(cy) * W + cx) * m + ck] * scale;
  };
  auto circ_dist = [](int a, int b, int size) {
    const int d = std::abs(a - b) % size;
    return std::min(d, size - d);
  };

  PhaseCorrelation pc;
  pc.peak_channel = k;
  pc.peak = surf[best] * scale;
  pc.x0 = x > W / 2 ? x - W : x;
  pc.y0 = y > H / 2 ? y - H : y;
  pc.left = at(x - 1, y, 0);
  pc.right = at(x + 1, y, 0);
  pc.up = at(x, y - 1, 0);
  pc.down = at(x, y + 1, 0);
  double second = -std::numeric_limits<double>::infinity();
  for (int yy = 0; yy < H; ++yy) {
    for (int xx = 0; xx < W; ++xx) {
      if (circ_dist(xx, x, W) <= 1 && circ_dist(yy, y, H) <= 1) continue;
      const double* v = surf + (static_cast<std::size_t>(yy) * W + xx) * m;
      for (int kk = 0; kk < m; ++kk) second = std::max(second, v[kk]);
    }
  }
  pc.second_peak = std::isfinite(second) ? second * scale : 0.0;
  return pc;
}

DescriptorVolume describe(const Plane& window, const MatchParams& params) {
  if (params.descriptor == DescriptorMode::raw_intensity) {
    DescriptorVolume vol(window.width, window.height, 1);
    vol.values = window.data;
    return vol;
  }
  return build_cfog(window, params.cfog, params.normalize);
}

namespace {

bool has_nodata(const RasterGrid& grid, const Window& win) {
  for (long r = 0; r < win.h; ++r) {
    for (const float v : grid.row(static_cast<int>(win.row0 + r)).subspan(win.col0, win.w)) {
      if (grid.is_nodata(v)) return true;
    }
  }
  return false;
}

// Vertex offset of the parabola through (-1, l), (0, c), (1, r).
double parabola_vertex(double l, double c, double r) {
  const double denom = l - 2.0 * c + r;
  if (!(denom < 0.0)) return 0.0;
  return std::clamp(0.5 * (l - r) / denom, -0.5, 0.5);
}

MatchResult skip(SkipReason r) { return MatchResult{std::nullopt, r}; }

}  // namespace

MatchResult match_point(const InterestPoint& pt, const RasterGrid& ref, const RasterGrid& sensed,
                        const MatchParams& params) {
  const int T = params.template_size;
  const int S = params.search_size;
  const Window twin{pt.col - T / 2, pt.row - T / 2, T, T};
  if (!ref.contains(twin)) return skip(SkipReason::template_off_image);
  const PixelPos center = predict_search_center(pt, ref, sensed);
  const Window swin{center.col - S / 2, center.row - S / 2, S, S};
  if (!sensed.contains(swin)) return skip(SkipReason::search_off_image);
  if (has_nodata(ref, twin) || has_nodata(sensed, swin)) return skip(SkipReason::nodata_in_window);

  const auto t_vol = describe(to_plane(ref, twin), params);
  const auto s_vol = describe(to_plane(sensed, swin), params);
  const auto pc = phase_correlate_3d(t_vol, s_vol);
  if (!pc) return skip(SkipReason::flat_descriptor);
  if (pc->peak_channel != 0) return skip(SkipReason::off_axis_peak);
  if (pc->x0 < 0 || pc->y0 < 0 || pc->x0 > S - T || pc->y0 > S - T) {
    return skip(SkipReason::offset_out_of_range);
  }

  double dx = pc->x0 - params.max_offset();
  double dy = pc->y0 - params.max_offset();
  if (params.subpixel) {
    dx += parabola_vertex(pc->left, pc->peak, pc->right);
    dy += parabola_vertex(pc->up, pc->peak, pc->down);
  }
  Correspondence c;
  c.ref_col = pt.col;
  c.ref_row = pt.row;
  c.sensed_col = static_cast<double>(center.col) + dx;
  c.sensed_row = static_cast<double>(center.row) + dy;
  c.ref_geo = pixel_to_geo(ref.geotransform, c.ref_col, c.ref_row);
  c.sensed_geo = pixel_to_geo(sensed.geotransform, c.sensed_col, c.sensed_row);
  c.peak = pc->peak;
  return MatchResult{c, SkipReason::flat_descriptor};
}

MatchReport match_all(const std::vector<InterestPoint>& points, const RasterGrid& ref,
                      const RasterGrid& sensed, const MatchParams& params, unsigned threads) {
  params.validate();
  if (ref.crs != sensed.crs) {
    throw Error(Errc::crs_mismatch, "CRS mismatch: '" + ref.crs + "' vs '" + sensed.crs + "'");
  }
  std::vector<MatchResult> results(points.size());
  parallel_for(points.size(), threads,
               [&](std::size_t i) { results[i] = match_point(points[i], ref, sensed, params); });
  MatchReport report;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].match) {
      report.matches.push_back(*results[i].match);
      report.point_index.push_back(i);
    } else {
      report.skipped.emplace_back(i, results[i].reason);
    }
  }
  return report;
}

void write_correspondences_csv(std::ostream& out, const std::vector<Correspondence>& corrs,
                               const std::vector<bool>* inlier) {
  if (inlier && inlier->size() != corrs.size()) {
    throw Error(Errc::size_mismatch, "inlier flags do not match correspondence count");
  }
  out << "ref_col,ref_row,sensed_col,sensed_row,ref_x,ref_y,sensed_x,sensed_y,peak";
  if (inlier) out << ",inlier";
  out << "\n";
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const auto& c = corrs[i];
    out << format_double(c.ref_col) << ',' << format_double(c.ref_row) << ','
        << format_double(c.sensed_col) << ',' << format_double(c.sensed_row) << ','
        << format_double(c.ref_geo.x) << ',' << format_double(c.ref_geo.y) << ','
        << format_double(c.sensed_geo.x) << ',' << format_double(c.sensed_geo.y) << ','
        << format_double(c.peak);
    if (inlier) out << ',' << ((*inlier)[i] ? 1 : 0);
    out << "\n";
  }
}

void save_correspondences_csv(const std::string& path, const std::vector<Correspondence>& corrs,
                              const std::vector<bool>* inlier) {
  std::ostringstream ss;
  write_correspondences_csv(ss, corrs, inlier);
  write_text_file(path, ss.str());
}

std::vector<Correspondence> parse_correspondences_csv(std::string_view text,
                                                      std::string_view origin) {
  std::vector<Correspondence> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (t.rfind("ref_col", 0) == 0) continue;
    }
    const auto f = split(t, ',');
    if (f.size() < 9) {
      throw Error(Errc::malformed_header, std::string(origin) + ":" + std::to_string(line_no) +
                                              ": expected at least 9 fields");
    }
    try {
      Correspondence c;
      c.ref_col = parse_double(f[0]);
      c.ref_row = parse_double(f[1]);
      c.sensed_col = parse_double(f[2]);
      c.sensed_row = parse_double(f[3]);
      c.ref_geo = {parse_double(f[4]), parse_double(f[5])};
      c.sensed_geo = {parse_double(f[6]), parse_double(f[7])};
      c.peak = parse_double(f[8]);
      out.push_back(c);
    } catch (const Error& e) {
      throw Error(Errc::malformed_header,
                  std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Correspondence> load_correspondences_csv(const std::string& path) {
  return parse_correspondences_csv(read_text_file(path), path);
}

}  // namespace sarreg
