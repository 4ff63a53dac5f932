#include "sarreg/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "sarreg/error.hpp"
#include "sarreg/textio.hpp"

namespace sarreg {

RasterGrid::RasterGrid(int width, int height, float fill)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(Errc::invalid_argument, "raster dimensions must be at least 1x1");
  }
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

RasterGrid::RasterGrid(int width, int height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw Error(Errc::invalid_argument, "raster dimensions must be at least 1x1");
  }
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(Errc::size_mismatch, "sample count does not match width x height");
  }
}

bool RasterGrid::is_nodata(double v) const noexcept {
  if (!nodata) return std::isnan(v);
  if (std::isnan(*nodata)) return std::isnan(v);
  return v == static_cast<double>(*nodata);
}

double RasterGrid::nodata_value() const noexcept {
  return nodata ? static_cast<double>(*nodata) : std::numeric_limits<double>::quiet_NaN();
}

bool RasterGrid::contains(const Window& win) const noexcept {
  return win.w >= 1 && win.h >= 1 && win.col0 >= 0 && win.row0 >= 0 &&
         win.col0 + win.w <= width_ && win.row0 + win.h <= height_;
}

GeoBounds pixel_bounds(const RasterGrid& grid) {
  const double c1 = grid.width() - 1.0;
  const double r1 = grid.height() - 1.0;
  const Point2 corners[4] = {pixel_to_geo(grid.geotransform, 0, 0),
                             pixel_to_geo(grid.geotransform, c1, 0),
                             pixel_to_geo(grid.geotransform, 0, r1),
                             pixel_to_geo(grid.geotransform, c1, r1)};
  GeoBounds b{corners[0].x, corners[0].y, corners[0].x, corners[0].y};
  for (const auto& p : corners) {
    b.min_x = std::min(b.min_x, p.x);
    b.max_x = std::max(b.max_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

namespace {

enum class Format { raw_float32, pgm16 };

struct Paths {
  std::string base;
  std::string ext;
};

Paths split_path(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
    std::string ext = path.substr(dot);
    if (ext == ".bin" || ext == ".pgm" || ext == ".hdr") return {path.substr(0, dot), ext};
  }
  return {path, ""};
}

struct Header {
  int width = 0;
  int height = 0;
  Format format = Format::raw_float32;
  GeoTransform gt;
  std::string crs;
  std::optional<float> nodata;
};

Header read_header(const std::string& hdr_path) {
  const auto kv = KeyValueFile::load(hdr_path);
  Header h;
  try {
    const auto w = parse_int(kv.get("width"));
    const auto ht = parse_int(kv.get("height"));
    if (w < 1 || ht < 1 || w > std::numeric_limits<int>::max() ||
        ht > std::numeric_limits<int>::max()) {
      throw Error(Errc::malformed_header, "bad raster dimensions");
    }
    h.width = static_cast<int>(w);
    h.height = static_cast<int>(ht);
    const auto& dtype = kv.get("dtype");
    if (dtype == "float32") {
      h.format = Format::raw_float32;
    } else if (dtype == "uint16") {
      h.format = Format::pgm16;
    } else {
      throw Error(Errc::unsupported_type, hdr_path + ": unsupported dtype '" + dtype + "'");
    }
    const auto gt = parse_double_list(kv.get("gt"));
    if (gt.size() != 6) throw Error(Errc::malformed_header, "gt needs six terms");
    h.gt = GeoTransform{gt[0], gt[1], gt[2], gt[3], gt[4], gt[5]};
    h.crs = kv.get_or("crs", "");
    if (kv.has("nodata")) h.nodata = static_cast<float>(parse_double(kv.get("nodata")));
  } catch (const Error& e) {
    if (e.code() == Errc::unsupported_type) throw;
    throw Error(Errc::malformed_header, hdr_path + ": " + e.what());
  }
  return h;
}

void write_header(const std::string& hdr_path, const RasterGrid& grid, Format format) {
  const auto& g = grid.geotransform;
  std::ostringstream out;
  out << "width=" << grid.width() << "\n"
      << "height=" << grid.height() << "\n"
      << "dtype=" << (format == Format::raw_float32 ? "float32" : "uint16") << "\n"
      << "gt=" << format_double(g.origin_x) << "," << format_double(g.pixel_w) << ","
      << format_double(g.row_rot) << "," << format_double(g.origin_y) << ","
      << format_double(g.col_rot) << "," << format_double(g.pixel_h) << "\n"
      << "crs=" << grid.crs << "\n";
  // float -> double is exact, so the shortest double text reloads bit-exactly.
  if (grid.nodata) out << "nodata=" << format_double(static_cast<double>(*grid.nodata)) << "\n";
  write_text_file(hdr_path, out.str());
}

std::vector<char> read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<char> buf(size);
  in.seekg(0);
  in.read(buf.data(), static_cast<std::streamsize>(size));
  if (!in) throw Error(Errc::io, "read failed: " + path);
  return buf;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

std::vector<float> decode_float32(const std::vector<char>& bytes, std::size_t count,
                                  const std::string& path) {
  if (bytes.size() != count * 4) {
    throw Error(Errc::size_mismatch, path + ": payload has " + std::to_string(bytes.size()) +
                                         " bytes, header implies " + std::to_string(count * 4));
  }
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u;
    std::memcpy(&u, bytes.data() + i * 4, 4);
    out[i] = std::bit_cast<float>(to_little_endian(u));
  }
  return out;
}

// Parses the P5 preamble; returns the payload offset.
std::size_t parse_pgm_preamble(const std::vector<char>& bytes, int& w, int& h, int& maxval,
                               const std::string& path) {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_ws();
    long v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      ++pos;
      if (++digits > 9) break;
    }
    if (digits == 0) throw Error(Errc::malformed_header, path + ": bad PGM preamble");
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw Error(Errc::malformed_header, path + ": not a binary PGM (P5)");
  }
  pos = 2;
  w = read_int();
  h = read_int();
  maxval = read_int();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw Error(Errc::malformed_header, path + ": bad PGM preamble");
  }
  return pos + 1;
}

}  // namespace

RasterGrid load_raster(const std::string& path) {
  const auto [base, ext] = split_path(path);
  const Header hdr = read_header(base + ".hdr");
  const std::size_t count = static_cast<std::size_t>(hdr.width) * hdr.height;
  std::vector<float> samples;
  if (hdr.format == Format::raw_float32) {
    const std::string bin = base + ".bin";
    samples = decode_float32(read_binary(bin), count, bin);
  } else {
    const std::string pgm = base + ".pgm";
    const auto bytes = read_binary(pgm);
    int w = 0, h = 0, maxval = 0;
    const std::size_t offset = parse_pgm_preamble(bytes, w, h, maxval, pgm);
    if (maxval != 65535) {
      throw Error(Errc::unsupported_type, pgm + ": only 16-bit PGM (maxval 65535) is supported");
    }
    if (w != hdr.width || h != hdr.height) {
      throw Error(Errc::size_mismatch, pgm + ": PGM size disagrees with header");
    }
    if (bytes.size() - offset != count * 2) {
      throw Error(Errc::size_mismatch, pgm + ": payload size disagrees with header");
    }
    samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto hi = static_cast<unsigned char>(bytes[offset + 2 * i]);
      const auto lo = static_cast<unsigned char>(bytes[offset + 2 * i + 1]);
      samples[i] = static_cast<float>((hi << 8) | lo);
    }
  }
  RasterGrid grid(hdr.width, hdr.height, std::move(samples));
  grid.geotransform = hdr.gt;
  grid.crs = hdr.crs;
  grid.nodata = hdr.nodata;
  return grid;
}

void save_raster(const RasterGrid& grid, const std::string& path) {
  const auto [base, ext] = split_path(path);
  const Format format = ext == ".pgm" ? Format::pgm16 : Format::raw_float32;
  const auto samples = grid.data();
  std::vector<char> bytes;
  std::string payload_path;
  if (format == Format::raw_float32) {
    payload_path = base + ".bin";
    bytes.resize(samples.size() * 4);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const std::uint32_t u = to_little_endian(std::bit_cast<std::uint32_t>(samples[i]));
      std::memcpy(bytes.data() + i * 4, &u, 4);
    }
  } else {
    payload_path = base + ".pgm";
    const std::string pre =
        "P5\n" + std::to_string(grid.width()) + " " + std::to_string(grid.height()) + "\n65535\n";
    bytes.assign(pre.begin(), pre.end());
    bytes.reserve(pre.size() + samples.size() * 2);
    for (const float v : samples) {
      const double c = std::isnan(v) ? 0.0 : std::clamp(std::round(double(v)), 0.0, 65535.0);
      const auto u = static_cast<std::uint16_t>(c);
      bytes.push_back(static_cast<char>(u >> 8));
      bytes.push_back(static_cast<char>(u & 0xFF));
    }
  }
  std::ofstream out(payload_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + payload_path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "write failed: " + payload_path);
  write_header(base + ".hdr", grid, format);
}

RasterGrid extract(const RasterGrid& grid, const Window& win) {
  if (!grid.contains(win)) throw Error(Errc::invalid_argument, "window outside raster");
  RasterGrid out(static_cast<int>(win.w), static_cast<int>(win.h));
  for (long r = 0; r < win.h; ++r) {
    const auto src = grid.row(static_cast<int>(win.row0 + r)).subspan(win.col0, win.w);
    std::copy(src.begin(), src.end(), out.data().begin() + r * win.w);
  }
  out.geotransform = shifted(grid.geotransform, static_cast<double>(win.col0),
                             static_cast<double>(win.row0));
  out.crs = grid.crs;
  out.nodata = grid.nodata;
  return out;
}

RasterGrid crop_to_overlap(const RasterGrid& sensed, const RasterGrid& reference, int margin) {
  if (sensed.crs != reference.crs) {
    throw Error(Errc::crs_mismatch,
                "CRS mismatch: sensed '" + sensed.crs + "' vs reference '" + reference.crs + "'");
  }
  if (margin < 0) throw Error(Errc::invalid_argument, "margin must be non-negative");
  const GeoBounds b = pixel_bounds(reference);
  const Point2 corners[4] = {geo_to_pixel(sensed.geotransform, b.min_x, b.min_y),
                             geo_to_pixel(sensed.geotransform, b.max_x, b.min_y),
                             geo_to_pixel(sensed.geotransform, b.min_x, b.max_y),
                             geo_to_pixel(sensed.geotransform, b.max_x, b.max_y)};
  double cmin = corners[0].x, cmax = corners[0].x, rmin = corners[0].y, rmax = corners[0].y;
  for (const auto& p : corners) {
    cmin = std::min(cmin, p.x);
    cmax = std::max(cmax, p.x);
    rmin = std::min(rmin, p.y);
    rmax = std::max(rmax, p.y);
  }
  constexpr double kSnap = 1e-9;
  const double last_col = sensed.width() - 1.0;
  const double last_row = sensed.height() - 1.0;
  if (cmax < -kSnap || rmax < -kSnap || cmin > last_col + kSnap || rmin > last_row + kSnap) {
    throw Error(Errc::empty_overlap, "sensed and reference extents do not overlap");
  }
  const long c0 = std::max(0L, static_cast<long>(std::floor(cmin + kSnap)) - margin);
  const long r0 = std::max(0L, static_cast<long>(std::floor(rmin + kSnap)) - margin);
  const long c1 = std::min(static_cast<long>(last_col),
                           static_cast<long>(std::ceil(cmax - kSnap)) + margin);
  const long r1 = std::min(static_cast<long>(last_row),
                           static_cast<long>(std::ceil(rmax - kSnap)) + margin);
  return extract(sensed, Window{c0, r0, c1 - c0 + 1, r1 - r0 + 1});
}

double sample_bilinear(const RasterGrid& grid, double col, double row) noexcept {
  if (!std::isfinite(col) || !std::isfinite(row)) return grid.nodata_value();
  const double fc = std::floor(col);
  const double fr = std::floor(row);
  const double ax = col - fc;
  const double ay = row - fr;
  if (fc < 0 || fr < 0 || fc > grid.width() - 1 || fr > grid.height() - 1) {
    return grid.nodata_value();
  }
  const int c0 = static_cast<int>(fc);
  const int r0 = static_cast<int>(fr);
  const int c1 = ax > 0.0 ? c0 + 1 : c0;
  const int r1 = ay > 0.0 ? r0 + 1 : r0;
  if (c1 >= grid.width() || r1 >= grid.height()) return grid.nodata_value();
  const double v00 = grid.at(c0, r0);
  const double v10 = grid.at(c1, r0);
  const double v01 = grid.at(c0, r1);
  const double v11 = grid.at(c1, r1);
  if (grid.is_nodata(v00) || grid.is_nodata(v10) || grid.is_nodata(v01) || grid.is_nodata(v11)) {
    return grid.nodata_value();
  }
  if (ax == 0.0 && ay == 0.0) return v00;
  const double top = v00 + ax * (v10 - v00);
  const double bottom = v01 + ax * (v11 - v01);
  return top + ay * (bottom - top);
}

}  // namespace sarreg
