#include "sarreg/textio.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

#include "sarreg/error.hpp"

namespace sarreg {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::io: return "io";
    case Errc::malformed_header: return "malformed_header";
    case Errc::size_mismatch: return "size_mismatch";
    case Errc::unsupported_type: return "unsupported_type";
    case Errc::singular_transform: return "singular_transform";
    case Errc::crs_mismatch: return "crs_mismatch";
    case Errc::empty_overlap: return "empty_overlap";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::image_too_small: return "image_too_small";
    case Errc::insufficient_points: return "insufficient_points";
    case Errc::degenerate_configuration: return "degenerate_configuration";
    case Errc::no_match: return "no_match";
    case Errc::dem_coverage: return "dem_coverage";
    case Errc::missing_dem: return "missing_dem";
    case Errc::non_invertible_warp: return "non_invertible_warp";
    case Errc::config: return "config";
  }
  return "unknown";
}

namespace {

std::string to_chars_string(double v, std::optional<std::chars_format> fmt) {
  std::array<char, 64> buf{};
  auto [end, ec] = fmt ? std::to_chars(buf.data(), buf.data() + buf.size(), v, *fmt)
                       : std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) {
    throw Error(Errc::invalid_argument, "cannot format number");
  }
  return std::string(buf.data(), end);
}

}  // namespace

std::string format_double(double v) { return to_chars_string(v, std::nullopt); }

std::string format_double_sci(double v) {
  return to_chars_string(v, std::chars_format::scientific);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(Errc::invalid_argument, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

long long parse_int(std::string_view s) {
  s = trim(s);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(Errc::invalid_argument, "not an integer: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<double> parse_double_list(std::string_view s, char sep) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, sep)) out.push_back(parse_double(part));
  return out;
}

KeyValueFile KeyValueFile::parse(std::string_view text, std::string_view origin) {
  KeyValueFile kv;
  kv.origin_ = std::string(origin);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto raw = text.substr(start, nl == std::string_view::npos ? nl : nl - start);
    ++line_no;
    const auto line = trim(raw);
    if (!line.empty() && line.front() != '#') {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw Error(Errc::malformed_header, std::string(origin) + ":" + std::to_string(line_no) +
                                                ": expected key=value");
      }
      const auto key = trim(line.substr(0, eq));
      if (key.empty()) {
        throw Error(Errc::malformed_header,
                    std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
      }
      kv.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  return parse(read_text_file(path), path);
}

const std::string& KeyValueFile::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw Error(Errc::malformed_header, origin_ + ": missing key '" + key + "'");
  }
  return it->second;
}

std::string KeyValueFile::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(Errc::io, "write failed: " + path);
}

}  // namespace sarreg
