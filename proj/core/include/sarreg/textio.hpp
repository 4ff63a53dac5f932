#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sarreg {

/// Shortest decimal text (fixed or scientific, whichever is shorter) that
/// parses back to the identical double.
std::string format_double(double v);
/// Same, but always scientific notation.
std::string format_double_sci(double v);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);
std::vector<double> parse_double_list(std::string_view s, char sep = ',');
std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// ignored; later keys override earlier ones.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view text, std::string_view origin = "<text>");
  static KeyValueFile load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace sarreg
