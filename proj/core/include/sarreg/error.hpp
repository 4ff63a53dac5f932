#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sarreg {

enum class Errc {
  io,
  malformed_header,
  size_mismatch,
  unsupported_type,
  singular_transform,
  crs_mismatch,
  empty_overlap,
  invalid_argument,
  image_too_small,
  insufficient_points,
  degenerate_configuration,
  no_match,
  dem_coverage,
  missing_dem,
  non_invertible_warp,
  config,
};

std::string_view errc_name(Errc code) noexcept;

/// Base exception for every recoverable failure raised by the library. The
/// code is stable and is what the command-line tool reports.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace sarreg
