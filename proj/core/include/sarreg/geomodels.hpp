#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sarreg/geotransform.hpp"
#include "sarreg/raster.hpp"

namespace sarreg {

enum class ModelFamily { polynomial, projective, rfm };

/// Denominator structure of a rational model: none (1), one shared by both
/// output coordinates, or one per coordinate.
enum class DenomMode { unit, shared, distinct };

/// One of the 17 supported transformation models:
///   polynomial   order 1..5, (X, Y) -> (x, y)
///   projective   10/22/38 parameters: 2D rationals of order 1/2/3 with a
///                separate denominator per output coordinate
///   rfm          order 1..3 rational functions of (X, Y, Z), any DenomMode
struct ModelSpec {
  ModelFamily family = ModelFamily::polynomial;
  int order = 1;
  DenomMode denom = DenomMode::unit;

  static ModelSpec polynomial(int order);
  static ModelSpec projective(int parameters);
  static ModelSpec rfm(int order, DenomMode mode);
  /// Accepts the names produced by name(): poly1..poly5, proj10, proj22,
  /// proj38, rfm{1,2,3}{u,s,d}.
  static ModelSpec parse(std::string_view name);

  std::string name() const;
  std::string description() const;
  int input_dims() const noexcept { return family == ModelFamily::rfm ? 3 : 2; }
  int numerator_terms() const noexcept;
  /// Denominator terms excluding the constant, which is fixed at 1.
  int denominator_terms() const noexcept;
  int parameter_count() const noexcept;
  void validate() const;

  bool operator==(const ModelSpec&) const = default;
};

/// All 17 models in a fixed order: poly1..5, proj10/22/38, rfm 1..3 x (u, s, d).
std::vector<ModelSpec> all_models();

/// Minimum number of control points: ceil(parameter_count / 2).
int min_cp_count(const ModelSpec& spec);

/// Monomials X^i Y^j with i + j <= order, by total degree then descending i.
std::vector<double> poly_basis(double X, double Y, int order);
/// Monomials X^i Y^j Z^k with i + j + k <= order, by total degree then
/// descending i, then descending j.
std::vector<double> poly_basis_3d(double X, double Y, double Z, int order);

struct ControlPoint {
  double ref_x = 0.0;  ///< reference map X
  double ref_y = 0.0;  ///< reference map Y
  std::optional<double> ref_z;  ///< terrain height, used by rfm models
  double sensed_x = 0.0;
  double sensed_y = 0.0;
};

/// v_normalised = (v - offset) / scale
struct AxisNorm {
  double offset = 0.0;
  double scale = 1.0;

  double forward(double v) const noexcept { return (v - offset) / scale; }
  double inverse(double n) const noexcept { return offset + scale * n; }
  bool operator==(const AxisNorm&) const = default;
};

struct Normalization {
  std::array<AxisNorm, 3> in;   ///< X, Y, Z
  std::array<AxisNorm, 2> out;  ///< x, y
  bool operator==(const Normalization&) const = default;
};

/// Reference-to-sensed transformation with coefficients in normalised
/// coordinates. Each coefficient vector holds the numerator terms followed by
/// the non-constant denominator terms (absent for unit denominators; equal in
/// both vectors for shared denominators).
struct FittedModel {
  ModelSpec spec;
  Normalization norm;
  std::vector<double> coeffs_x;
  std::vector<double> coeffs_y;

  /// Sensed map coordinates, or nullopt when a denominator magnitude falls
  /// below 1e-12. `z` must be given exactly when the family is rfm.
  std::optional<Point2> apply(double x, double y, std::optional<double> z = std::nullopt) const;

  /// Text form: spec, normalisation and coefficient lines, full precision.
  std::string serialize() const;
  static FittedModel parse(std::string_view text);
  static FittedModel load(const std::string& path);
  void save(const std::string& path) const;

  void validate() const;
};

inline std::optional<Point2> apply(const FittedModel& model, double x, double y,
                                   std::optional<double> z = std::nullopt) {
  return model.apply(x, y, z);
}

struct FitOptions {
  /// Map inputs and outputs onto [-1, 1] per axis before solving.
  bool normalize = true;
  int max_refinement_iterations = 10;
  double min_improvement = 1e-10;
  /// Singular values below this fraction of the largest mean rank deficiency.
  double rank_tolerance = 1e-10;
};

struct FitResult {
  FittedModel model;
  std::vector<double> residuals;             ///< per CP, map units
  std::vector<double> residuals_normalized;  ///< per CP, normalised output units
  double rmse = 0.0;                         ///< map units
  int refinement_iterations = 0;
  /// Set when a denominator changes sign or nearly vanishes inside the CP
  /// bounding box. The model is still returned.
  bool ill_conditioned = false;
};

/// Least squares over control points. Polynomials are linear; rational
/// models start from the linearised system (numerator - obs * denominator =
/// obs) and are refined by Gauss-Newton on the true residual.
/// Throws Error(insufficient_points) below min_cp_count and
/// Error(degenerate_configuration) on rank deficiency.
FitResult fit(const ModelSpec& spec, const std::vector<ControlPoint>& cps,
              const FitOptions& options = {});

/// Sets ref_z from a bilinear DEM sample at each CP's reference position.
/// Throws Error(dem_coverage) naming the first CP outside the DEM or on nodata.
std::vector<ControlPoint> attach_dem_heights(std::vector<ControlPoint> cps, const RasterGrid& dem);

/// Bilinear DEM height at a map position, or nullopt outside/on nodata.
std::optional<double> dem_height(const RasterGrid& dem, double x, double y);

}  // namespace sarreg
