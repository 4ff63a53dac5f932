#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sarreg/matcher.hpp"

namespace sarreg {

enum class RansacModel { affine, projective };

/// Planar map from reference pixels to sensed pixels. Affine models keep
/// h[6] = h[7] = 0; h[8] is always 1.
struct PlanarTransform {
  RansacModel kind = RansacModel::affine;
  std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};

  Point2 apply(double col, double row) const noexcept;
};

/// Euclidean distance, in sensed pixels, between the observed sensed
/// location and the transform's prediction.
double reprojection_error(const PlanarTransform& t, const Correspondence& c) noexcept;

/// Least-squares fit over all given correspondences (algebraic for the
/// projective model). Throws Error(degenerate_configuration) if rank deficient.
PlanarTransform fit_planar(RansacModel kind, const std::vector<Correspondence>& corrs);

struct RansacParams {
  RansacModel model = RansacModel::affine;
  double inlier_tol = 3.0;  ///< px
  int max_iters = 5000;
  double confidence = 0.999;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RansacResult {
  std::vector<std::size_t> inliers;   ///< ascending input indices
  std::vector<std::size_t> outliers;  ///< ascending input indices
  PlanarTransform model;              ///< final least-squares refit
  int iterations = 0;
};

/// Hypothesise-and-verify over minimal samples (3 affine, 4 projective).
/// Each iteration draws from its own RNG stream derived from the seed, so
/// results are reproducible. The best consensus set is refit by least
/// squares and re-classified until stable.
RansacResult ransac_filter(const std::vector<Correspondence>& corrs, const RansacParams& params);

/// Subset of `corrs` by index, preserving order.
std::vector<Correspondence> select(const std::vector<Correspondence>& corrs,
                                   const std::vector<std::size_t>& indices);

/// The k correspondences with the smallest residual against a global
/// least-squares affine fit, in ascending residual order (stable).
std::vector<Correspondence> select_top_k(const std::vector<Correspondence>& corrs, std::size_t k);

}  // namespace sarreg
