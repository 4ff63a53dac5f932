#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sarreg/geomodels.hpp"
#include "sarreg/matcher.hpp"

namespace sarreg {

/// Per-correspondence map-coordinate shifts (sensed - reference) in pixels
/// and their summary. Means of dx and dy are over absolute values.
struct MisregReport {
  std::vector<double> dx, dy, ds;
  double mean_abs_dx = 0.0;
  double mean_abs_dy = 0.0;
  double mean_ds = 0.0;
  double max_ds = 0.0;
  double min_ds = 0.0;
  double std_ds = 0.0;  ///< population standard deviation
  std::size_t count = 0;
};

MisregReport misregistration(const std::vector<Correspondence>& corrs, double pixel_size);

/// `index,dx_px,dy_px,ds_px` rows followed by `# key=value` summary lines.
void write_misreg_csv(std::ostream& out, const MisregReport& report);

struct CheckpointStats {
  double rmse = 0.0;           ///< sqrt(mean squared residual), px
  double max_residual = 0.0;   ///< px
  double mean_distance = 0.0;  ///< mean residual, px
  std::vector<double> residuals;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;  ///< checkpoints where the model could not be evaluated
};

/// Residual_i is the Euclidean distance between the observed sensed position
/// and the model prediction, converted to pixels. Checkpoints the model
/// cannot evaluate are excluded and counted; if none remain the statistics
/// are NaN.
CheckpointStats checkpoint_rmse(const FittedModel& model,
                                const std::vector<ControlPoint>& checkpoints, double pixel_size);

std::vector<ControlPoint> to_control_points(const std::vector<Correspondence>& corrs);

struct CheckpointSplit {
  std::vector<std::size_t> checkpoints;  ///< spatially stratified
  std::vector<std::size_t> pool;         ///< the rest, seeded shuffle
};

/// Draws checkpoints one per cell, round robin, from a ceil(sqrt(n)) square
/// grid over the reference extent; the remaining points are shuffled.
CheckpointSplit split_checkpoints(const std::vector<ControlPoint>& points,
                                  std::size_t n_checkpoints, std::uint64_t seed);

struct SweepResult {
  ModelSpec spec;
  std::vector<int> cp_counts;
  std::vector<std::optional<double>> rmse_per_count;
  std::vector<std::optional<double>> max_residual_per_count;
  std::vector<std::optional<double>> mean_distance_per_count;
  std::vector<std::string> status_per_count;  ///< "ok", "ill_conditioned" or an error code
  std::size_t n_checkpoints = 0;
};

/// Fits every model on the first cp_count pooled points for each count and
/// scores it on the shared checkpoints. Cells that cannot be fitted
/// (including cp_count below the model's minimum) are left empty.
std::vector<SweepResult> sweep(const std::vector<ModelSpec>& models,
                               const std::vector<ControlPoint>& points, std::size_t n_checkpoints,
                               const std::vector<int>& cp_counts, std::uint64_t seed,
                               double pixel_size, unsigned threads = 0);

/// `model,cp_count,rmse_px,max_residual_px,mean_distance_px,status`
void write_sweep_csv(std::ostream& out, const std::vector<SweepResult>& results);

}  // namespace sarreg
