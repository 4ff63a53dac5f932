#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sarreg/geomodels.hpp"
#include "sarreg/keypoints.hpp"
#include "sarreg/matcher.hpp"
#include "sarreg/metrics.hpp"
#include "sarreg/robustfit.hpp"
#include "sarreg/synthgen.hpp"
#include "sarreg/textio.hpp"

namespace sarreg {

/// Every tunable of the end-to-end flow. Keys of the flat config file:
///   n_blocks k_per_block fast_threshold border
///   template_size search_size cfog_m cfog_sigma normalize subpixel
///   ransac_model ransac_tol ransac_max_iters ransac_confidence
///   models cp_counts n_checkpoints top_k margin seed threads
///   pixel_size register_model
struct PipelineConfig {
  BlockGridParams blocks;
  MatchParams match;
  RansacParams ransac;
  std::vector<ModelSpec> models = all_models();
  std::vector<int> cp_counts = {25, 35, 45, 55, 65, 75, 85, 95};
  std::size_t n_checkpoints = 48;
  std::size_t top_k = 143;
  int margin = 100;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::optional<double> pixel_size;  ///< map units per pixel for reports
  ModelSpec register_model = ModelSpec::polynomial(3);

  /// Re-checks every module's constraints plus the cross-field ones.
  void validate() const;

  /// Unknown keys are rejected so typos surface.
  static PipelineConfig from_kv(const KeyValueFile& kv);
  KeyValueFile to_kv() const;
};

struct StageTime {
  std::string stage;
  double seconds = 0.0;
};

/// What a command produced. Timings are kept out of the written files so
/// that those stay byte-identical between runs.
struct CommandOutcome {
  std::vector<std::string> files;
  std::vector<StageTime> timings;
  std::vector<std::string> warnings;
};

struct MatchStage {
  std::size_t interest_points = 0;
  MatchReport report;
  RansacResult ransac;
  std::vector<Correspondence> selected;
  bool top_k_short = false;  ///< fewer inliers than top_k; all were kept
  std::vector<StageTime> timings;
};

/// crop -> detect -> match_all -> ransac_filter -> select_top_k. Sensed
/// pixel coordinates in the result refer to the uncropped sensed grid.
MatchStage run_match(const PipelineConfig& cfg, const RasterGrid& ref, const RasterGrid& sensed);

/// Line-oriented `record key=value ...` text.
std::string format_match_report(const MatchStage& stage, const PipelineConfig& cfg);

/// Correspondences as control points, with DEM heights attached when a DEM
/// is given.
std::vector<ControlPoint> control_points(const std::vector<Correspondence>& corrs,
                                         const RasterGrid* dem);

CommandOutcome cmd_synth(const SynthSpec& spec, const std::string& out_dir);
CommandOutcome cmd_match(const PipelineConfig& cfg, const std::string& ref_path,
                         const std::string& sensed_path, const std::string& out_dir);
CommandOutcome cmd_measure(const std::string& corr_path, double pixel_size,
                           const std::string& out_dir);
CommandOutcome cmd_fit(const PipelineConfig& cfg, const std::string& corr_path,
                       const ModelSpec& model, const std::string& dem_path,
                       const std::string& out_dir);
CommandOutcome cmd_sweep(const PipelineConfig& cfg, const std::string& corr_path,
                         const std::string& dem_path, const std::string& out_dir);
CommandOutcome cmd_register(const PipelineConfig& cfg, const std::string& ref_path,
                            const std::string& sensed_path, const std::string& corr_path,
                            const ModelSpec& model, const std::string& dem_path,
                            const std::string& out_dir);

}  // namespace sarreg
