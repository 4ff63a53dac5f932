#include "sarreg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "sarreg/error.hpp"
#include "sarreg/warp.hpp"

namespace sarreg {

namespace {

namespace fs = std::filesystem;

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(Errc::config, key + ": expected a boolean, got '" + v + "'");
}

std::vector<ModelSpec> parse_models(const std::string& v) {
  if (trim(v) == "all") return all_models();
  std::vector<ModelSpec> out;
  for (const auto& name : split(v, ',')) {
    const auto t = trim(name);
    if (!t.empty()) out.push_back(ModelSpec::parse(t));
  }
  if (out.empty()) throw Error(Errc::config, "models: empty list");
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

std::string write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const std::string path = (dir / name).string();
  write_text_file(path, text);
  return path;
}

double require_pixel_size(const PipelineConfig& cfg) {
  if (!cfg.pixel_size) {
    throw Error(Errc::config, "pixel size unknown: pass it explicitly or give a reference raster");
  }
  return *cfg.pixel_size;
}

std::optional<RasterGrid> load_optional_dem(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_raster(path);
}

struct HeldOutFit {
  FitResult fit;
  CheckpointStats checkpoints;
  std::size_t n_cps = 0;
  std::size_t n_checkpoints = 0;
};

HeldOutFit fit_with_checkpoints(const PipelineConfig& cfg, const std::vector<ControlPoint>& points,
                                const ModelSpec& model, double pixel_size) {
  if (points.size() <= cfg.n_checkpoints) {
    throw Error(Errc::insufficient_points,
                std::to_string(points.size()) + " correspondences leave no CPs after " +
                    std::to_string(cfg.n_checkpoints) + " checkpoints");
  }
  const CheckpointSplit split = split_checkpoints(points, cfg.n_checkpoints, cfg.seed);
  std::vector<ControlPoint> cps, ckps;
  for (auto i : split.pool) cps.push_back(points[i]);
  for (auto i : split.checkpoints) ckps.push_back(points[i]);
  HeldOutFit out;
  out.fit = fit(model, cps);
  out.checkpoints = checkpoint_rmse(out.fit.model, ckps, pixel_size);
  out.n_cps = cps.size();
  out.n_checkpoints = ckps.size();
  return out;
}

std::string fit_fields(const HeldOutFit& f, double pixel_size) {
  std::ostringstream o;
  o << "model=" << f.fit.model.spec.name() << " cps=" << f.n_cps
    << " checkpoints=" << f.n_checkpoints
    << " cp_rmse_px=" << format_double(f.fit.rmse / pixel_size)
    << " checkpoint_rmse_px=" << format_double(f.checkpoints.rmse)
    << " checkpoint_max_px=" << format_double(f.checkpoints.max_residual)
    << " checkpoint_mean_distance_px=" << format_double(f.checkpoints.mean_distance)
    << " excluded=" << f.checkpoints.excluded
    << " refinement_iterations=" << f.fit.refinement_iterations
    << " ill_conditioned=" << (f.fit.ill_conditioned ? 1 : 0);
  return o.str();
}

void require_dem_for(const ModelSpec& m, const std::optional<RasterGrid>& dem) {
  if (m.family == ModelFamily::rfm && !dem) {
    throw Error(Errc::missing_dem, m.name() + " needs a DEM");
  }
}

}  // namespace

void PipelineConfig::validate() const {
  blocks.validate();
  match.validate();
  ransac.validate();
  if (models.empty()) throw Error(Errc::config, "models: empty list");
  for (const auto& m : models) m.validate();
  register_model.validate();
  if (cp_counts.empty()) throw Error(Errc::config, "cp_counts: empty list");
  for (std::size_t i = 0; i < cp_counts.size(); ++i) {
    if (cp_counts[i] < 1 || (i && cp_counts[i] <= cp_counts[i - 1])) {
      throw Error(Errc::config, "cp_counts must be positive and strictly increasing");
    }
  }
  if (n_checkpoints < 1) throw Error(Errc::config, "n_checkpoints must be >= 1");
  if (top_k < 3) throw Error(Errc::config, "top_k must be >= 3");
  if (margin < 0) throw Error(Errc::config, "margin must be >= 0");
  if (pixel_size && !(*pixel_size > 0.0)) throw Error(Errc::config, "pixel_size must be > 0");
  if (blocks.border < match.template_size / 2) {
    throw Error(Errc::config, "border must be at least half the template size");
  }
}

PipelineConfig PipelineConfig::from_kv(const KeyValueFile& kv) {
  PipelineConfig c;
  for (const auto& [key, v] : kv.values()) {
    if (key == "n_blocks") c.blocks.n_blocks = static_cast<int>(parse_int(v));
    else if (key == "k_per_block") c.blocks.k_per_block = static_cast<int>(parse_int(v));
    else if (key == "fast_threshold") c.blocks.fast_threshold = parse_double(v);
    else if (key == "border") c.blocks.border = static_cast<int>(parse_int(v));
    else if (key == "template_size") c.match.template_size = static_cast<int>(parse_int(v));
    else if (key == "search_size") c.match.search_size = static_cast<int>(parse_int(v));
    else if (key == "cfog_m") c.match.cfog.m = static_cast<int>(parse_int(v));
    else if (key == "cfog_sigma") c.match.cfog.sigma_spatial = parse_double(v);
    else if (key == "normalize") c.match.normalize = parse_bool(key, v);
    else if (key == "subpixel") c.match.subpixel = parse_bool(key, v);
    else if (key == "ransac_model") {
      if (v == "affine") c.ransac.model = RansacModel::affine;
      else if (v == "projective") c.ransac.model = RansacModel::projective;
      else throw Error(Errc::config, "ransac_model: expected affine or projective");
    }
    else if (key == "ransac_tol") c.ransac.inlier_tol = parse_double(v);
    else if (key == "ransac_max_iters") c.ransac.max_iters = static_cast<int>(parse_int(v));
    else if (key == "ransac_confidence") c.ransac.confidence = parse_double(v);
    else if (key == "models") c.models = parse_models(v);
    else if (key == "cp_counts") {
      c.cp_counts.clear();
      for (const auto& s : split(v, ','))
        if (!trim(s).empty()) c.cp_counts.push_back(static_cast<int>(parse_int(trim(s))));
    }
    else if (key == "n_checkpoints") c.n_checkpoints = static_cast<std::size_t>(parse_int(v));
    else if (key == "top_k") c.top_k = static_cast<std::size_t>(parse_int(v));
    else if (key == "margin") c.margin = static_cast<int>(parse_int(v));
    else if (key == "seed") c.seed = std::stoull(v);
    else if (key == "threads") c.threads = static_cast<unsigned>(parse_int(v));
    else if (key == "pixel_size") c.pixel_size = parse_double(v);
    else if (key == "register_model") c.register_model = ModelSpec::parse(v);
    else throw Error(Errc::config, "unknown config key '" + key + "'");
  }
  c.ransac.seed = c.seed;
  c.validate();
  return c;
}

KeyValueFile PipelineConfig::to_kv() const {
  KeyValueFile kv;
  kv.set("n_blocks", std::to_string(blocks.n_blocks));
  kv.set("k_per_block", std::to_string(blocks.k_per_block));
  if (blocks.fast_threshold) kv.set("fast_threshold", format_double(*blocks.fast_threshold));
  kv.set("border", std::to_string(blocks.border));
  kv.set("template_size", std::to_string(match.template_size));
  kv.set("search_size", std::to_string(match.search_size));
  kv.set("cfog_m", std::to_string(match.cfog.m));
  kv.set("cfog_sigma", format_double(match.cfog.sigma_spatial));
  kv.set("normalize", match.normalize ? "true" : "false");
  kv.set("subpixel", match.subpixel ? "true" : "false");
  kv.set("ransac_model", ransac.model == RansacModel::affine ? "affine" : "projective");
  kv.set("ransac_tol", format_double(ransac.inlier_tol));
  kv.set("ransac_max_iters", std::to_string(ransac.max_iters));
  kv.set("ransac_confidence", format_double(ransac.confidence));
  std::string names;
  for (std::size_t i = 0; i < models.size(); ++i) names += (i ? "," : "") + models[i].name();
  kv.set("models", names);
  kv.set("cp_counts", join_ints(cp_counts));
  kv.set("n_checkpoints", std::to_string(n_checkpoints));
  kv.set("top_k", std::to_string(top_k));
  kv.set("margin", std::to_string(margin));
  kv.set("seed", std::to_string(seed));
  kv.set("threads", std::to_string(threads));
  if (pixel_size) kv.set("pixel_size", format_double(*pixel_size));
  kv.set("register_model", register_model.name());
  return kv;
}

MatchStage run_match(const PipelineConfig& cfg, const RasterGrid& ref, const RasterGrid& sensed) {
  cfg.validate();
  MatchStage st;
  Stopwatch sw;
  const RasterGrid cropped = crop_to_overlap(sensed, ref, cfg.margin);
  const Point2 off = geo_to_pixel(sensed.geotransform, cropped.geotransform.origin_x,
                                  cropped.geotransform.origin_y);
  const double off_c = static_cast<double>(std::lround(off.x));
  const double off_r = static_cast<double>(std::lround(off.y));
  st.timings.push_back({"crop", sw.lap()});

  const auto points = detect_block_fast(ref, cfg.blocks, cfg.threads);
  st.interest_points = points.size();
  st.timings.push_back({"detect", sw.lap()});

  st.report = match_all(points, ref, cropped, cfg.match, cfg.threads);
  for (auto& m : st.report.matches) {
    m.sensed_col += off_c;
    m.sensed_row += off_r;
  }
  st.timings.push_back({"match", sw.lap()});

  RansacParams rp = cfg.ransac;
  rp.seed = cfg.seed;
  st.ransac = ransac_filter(st.report.matches, rp);
  const auto inliers = select(st.report.matches, st.ransac.inliers);
  st.top_k_short = inliers.size() < cfg.top_k;
  st.selected = select_top_k(inliers, std::min(cfg.top_k, inliers.size()));
  st.timings.push_back({"filter", sw.lap()});
  return st;
}

std::string format_match_report(const MatchStage& st, const PipelineConfig& cfg) {
  std::ostringstream o;
  o << "match interest_points=" << st.interest_points
    << " matched=" << st.report.matches.size() << " skipped=" << st.report.skipped.size()
    << " inliers=" << st.ransac.inliers.size() << " outliers=" << st.ransac.outliers.size()
    << " ransac_iterations=" << st.ransac.iterations << " selected=" << st.selected.size()
    << " top_k=" << cfg.top_k << " top_k_short=" << (st.top_k_short ? 1 : 0) << "\n";
  constexpr SkipReason kReasons[] = {
      SkipReason::template_off_image, SkipReason::search_off_image,
      SkipReason::nodata_in_window,   SkipReason::flat_descriptor,
      SkipReason::off_axis_peak,      SkipReason::offset_out_of_range,
  };
  for (auto r : kReasons) {
    std::size_t n = 0;
    for (const auto& s : st.report.skipped) n += s.second == r;
    if (n) o << "skip reason=" << skip_reason_name(r) << " count=" << n << "\n";
  }
  return o.str();
}

std::vector<ControlPoint> control_points(const std::vector<Correspondence>& corrs,
                                         const RasterGrid* dem) {
  auto cps = to_control_points(corrs);
  if (dem) cps = attach_dem_heights(std::move(cps), *dem);
  return cps;
}

CommandOutcome cmd_synth(const SynthSpec& spec, const std::string& out_dir) {
  CommandOutcome out;
  Stopwatch sw;
  const SynthDataset data = generate(spec);
  out.timings.push_back({"generate", sw.lap()});
  write_dataset(data, spec, out_dir);
  out.timings.push_back({"write", sw.lap()});
  const fs::path d(out_dir);
  for (const char* f : {"reference.bin", "sensed.bin", "dem.bin", "truth.model", "manifest.txt"})
    out.files.push_back((d / f).string());
  return out;
}

CommandOutcome cmd_match(const PipelineConfig& cfg, const std::string& ref_path,
                         const std::string& sensed_path, const std::string& out_dir) {
  CommandOutcome out;
  Stopwatch sw;
  const RasterGrid ref = load_raster(ref_path);
  const RasterGrid sensed = load_raster(sensed_path);
  out.timings.push_back({"load", sw.lap()});
  MatchStage st = run_match(cfg, ref, sensed);
  out.timings.insert(out.timings.end(), st.timings.begin(), st.timings.end());
  if (st.top_k_short) {
    out.warnings.push_back("only " + std::to_string(st.selected.size()) +
                           " inliers available for top_k=" + std::to_string(cfg.top_k));
  }
  const fs::path dir = prepare_dir(out_dir);
  std::ostringstream sel, all;
  write_correspondences_csv(sel, st.selected);
  std::vector<bool> flag(st.report.matches.size(), false);
  for (auto i : st.ransac.inliers) flag[i] = true;
  write_correspondences_csv(all, st.report.matches, &flag);
  out.files.push_back(write_file(dir, "correspondences.csv", sel.str()));
  out.files.push_back(write_file(dir, "matches.csv", all.str()));
  out.files.push_back(write_file(dir, "match_report.txt", format_match_report(st, cfg)));
  return out;
}

CommandOutcome cmd_measure(const std::string& corr_path, double pixel_size,
                           const std::string& out_dir) {
  CommandOutcome out;
  const auto corrs = load_correspondences_csv(corr_path);
  const MisregReport r = misregistration(corrs, pixel_size);
  const fs::path dir = prepare_dir(out_dir);
  std::ostringstream o;
  write_misreg_csv(o, r);
  out.files.push_back(write_file(dir, "misreg.csv", o.str()));
  return out;
}

CommandOutcome cmd_fit(const PipelineConfig& cfg, const std::string& corr_path,
                       const ModelSpec& model, const std::string& dem_path,
                       const std::string& out_dir) {
  CommandOutcome out;
  const double px = require_pixel_size(cfg);
  const auto dem = load_optional_dem(dem_path);
  require_dem_for(model, dem);
  const auto corrs = load_correspondences_csv(corr_path);
  Stopwatch sw;
  const HeldOutFit f =
      fit_with_checkpoints(cfg, control_points(corrs, dem ? &*dem : nullptr), model, px);
  out.timings.push_back({"fit", sw.lap()});
  if (f.fit.ill_conditioned) out.warnings.push_back(model.name() + " fit is ill-conditioned");
  const fs::path dir = prepare_dir(out_dir);
  out.files.push_back(write_file(dir, "model.txt", f.fit.model.serialize()));
  out.files.push_back(write_file(dir, "fit_report.txt", "fit " + fit_fields(f, px) + "\n"));
  return out;
}

CommandOutcome cmd_sweep(const PipelineConfig& cfg, const std::string& corr_path,
                         const std::string& dem_path, const std::string& out_dir) {
  CommandOutcome out;
  const double px = require_pixel_size(cfg);
  const auto dem = load_optional_dem(dem_path);
  for (const auto& m : cfg.models) require_dem_for(m, dem);
  const auto corrs = load_correspondences_csv(corr_path);
  Stopwatch sw;
  const auto results = sweep(cfg.models, control_points(corrs, dem ? &*dem : nullptr),
                             cfg.n_checkpoints, cfg.cp_counts, cfg.seed, px, cfg.threads);
  out.timings.push_back({"sweep", sw.lap()});

  std::ostringstream csv, rep;
  write_sweep_csv(csv, results);
  rep << "sweep models=" << results.size() << " cp_counts=" << join_ints(cfg.cp_counts)
      << " checkpoints=" << cfg.n_checkpoints << " correspondences=" << corrs.size() << "\n";
  for (std::size_t k = 0; k < cfg.cp_counts.size(); ++k) {
    const SweepResult* best = nullptr;
    for (const auto& r : results) {
      if (r.rmse_per_count[k] && (!best || *r.rmse_per_count[k] < *best->rmse_per_count[k]))
        best = &r;
    }
    rep << "best cp_count=" << cfg.cp_counts[k];
    if (best) {
      rep << " model=" << best->spec.name()
          << " rmse_px=" << format_double(*best->rmse_per_count[k]);
    } else {
      rep << " model=none";
    }
    rep << "\n";
  }
  const fs::path dir = prepare_dir(out_dir);
  out.files.push_back(write_file(dir, "sweep.csv", csv.str()));
  out.files.push_back(write_file(dir, "sweep_report.txt", rep.str()));
  return out;
}

CommandOutcome cmd_register(const PipelineConfig& cfg, const std::string& ref_path,
                            const std::string& sensed_path, const std::string& corr_path,
                            const ModelSpec& model, const std::string& dem_path,
                            const std::string& out_dir) {
  CommandOutcome out;
  Stopwatch sw;
  const RasterGrid ref = load_raster(ref_path);
  const RasterGrid sensed = load_raster(sensed_path);
  const auto dem = load_optional_dem(dem_path);
  require_dem_for(model, dem);
  const auto corrs = load_correspondences_csv(corr_path);
  const double px = cfg.pixel_size ? *cfg.pixel_size : std::abs(ref.geotransform.pixel_w);
  out.timings.push_back({"load", sw.lap()});

  const HeldOutFit f =
      fit_with_checkpoints(cfg, control_points(corrs, dem ? &*dem : nullptr), model, px);
  out.timings.push_back({"fit", sw.lap()});
  const WarpResult w =
      warp(sensed, f.fit.model, TargetGrid::like(ref), dem ? &*dem : nullptr, cfg.threads);
  out.timings.push_back({"warp", sw.lap()});

  const MisregReport mis = misregistration(corrs, px);
  std::ostringstream rep;
  rep << "misreg count=" << mis.count << " mean_abs_dx_px=" << format_double(mis.mean_abs_dx)
      << " mean_abs_dy_px=" << format_double(mis.mean_abs_dy)
      << " mean_ds_px=" << format_double(mis.mean_ds) << " max_ds_px=" << format_double(mis.max_ds)
      << " min_ds_px=" << format_double(mis.min_ds) << " std_ds_px=" << format_double(mis.std_ds)
      << "\n";
  rep << "register " << fit_fields(f, px) << "\n";
  rep << "warp width=" << w.image.width() << " height=" << w.image.height()
      << " evaluation_failures=" << w.evaluation_failures << " outside=" << w.outside
      << " failure_fraction=" << format_double(w.failure_fraction()) << "\n";
  if (w.failure_fraction() > 0.1) {
    const std::string msg = "model evaluation failed on " +
                            format_double(100.0 * w.failure_fraction()) + "% of output pixels";
    out.warnings.push_back(msg);
    rep << "warning message=\"" << msg << "\"\n";
  }
  if (f.fit.ill_conditioned) {
    out.warnings.push_back(model.name() + " fit is ill-conditioned");
    rep << "warning message=\"ill-conditioned fit\"\n";
  }

  const fs::path dir = prepare_dir(out_dir);
  const std::string image_path = (dir / "registered.bin").string();
  save_raster(w.image, image_path);
  out.files.push_back(image_path);
  out.files.push_back(write_file(dir, "model.txt", f.fit.model.serialize()));
  rep << "output file=registered.bin\n";
  out.files.push_back(write_file(dir, "register_report.txt", rep.str()));
  return out;
}

}  // namespace sarreg
