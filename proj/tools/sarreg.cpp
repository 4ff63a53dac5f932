#include <cmath>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sarreg/error.hpp"
#include "sarreg/pipeline.hpp"
#include "sarreg/raster.hpp"
#include "sarreg/synthgen.hpp"

namespace {

using namespace sarreg;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out_dir = "out";
  std::optional<int> template_size, search_size, blocks, margin;
  std::optional<std::size_t> top_k, checkpoints;
  std::optional<std::string> models, cp_counts;
  std::optional<double> pixel_size;
  std::vector<std::string> sets;  // raw key=value overrides
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "flat key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "RNG seed");
  cmd->add_option("--threads", c.threads, "worker threads (0 = all cores)");
  cmd->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--template-size", c.template_size, "template window side, px");
  cmd->add_option("--search-size", c.search_size, "search window side, px");
  cmd->add_option("--blocks", c.blocks, "FAST blocks per side");
  cmd->add_option("--top-k", c.top_k, "correspondences kept after RANSAC");
  cmd->add_option("--checkpoints", c.checkpoints, "held-out checkpoints");
  cmd->add_option("--margin", c.margin, "crop margin, sensed px");
  cmd->add_option("--models", c.models, "comma list of model names, or 'all'");
  cmd->add_option("--cp-counts", c.cp_counts, "comma list of CP counts");
  cmd->add_option("--pixel-size", c.pixel_size, "map units per pixel for reports");
  cmd->add_option("--set", c.sets, "extra config override KEY=VALUE (repeatable)");
}

PipelineConfig build_config(const Common& c) {
  KeyValueFile kv = c.config.empty() ? KeyValueFile{} : KeyValueFile::load(c.config);
  if (c.seed) kv.set("seed", std::to_string(*c.seed));
  if (c.threads) kv.set("threads", std::to_string(*c.threads));
  if (c.template_size) kv.set("template_size", std::to_string(*c.template_size));
  if (c.search_size) kv.set("search_size", std::to_string(*c.search_size));
  if (c.blocks) kv.set("n_blocks", std::to_string(*c.blocks));
  if (c.top_k) kv.set("top_k", std::to_string(*c.top_k));
  if (c.checkpoints) kv.set("n_checkpoints", std::to_string(*c.checkpoints));
  if (c.margin) kv.set("margin", std::to_string(*c.margin));
  if (c.models) kv.set("models", *c.models);
  if (c.cp_counts) kv.set("cp_counts", *c.cp_counts);
  if (c.pixel_size) kv.set("pixel_size", format_double(*c.pixel_size));
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(Errc::config, "--set expects KEY=VALUE, got '" + s + "'");
    kv.set(std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))));
  }
  return PipelineConfig::from_kv(kv);
}

/// Fills in the pixel size from a reference raster when none was configured.
void resolve_pixel_size(PipelineConfig& cfg, const std::string& ref_path) {
  if (cfg.pixel_size || ref_path.empty()) return;
  cfg.pixel_size = std::abs(load_raster(ref_path).geotransform.pixel_w);
}

void report(const CommandOutcome& out) {
  for (const auto& f : out.files) std::cout << "wrote " << f << "\n";
  for (const auto& t : out.timings)
    std::cout << "time stage=" << t.stage << " seconds=" << format_double(t.seconds) << "\n";
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAR/optical co-registration: matching, model comparison and warping"};
  app.require_subcommand(1);

  Common common;
  std::string ref, sensed, corr, dem, model, manifest;
  std::optional<int> synth_size;

  auto* synth = app.add_subcommand("synth", "generate a synthetic reference/sensed pair");
  synth->add_option("--manifest", manifest, "key = value synthetic scene description")
      ->check(CLI::ExistingFile);
  synth->add_option("--size", synth_size, "reference side, px");
  synth->add_option("--seed", common.seed, "RNG seed");
  synth->add_option("--out-dir", common.out_dir, "output directory")->capture_default_str();

  auto* match = app.add_subcommand("match", "detect and match correspondences");
  add_common(match, common);
  match->add_option("--ref", ref, "reference raster")->required();
  match->add_option("--sensed", sensed, "sensed raster")->required();

  auto* measure = app.add_subcommand("measure", "misregistration statistics");
  add_common(measure, common);
  measure->add_option("--corr", corr, "correspondence CSV")->required();
  measure->add_option("--ref", ref, "reference raster supplying the pixel size");

  auto* fit = app.add_subcommand("fit", "fit one model on CPs, score on checkpoints");
  add_common(fit, common);
  fit->add_option("--corr", corr, "correspondence CSV")->required();
  fit->add_option("--model", model, "model name, e.g. poly3, proj22, rfm2d");
  fit->add_option("--dem", dem, "DEM raster (RFM models)");
  fit->add_option("--ref", ref, "reference raster supplying the pixel size");

  auto* sweep = app.add_subcommand("sweep", "compare models over CP counts");
  add_common(sweep, common);
  sweep->add_option("--corr", corr, "correspondence CSV")->required();
  sweep->add_option("--dem", dem, "DEM raster (RFM models)");
  sweep->add_option("--ref", ref, "reference raster supplying the pixel size");

  auto* reg = app.add_subcommand("register", "fit a model and warp the sensed image");
  add_common(reg, common);
  reg->add_option("--ref", ref, "reference raster")->required();
  reg->add_option("--sensed", sensed, "sensed raster")->required();
  reg->add_option("--corr", corr, "correspondence CSV")->required();
  reg->add_option("--model", model, "model name (default: config register_model)");
  reg->add_option("--dem", dem, "DEM raster (RFM models)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      SynthSpec spec = manifest.empty() ? SynthSpec{}
                                        : SynthSpec::from_manifest(KeyValueFile::load(manifest));
      if (synth_size) spec.size = *synth_size;
      if (common.seed) spec.seed = *common.seed;
      report(cmd_synth(spec, common.out_dir));
      return 0;
    }
    PipelineConfig cfg = build_config(common);
    const ModelSpec chosen = model.empty() ? cfg.register_model : ModelSpec::parse(model);
    if (match->parsed()) {
      report(cmd_match(cfg, ref, sensed, common.out_dir));
    } else if (measure->parsed()) {
      resolve_pixel_size(cfg, ref);
      if (!cfg.pixel_size) throw Error(Errc::config, "measure needs --pixel-size or --ref");
      report(cmd_measure(corr, *cfg.pixel_size, common.out_dir));
    } else if (fit->parsed()) {
      resolve_pixel_size(cfg, ref);
      report(cmd_fit(cfg, corr, chosen, dem, common.out_dir));
    } else if (sweep->parsed()) {
      resolve_pixel_size(cfg, ref);
      report(cmd_sweep(cfg, corr, dem, common.out_dir));
    } else if (reg->parsed()) {
      report(cmd_register(cfg, ref, sensed, corr, chosen, dem, common.out_dir));
    }
  } catch (const Error& e) {
    std::cerr << "error code=" << errc_name(e.code()) << " message=\"" << e.what() << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error code=internal message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
