#include "sarreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "sarreg/error.hpp"
#include "sarreg/parallel.hpp"
#include "sarreg/textio.hpp"

namespace sarreg {

MisregReport misregistration(const std::vector<Correspondence>& corrs, double pixel_size) {
  if (corrs.empty()) throw Error(Errc::insufficient_points, "no correspondences to measure");
  if (!(pixel_size > 0.0)) throw Error(Errc::invalid_argument, "pixel_size must be > 0");
  MisregReport r;
  r.count = corrs.size();
  r.dx.reserve(r.count);
  r.dy.reserve(r.count);
  r.ds.reserve(r.count);
  for (const auto& c : corrs) {
    const double dx = (c.sensed_geo.x - c.ref_geo.x) / pixel_size;
    const double dy = (c.sensed_geo.y - c.ref_geo.y) / pixel_size;
    r.dx.push_back(dx);
    r.dy.push_back(dy);
    r.ds.push_back(std::sqrt(dx * dx + dy * dy));
  }
  const double m = static_cast<double>(r.count);
  for (std::size_t i = 0; i < r.count; ++i) {
    r.mean_abs_dx += std::abs(r.dx[i]);
    r.mean_abs_dy += std::abs(r.dy[i]);
    r.mean_ds += r.ds[i];
  }
  r.mean_abs_dx /= m;
  r.mean_abs_dy /= m;
  r.mean_ds /= m;
  r.max_ds = *std::max_element(r.ds.begin(), r.ds.end());
  r.min_ds = *std::min_element(r.ds.begin(), r.ds.end());
  double var = 0.0;
  for (double s : r.ds) var += (s - r.mean_ds) * (s - r.mean_ds);
  r.std_ds = std::sqrt(var / m);
  return r;
}

void write_misreg_csv(std::ostream& out, const MisregReport& r) {
  out << "index,dx_px,dy_px,ds_px\n";
  for (std::size_t i = 0; i < r.count; ++i) {
    out << i << ',' << format_double(r.dx[i]) << ',' << format_double(r.dy[i]) << ','
        << format_double(r.ds[i]) << "\n";
  }
  out << "# count=" << r.count << "\n"
      << "# mean_abs_dx_px=" << format_double(r.mean_abs_dx) << "\n"
      << "# mean_abs_dy_px=" << format_double(r.mean_abs_dy) << "\n"
      << "# mean_ds_px=" << format_double(r.mean_ds) << "\n"
      << "# max_ds_px=" << format_double(r.max_ds) << "\n"
      << "# min_ds_px=" << format_double(r.min_ds) << "\n"
      << "# std_ds_px=" << format_double(r.std_ds) << "\n";
}

CheckpointStats checkpoint_rmse(const FittedModel& model,
                                const std::vector<ControlPoint>& checkpoints, double pixel_size) {
  if (checkpoints.empty()) throw Error(Errc::insufficient_points, "no checkpoints");
  if (!(pixel_size > 0.0)) throw Error(Errc::invalid_argument, "pixel_size must be > 0");
  const bool needs_z = model.spec.family == ModelFamily::rfm;
  CheckpointStats st;
  double ss = 0.0, sum = 0.0;
  for (const auto& cp : checkpoints) {
    if (needs_z && !cp.ref_z) {
      throw Error(Errc::missing_dem, "checkpoint lacks the height an RFM needs");
    }
    const auto p = model.apply(cp.ref_x, cp.ref_y, needs_z ? cp.ref_z : std::nullopt);
    if (!p) {
      ++st.excluded;
      continue;
    }
    const double d = std::hypot(p->x - cp.sensed_x, p->y - cp.sensed_y) / pixel_size;
    if (!std::isfinite(d)) {
      ++st.excluded;
      continue;
    }
    st.residuals.push_back(d);
    ss += d * d;
    sum += d;
    st.max_residual = std::max(st.max_residual, d);
  }
  st.evaluated = st.residuals.size();
  if (st.evaluated == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    st.rmse = st.max_residual = st.mean_distance = nan;
    return st;
  }
  st.rmse = std::sqrt(ss / static_cast<double>(st.evaluated));
  st.mean_distance = sum / static_cast<double>(st.evaluated);
  return st;
}

std::vector<ControlPoint> to_control_points(const std::vector<Correspondence>& corrs) {
  std::vector<ControlPoint> out;
  out.reserve(corrs.size());
  for (const auto& c : corrs) {
    out.push_back({c.ref_geo.x, c.ref_geo.y, std::nullopt, c.sensed_geo.x, c.sensed_geo.y});
  }
  return out;
}

CheckpointSplit split_checkpoints(const std::vector<ControlPoint>& points,
                                  std::size_t n_checkpoints, std::uint64_t seed) {
  if (n_checkpoints > points.size()) {
    throw Error(Errc::insufficient_points, "more checkpoints requested than points available");
  }
  std::mt19937_64 rng(seed);
  CheckpointSplit split;
  if (n_checkpoints > 0) {
    const int g = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_checkpoints))));
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& p : points) {
      x0 = std::min(x0, p.ref_x);
      x1 = std::max(x1, p.ref_x);
      y0 = std::min(y0, p.ref_y);
      y1 = std::max(y1, p.ref_y);
    }
    auto cell_of = [&](double v, double lo, double hi) {
      if (!(hi > lo)) return 0;
      return std::clamp(static_cast<int>((v - lo) / (hi - lo) * g), 0, g - 1);
    };
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> cells(static_cast<std::size_t>(g) * g);
    for (auto i : order) {
      const int cx = cell_of(points[i].ref_x, x0, x1);
      const int cy = cell_of(points[i].ref_y, y0, y1);
      cells[static_cast<std::size_t>(cy) * g + cx].push_back(i);
    }
    std::vector<std::size_t> visit(cells.size());
    std::iota(visit.begin(), visit.end(), 0);
    std::shuffle(visit.begin(), visit.end(), rng);
    std::vector<std::size_t> cursor(cells.size(), 0);
    while (split.checkpoints.size() < n_checkpoints) {
      for (auto c : visit) {
        if (split.checkpoints.size() == n_checkpoints) break;
        if (cursor[c] < cells[c].size()) split.checkpoints.push_back(cells[c][cursor[c]++]);
      }
    }
  }
  std::vector<bool> taken(points.size(), false);
  for (auto i : split.checkpoints) taken[i] = true;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!taken[i]) split.pool.push_back(i);
  std::shuffle(split.pool.begin(), split.pool.end(), rng);
  return split;
}

std::vector<SweepResult> sweep(const std::vector<ModelSpec>& models,
                               const std::vector<ControlPoint>& points, std::size_t n_checkpoints,
                               const std::vector<int>& cp_counts, std::uint64_t seed,
                               double pixel_size, unsigned threads) {
  if (cp_counts.empty()) throw Error(Errc::invalid_argument, "no CP counts to sweep");
  for (std::size_t i = 0; i < cp_counts.size(); ++i) {
    if (cp_counts[i] < 1 || (i > 0 && cp_counts[i] <= cp_counts[i - 1])) {
      throw Error(Errc::invalid_argument, "CP counts must be positive and strictly increasing");
    }
  }
  if (static_cast<std::size_t>(cp_counts.back()) + n_checkpoints > points.size()) {
    throw Error(Errc::insufficient_points,
                "sweep needs " + std::to_string(cp_counts.back() + n_checkpoints) +
                    " correspondences, have " + std::to_string(points.size()));
  }
  if (n_checkpoints == 0) throw Error(Errc::invalid_argument, "need at least one checkpoint");
  const bool any_rfm = std::any_of(models.begin(), models.end(),
                                   [](const ModelSpec& m) { return m.family == ModelFamily::rfm; });
  if (any_rfm && std::any_of(points.begin(), points.end(),
                             [](const ControlPoint& p) { return !p.ref_z.has_value(); })) {
    throw Error(Errc::missing_dem, "RFM models requested but points carry no DEM heights");
  }

  const CheckpointSplit split = split_checkpoints(points, n_checkpoints, seed);
  std::vector<ControlPoint> checkpoints;
  for (auto i : split.checkpoints) checkpoints.push_back(points[i]);

  std::vector<SweepResult> results(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    auto& r = results[m];
    r.spec = models[m];
    r.cp_counts = cp_counts;
    r.n_checkpoints = n_checkpoints;
    r.rmse_per_count.resize(cp_counts.size());
    r.max_residual_per_count.resize(cp_counts.size());
    r.mean_distance_per_count.resize(cp_counts.size());
    r.status_per_count.resize(cp_counts.size());
  }
  const std::size_t cells = models.size() * cp_counts.size();
  parallel_for(cells, threads, [&](std::size_t cell) {
    const std::size_t m = cell / cp_counts.size();
    const std::size_t k = cell % cp_counts.size();
    auto& r = results[m];
    std::vector<ControlPoint> cps;
    for (int i = 0; i < cp_counts[k]; ++i) cps.push_back(points[split.pool[i]]);
    try {
      const FitResult f = fit(models[m], cps);
      const CheckpointStats st = checkpoint_rmse(f.model, checkpoints, pixel_size);
      if (st.evaluated == 0) {
        r.status_per_count[k] = "evaluation_failed";
        return;
      }
      r.rmse_per_count[k] = st.rmse;
      r.max_residual_per_count[k] = st.max_residual;
      r.mean_distance_per_count[k] = st.mean_distance;
      r.status_per_count[k] = f.ill_conditioned ? "ill_conditioned"
                              : st.excluded ? "excluded_" + std::to_string(st.excluded)
                                            : "ok";
    } catch (const Error& e) {
      r.status_per_count[k] = std::string(errc_name(e.code()));
    }
  });
  return results;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepResult>& results) {
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << "model,cp_count,rmse_px,max_residual_px,mean_distance_px,status\n";
  for (const auto& r : results) {
    for (std::size_t k = 0; k < r.cp_counts.size(); ++k) {
      out << r.spec.name() << ',' << r.cp_counts[k] << ',' << cell(r.rmse_per_count[k]) << ','
          << cell(r.max_residual_per_count[k]) << ',' << cell(r.mean_distance_per_count[k]) << ','
          << r.status_per_count[k] << "\n";
    }
  }
}

}  // namespace sarreg
