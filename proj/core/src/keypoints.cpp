#include "sarreg/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sarreg/error.hpp"
#include "sarreg/parallel.hpp"

namespace sarreg {

void BlockGridParams::validate() const {
  if (n_blocks < 1) throw Error(Errc::invalid_argument, "n_blocks must be >= 1");
  if (k_per_block < 1) throw Error(Errc::invalid_argument, "k_per_block must be >= 1");
  if (border < 3) throw Error(Errc::invalid_argument, "border must be >= 3");
  if (fast_threshold && !(*fast_threshold >= 0.0)) {
    throw Error(Errc::invalid_argument, "fast_threshold must be non-negative");
  }
}

namespace {

// Largest circular run of `flags` and the sum of `weights` over it.
struct Run {
  int length = 0;
  double sum = 0.0;
};

Run longest_circular_run(const std::array<bool, 16>& flags, const std::array<double, 16>& weights) {
  Run best;
  if (std::all_of(flags.begin(), flags.end(), [](bool f) { return f; })) {
    best.length = 16;
    for (double w : weights) best.sum += w;
    return best;
  }
  // Start scanning just after a false entry so runs never straddle the start.
  int start = 0;
  while (flags[start]) ++start;
  Run cur;
  for (int k = 1; k <= 16; ++k) {
    const int i = (start + k) % 16;
    if (flags[i]) {
      ++cur.length;
      cur.sum += weights[i];
      if (cur.length > best.length) best = cur;
    } else {
      cur = Run{};
    }
  }
  return best;
}

}  // namespace

double fast_score(const RasterGrid& image, int col, int row, double threshold) {
  const double center = image.at(col, row);
  std::array<bool, 16> brighter{};
  std::array<bool, 16> darker{};
  std::array<double, 16> excess{};
  int n_bright = 0, n_dark = 0;
  for (int k = 0; k < 16; ++k) {
    const double v = image.at(col + kFastCircle[k][0], row + kFastCircle[k][1]);
    brighter[k] = v > center + threshold;
    darker[k] = v < center - threshold;
    excess[k] = std::abs(v - center) - threshold;
    n_bright += brighter[k];
    n_dark += darker[k];
  }
  double score = 0.0;
  if (n_bright >= kFastArc) {
    const Run r = longest_circular_run(brighter, excess);
    if (r.length >= kFastArc) score = r.sum;
  }
  if (n_dark >= kFastArc) {
    const Run r = longest_circular_run(darker, excess);
    if (r.length >= kFastArc) score = std::max(score, r.sum);
  }
  return score;
}

double default_fast_threshold(const RasterGrid& image) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const float v : image.data()) {
    if (image.is_nodata(v)) continue;
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
  }
  return hi > lo ? 0.02 * (hi - lo) : 0.0;
}

std::vector<InterestPoint> detect_block_fast(const RasterGrid& image,
                                             const BlockGridParams& params, unsigned threads) {
  params.validate();
  const int w = image.width();
  const int h = image.height();
  const int n = params.n_blocks;
  const double threshold = params.fast_threshold.value_or(default_fast_threshold(image));

  auto block_start = [n](int extent, int b) { return (extent / n) * b; };
  auto block_end = [n](int extent, int b) { return b == n - 1 ? extent : (extent / n) * (b + 1); };

  std::vector<std::vector<InterestPoint>> per_block(static_cast<std::size_t>(n) * n);
  parallel_for(per_block.size(), threads, [&](std::size_t idx) {
    const int by = static_cast<int>(idx) / n;
    const int bx = static_cast<int>(idx) % n;
    const int c_lo = std::max(block_start(w, bx), params.border);
    const int c_hi = std::min(block_end(w, bx), w - params.border);
    const int r_lo = std::max(block_start(h, by), params.border);
    const int r_hi = std::min(block_end(h, by), h - params.border);
    std::vector<InterestPoint> cands;
    for (int r = r_lo; r < r_hi; ++r) {
      for (int c = c_lo; c < c_hi; ++c) {
        if (image.is_nodata(image.at(c, r))) continue;
        const double s = fast_score(image, c, r, threshold);
        if (s > 0.0) cands.push_back({c, r, s});
      }
    }
    const auto keep = std::min<std::size_t>(cands.size(), params.k_per_block);
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(),
                      [](const InterestPoint& a, const InterestPoint& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.row != b.row) return a.row < b.row;
                        return a.col < b.col;
                      });
    cands.resize(keep);
    per_block[idx] = std::move(cands);
  });

  std::vector<InterestPoint> out;
  for (auto& blk : per_block) out.insert(out.end(), blk.begin(), blk.end());
  return out;
}

}  // namespace sarreg
