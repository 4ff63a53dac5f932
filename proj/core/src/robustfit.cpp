#include "sarreg/robustfit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hash.hpp"
#include "sarreg/error.hpp"

namespace sarreg {

Point2 PlanarTransform::apply(double col, double row) const noexcept {
  const double w = h[6] * col + h[7] * row + h[8];
  return {(h[0] * col + h[1] * row + h[2]) / w, (h[3] * col + h[4] * row + h[5]) / w};
}

double reprojection_error(const PlanarTransform& t, const Correspondence& c) noexcept {
  const Point2 p = t.apply(c.ref_col, c.ref_row);
  const double d = std::hypot(p.x - c.sensed_col, p.y - c.sensed_row);
  return std::isfinite(d) ? d : std::numeric_limits<double>::infinity();
}

void RansacParams::validate() const {
  if (!(inlier_tol > 0.0)) throw Error(Errc::invalid_argument, "inlier_tol must be > 0");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(Errc::invalid_argument, "confidence must lie in (0, 1)");
  }
  if (max_iters < 1) throw Error(Errc::invalid_argument, "max_iters must be >= 1");
}

namespace {

using detail::splitmix64;

std::size_t minimal_sample(RansacModel m) { return m == RansacModel::affine ? 3 : 4; }

// Isotropic similarity normalisation (Hartley) for conditioning.
struct Conditioner {
  double cx = 0, cy = 0, s = 1;
  static Conditioner from(const std::vector<Point2>& pts) {
    Conditioner c;
    for (const auto& p : pts) {
      c.cx += p.x;
      c.cy += p.y;
    }
    c.cx /= static_cast<double>(pts.size());
    c.cy /= static_cast<double>(pts.size());
    double d = 0;
    for (const auto& p : pts) d += std::hypot(p.x - c.cx, p.y - c.cy);
    d /= static_cast<double>(pts.size());
    c.s = d > 0 ? std::sqrt(2.0) / d : 1.0;
    return c;
  }
  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d m;
    m << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
    return m;
  }
};

PlanarTransform from_matrix(RansacModel kind, const Eigen::Matrix3d& H) {
  PlanarTransform t;
  t.kind = kind;
  const Eigen::Matrix3d Hn = H / H(2, 2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t.h[r * 3 + c] = Hn(r, c);
  if (kind == RansacModel::affine) {
    t.h[6] = t.h[7] = 0.0;
    t.h[8] = 1.0;
  }
  return t;
}

PlanarTransform fit_indices(RansacModel kind, const std::vector<Correspondence>& corrs,
                            const std::vector<std::size_t>& idx) {
  std::vector<Point2> src, dst;
  src.reserve(idx.size());
  dst.reserve(idx.size());
  for (auto i : idx) {
    src.push_back({corrs[i].ref_col, corrs[i].ref_row});
    dst.push_back({corrs[i].sensed_col, corrs[i].sensed_row});
  }
  const auto cs = Conditioner::from(src);
  const auto cd = Conditioner::from(dst);
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::Matrix3d Hn;
  if (kind == RansacModel::affine) {
    Eigen::MatrixXd A(2 * n, 6);
    Eigen::VectorXd b(2 * n);
    A.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = cs.s * (src[i].x - cs.cx), y = cs.s * (src[i].y - cs.cy);
      A.row(2 * i) << x, y, 1, 0, 0, 0;
      A.row(2 * i + 1) << 0, 0, 0, x, y, 1;
      b(2 * i) = cd.s * (dst[i].x - cd.cx);
      b(2 * i + 1) = cd.s * (dst[i].y - cd.cy);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 6) throw Error(Errc::degenerate_configuration, "affine fit is rank deficient");
    const Eigen::VectorXd p = qr.solve(b);
    Hn << p(0), p(1), p(2), p(3), p(4), p(5), 0, 0, 1;
  } else {
    Eigen::MatrixXd A(2 * n, 9);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = cs.s * (src[i].x - cs.cx), y = cs.s * (src[i].y - cs.cy);
      const double u = cd.s * (dst[i].x - cd.cx), v = cd.s * (dst[i].y - cd.cy);
      A.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
      A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y, -v;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv.size() >= 8 && sv(7) <= 1e-10 * sv(0)) {
      throw Error(Errc::degenerate_configuration, "projective fit is rank deficient");
    }
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    if (std::abs(Hn(2, 2)) < 1e-15) {
      throw Error(Errc::degenerate_configuration, "projective fit sends the origin to infinity");
    }
  }
  const Eigen::Matrix3d H = cd.matrix().inverse() * Hn * cs.matrix();
  return from_matrix(kind, H);
}

// True if a, b, c are collinear relative to their spread.
bool collinear(Point2 a, Point2 b, Point2 c) {
  const double area2 = std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
  const double span = std::max({std::hypot(b.x - a.x, b.y - a.y), std::hypot(c.x - a.x, c.y - a.y),
                                std::hypot(c.x - b.x, c.y - b.y)});
  return area2 <= 1e-6 * span * span;
}

// Any collinear triple, in either image, makes a minimal sample degenerate.
bool degenerate_sample(const std::vector<Correspondence>& corrs,
                       const std::vector<std::size_t>& s) {
  auto ref = [&](std::size_t i) { return Point2{corrs[i].ref_col, corrs[i].ref_row}; };
  auto sen = [&](std::size_t i) { return Point2{corrs[i].sensed_col, corrs[i].sensed_row}; };
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      for (std::size_t k = j + 1; k < s.size(); ++k)
        if (collinear(ref(s[i]), ref(s[j]), ref(s[k])) ||
            collinear(sen(s[i]), sen(s[j]), sen(s[k])))
          return true;
  return false;
}

std::vector<std::size_t> classify(const PlanarTransform& t, const std::vector<Correspondence>& corrs,
                                  double tol) {
  std::vector<std::size_t> in;
  for (std::size_t i = 0; i < corrs.size(); ++i)
    if (reprojection_error(t, corrs[i]) <= tol) in.push_back(i);
  return in;
}

}  // namespace

PlanarTransform fit_planar(RansacModel kind, const std::vector<Correspondence>& corrs) {
  if (corrs.size() < minimal_sample(kind)) {
    throw Error(Errc::insufficient_points, "too few correspondences for planar fit");
  }
  std::vector<std::size_t> idx(corrs.size());
  std::iota(idx.begin(), idx.end(), 0);
  return fit_indices(kind, corrs, idx);
}

RansacResult ransac_filter(const std::vector<Correspondence>& corrs, const RansacParams& params) {
  params.validate();
  const std::size_t s = minimal_sample(params.model);
  const std::size_t n = corrs.size();
  if (n < s) {
    throw Error(Errc::insufficient_points, "RANSAC needs at least " + std::to_string(s) +
                                               " correspondences, got " + std::to_string(n));
  }

  std::vector<std::size_t> best_set;
  double best_cost = std::numeric_limits<double>::infinity();
  long required = params.max_iters;
  int iter = 0;
  int consecutive_degenerate = 0;
  std::uint64_t stream = 0;
  std::vector<std::size_t> sample(s);
  while (iter < required) {
    std::mt19937_64 rng(splitmix64(params.seed ^ splitmix64(stream++)));
    for (std::size_t j = 0; j < s; ++j) {
      bool fresh;
      do {
        sample[j] = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        fresh = std::find(sample.begin(), sample.begin() + j, sample[j]) == sample.begin() + j;
      } while (!fresh);
    }
    PlanarTransform hyp;
    bool ok = !degenerate_sample(corrs, sample);
    if (ok) {
      try {
        hyp = fit_indices(params.model, corrs, sample);
      } catch (const Error&) {
        ok = false;
      }
    }
    if (!ok) {
      if (++consecutive_degenerate >= 100) {
        throw Error(Errc::degenerate_configuration,
                    "100 consecutive degenerate RANSAC samples");
      }
      continue;
    }
    consecutive_degenerate = 0;
    ++iter;

    std::vector<std::size_t> consensus;
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = reprojection_error(hyp, corrs[i]);
      if (e <= params.inlier_tol) {
        consensus.push_back(i);
        cost += e;
      }
    }
    if (consensus.size() > best_set.size() ||
        (consensus.size() == best_set.size() && cost < best_cost)) {
      best_set = std::move(consensus);
      best_cost = cost;
      const double ratio = static_cast<double>(best_set.size()) / static_cast<double>(n);
      const double p_good = std::pow(ratio, static_cast<double>(s));
      if (p_good >= 1.0) {
        required = std::min<long>(required, iter);
      } else if (p_good > 0.0) {
        const double need = std::log(1.0 - params.confidence) / std::log(1.0 - p_good);
        required = std::min<long>(params.max_iters, static_cast<long>(std::ceil(need)));
      }
    }
  }

  RansacResult res;
  res.iterations = iter;
  std::vector<std::size_t> set = best_set;
  PlanarTransform model = fit_indices(params.model, corrs, set);
  for (int round = 0; round < 20; ++round) {
    auto next = classify(model, corrs, params.inlier_tol);
    if (next == set || next.size() < s) break;
    PlanarTransform refit;
    try {
      refit = fit_indices(params.model, corrs, next);
    } catch (const Error&) {
      break;
    }
    set = std::move(next);
    model = refit;
  }
  res.model = model;
  res.inliers = classify(model, corrs, params.inlier_tol);
  std::vector<bool> is_in(n, false);
  for (auto i : res.inliers) is_in[i] = true;
  for (std::size_t i = 0; i < n; ++i)
    if (!is_in[i]) res.outliers.push_back(i);
  return res;
}

std::vector<Correspondence> select(const std::vector<Correspondence>& corrs,
                                   const std::vector<std::size_t>& indices) {
  std::vector<Correspondence> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(corrs.at(i));
  return out;
}

std::vector<Correspondence> select_top_k(const std::vector<Correspondence>& corrs, std::size_t k) {
  if (k > corrs.size()) {
    throw Error(Errc::insufficient_points, "top-k selection asks for " + std::to_string(k) +
                                               " of " + std::to_string(corrs.size()));
  }
  if (k == 0) return {};
  if (corrs.size() < 3) return select(corrs, [&] {
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }());
  const PlanarTransform fit = fit_planar(RansacModel::affine, corrs);
  std::vector<double> resid(corrs.size());
  // Sub-nanopixel residuals are solver noise and count as exact ties.
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double r = reprojection_error(fit, corrs[i]);
    resid[i] = r < 1e-9 ? 0.0 : r;
  }
  std::vector<std::size_t> order(corrs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return resid[a] < resid[b]; });
  order.resize(k);
  return select(corrs, order);
}

}  // namespace sarreg
