#include "sarreg/geomodels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sarreg/error.hpp"
#include "sarreg/textio.hpp"

namespace sarreg {

namespace {

constexpr int kMaxTerms = 21;
constexpr double kDenominatorFloor = 1e-12;

int terms_2d(int n) { return (n + 1) * (n + 2) / 2; }
int terms_3d(int n) { return (n + 1) * (n + 2) * (n + 3) / 6; }

// Writes the basis for `spec` at normalised coordinates; returns the count.
int fill_basis(const ModelSpec& spec, double X, double Y, double Z, double* out) {
  const int n = spec.order;
  std::array<double, 6> px{1.0}, py{1.0}, pz{1.0};
  for (int i = 1; i <= n; ++i) {
    px[i] = px[i - 1] * X;
    py[i] = py[i - 1] * Y;
    pz[i] = pz[i - 1] * Z;
  }
  int k = 0;
  if (spec.input_dims() == 2) {
    for (int d = 0; d <= n; ++d)
      for (int i = d; i >= 0; --i) out[k++] = px[i] * py[d - i];
  } else {
    for (int d = 0; d <= n; ++d)
      for (int i = d; i >= 0; --i)
        for (int j = d - i; j >= 0; --j) out[k++] = px[i] * py[j] * pz[d - i - j];
  }
  return k;
}

double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

ModelSpec ModelSpec::polynomial(int order) {
  ModelSpec s{ModelFamily::polynomial, order, DenomMode::unit};
  s.validate();
  return s;
}

ModelSpec ModelSpec::projective(int parameters) {
  int order = 0;
  switch (parameters) {
    case 10: order = 1; break;
    case 22: order = 2; break;
    case 38: order = 3; break;
    default:
      throw Error(Errc::invalid_argument,
                  "projective models have 10, 22 or 38 parameters, not " + std::to_string(parameters));
  }
  return ModelSpec{ModelFamily::projective, order, DenomMode::distinct};
}

ModelSpec ModelSpec::rfm(int order, DenomMode mode) {
  ModelSpec s{ModelFamily::rfm, order, mode};
  s.validate();
  return s;
}

ModelSpec ModelSpec::parse(std::string_view name) {
  const std::string n(trim(name));
  try {
    if (n.rfind("poly", 0) == 0) return polynomial(static_cast<int>(parse_int(n.substr(4))));
    if (n.rfind("proj", 0) == 0) return projective(static_cast<int>(parse_int(n.substr(4))));
    if (n.rfind("rfm", 0) == 0 && n.size() == 5) {
      const int order = n[3] - '0';
      const char m = n[4];
      if (m == 'u') return rfm(order, DenomMode::unit);
      if (m == 's') return rfm(order, DenomMode::shared);
      if (m == 'd') return rfm(order, DenomMode::distinct);
    }
  } catch (const Error&) {
  }
  throw Error(Errc::invalid_argument, "unknown model '" + n + "'");
}

std::string ModelSpec::name() const {
  switch (family) {
    case ModelFamily::polynomial: return "poly" + std::to_string(order);
    case ModelFamily::projective: return "proj" + std::to_string(parameter_count());
    case ModelFamily::rfm: {
      const char m = denom == DenomMode::unit ? 'u' : denom == DenomMode::shared ? 's' : 'd';
      return "rfm" + std::to_string(order) + m;
    }
  }
  return "?";
}

std::string ModelSpec::description() const {
  switch (family) {
    case ModelFamily::polynomial: return "order-" + std::to_string(order) + " polynomial";
    case ModelFamily::projective:
      return std::to_string(parameter_count()) + "-parameter projective";
    case ModelFamily::rfm: {
      const char* m = denom == DenomMode::unit     ? "unit denominator"
                      : denom == DenomMode::shared ? "shared denominator"
                                                   : "distinct denominators";
      return "order-" + std::to_string(order) + " RFM (" + m + ")";
    }
  }
  return "?";
}

int ModelSpec::numerator_terms() const noexcept {
  return input_dims() == 2 ? terms_2d(order) : terms_3d(order);
}

int ModelSpec::denominator_terms() const noexcept {
  return denom == DenomMode::unit ? 0 : numerator_terms() - 1;
}

int ModelSpec::parameter_count() const noexcept {
  const int nb = numerator_terms();
  const int nd = denominator_terms();
  switch (denom) {
    case DenomMode::unit: return 2 * nb;
    case DenomMode::shared: return 2 * nb + nd;
    case DenomMode::distinct: return 2 * (nb + nd);
  }
  return 0;
}

void ModelSpec::validate() const {
  switch (family) {
    case ModelFamily::polynomial:
      if (order < 1 || order > 5 || denom != DenomMode::unit) {
        throw Error(Errc::invalid_argument, "polynomial order must be 1..5");
      }
      break;
    case ModelFamily::projective:
      if (order < 1 || order > 3 || denom != DenomMode::distinct) {
        throw Error(Errc::invalid_argument, "projective model must have 10, 22 or 38 parameters");
      }
      break;
    case ModelFamily::rfm:
      if (order < 1 || order > 3) throw Error(Errc::invalid_argument, "RFM order must be 1..3");
      break;
  }
}

std::vector<ModelSpec> all_models() {
  std::vector<ModelSpec> out;
  for (int n = 1; n <= 5; ++n) out.push_back(ModelSpec::polynomial(n));
  for (int p : {10, 22, 38}) out.push_back(ModelSpec::projective(p));
  for (int n = 1; n <= 3; ++n)
    for (auto m : {DenomMode::unit, DenomMode::shared, DenomMode::distinct})
      out.push_back(ModelSpec::rfm(n, m));
  return out;
}

int min_cp_count(const ModelSpec& spec) {
  spec.validate();
  return (spec.parameter_count() + 1) / 2;
}

std::vector<double> poly_basis(double X, double Y, int order) {
  if (order < 1 || order > 5) throw Error(Errc::invalid_argument, "order must be 1..5");
  std::array<double, kMaxTerms> buf{};
  const int n = fill_basis(ModelSpec{ModelFamily::polynomial, order, DenomMode::unit}, X, Y, 0.0,
                           buf.data());
  return {buf.begin(), buf.begin() + n};
}

std::vector<double> poly_basis_3d(double X, double Y, double Z, int order) {
  if (order < 1 || order > 3) throw Error(Errc::invalid_argument, "order must be 1..3");
  std::array<double, kMaxTerms> buf{};
  const int n =
      fill_basis(ModelSpec{ModelFamily::rfm, order, DenomMode::unit}, X, Y, Z, buf.data());
  return {buf.begin(), buf.begin() + n};
}

// ---------------------------------------------------------------------------
// FittedModel

void FittedModel::validate() const {
  spec.validate();
  const auto expected = static_cast<std::size_t>(spec.numerator_terms() + spec.denominator_terms());
  if (coeffs_x.size() != expected || coeffs_y.size() != expected) {
    throw Error(Errc::invalid_argument, "coefficient count does not match " + spec.name());
  }
  for (const auto& a : norm.in)
    if (!(a.scale != 0.0)) throw Error(Errc::invalid_argument, "zero normalisation scale");
  for (const auto& a : norm.out)
    if (!(a.scale != 0.0)) throw Error(Errc::invalid_argument, "zero normalisation scale");
}

std::optional<Point2> FittedModel::apply(double x, double y, std::optional<double> z) const {
  const bool is_rfm = spec.family == ModelFamily::rfm;
  if (is_rfm != z.has_value()) {
    throw Error(Errc::invalid_argument,
                is_rfm ? "RFM evaluation needs a height" : "height given to a planar model");
  }
  std::array<double, kMaxTerms> b{};
  const int nb = fill_basis(spec, norm.in[0].forward(x), norm.in[1].forward(y),
                            is_rfm ? norm.in[2].forward(*z) : 0.0, b.data());
  const int nd = spec.denominator_terms();
  const double nx = dot(coeffs_x.data(), b.data(), nb);
  const double ny = dot(coeffs_y.data(), b.data(), nb);
  double dx = 1.0, dy = 1.0;
  if (nd > 0) {
    dx += dot(coeffs_x.data() + nb, b.data() + 1, nd);
    dy += dot(coeffs_y.data() + nb, b.data() + 1, nd);
  }
  if (!(std::abs(dx) >= kDenominatorFloor) || !(std::abs(dy) >= kDenominatorFloor)) {
    return std::nullopt;
  }
  return Point2{norm.out[0].inverse(nx / dx), norm.out[1].inverse(ny / dy)};
}

std::string FittedModel::serialize() const {
  std::ostringstream out;
  out << "sarreg-model 1\n";
  out << "spec " << spec.name() << "\n";
  out << "norm_in";
  for (const auto& a : norm.in) out << ' ' << format_double_sci(a.offset) << ' ' << format_double_sci(a.scale);
  out << "\nnorm_out";
  for (const auto& a : norm.out) out << ' ' << format_double_sci(a.offset) << ' ' << format_double_sci(a.scale);
  out << "\ncoeffs_x " << coeffs_x.size();
  for (double c : coeffs_x) out << ' ' << format_double_sci(c);
  out << "\ncoeffs_y " << coeffs_y.size();
  for (double c : coeffs_y) out << ' ' << format_double_sci(c);
  out << "\n";
  return out.str();
}

FittedModel FittedModel::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  auto fail = [](const std::string& msg) { return Error(Errc::malformed_header, "model file: " + msg); };
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "sarreg-model" || version != 1) {
    throw fail("missing 'sarreg-model 1' line");
  }
  FittedModel m;
  std::string word;
  auto read_number = [&]() {
    std::string tok;
    if (!(in >> tok)) throw fail("truncated");
    return parse_double(tok);
  };
  auto expect = [&](const char* key) {
    if (!(in >> word) || word != key) throw fail(std::string("expected '") + key + "'");
  };
  expect("spec");
  if (!(in >> word)) throw fail("missing spec");
  m.spec = ModelSpec::parse(word);
  expect("norm_in");
  for (auto& a : m.norm.in) {
    a.offset = read_number();
    a.scale = read_number();
  }
  expect("norm_out");
  for (auto& a : m.norm.out) {
    a.offset = read_number();
    a.scale = read_number();
  }
  for (auto* coeffs : {&m.coeffs_x, &m.coeffs_y}) {
    expect(coeffs == &m.coeffs_x ? "coeffs_x" : "coeffs_y");
    const double count = read_number();
    if (count < 0 || count > 1000) throw fail("bad coefficient count");
    coeffs->resize(static_cast<std::size_t>(count));
    for (double& c : *coeffs) c = read_number();
  }
  m.validate();
  return m;
}

FittedModel FittedModel::load(const std::string& path) { return parse(read_text_file(path)); }

void FittedModel::save(const std::string& path) const { write_text_file(path, serialize()); }

// ---------------------------------------------------------------------------
// Fitting

namespace {

AxisNorm span_norm(double lo, double hi) {
  AxisNorm a;
  a.offset = 0.5 * (lo + hi);
  a.scale = 0.5 * (hi - lo);
  if (!(a.scale > 0.0) || !std::isfinite(a.scale)) a.scale = 1.0;
  return a;
}

Normalization normalization_for(const std::vector<ControlPoint>& cps, bool with_z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::array<double, 5> lo{inf, inf, inf, inf, inf}, hi{-inf, -inf, -inf, -inf, -inf};
  for (const auto& c : cps) {
    const double v[5] = {c.ref_x, c.ref_y, with_z ? *c.ref_z : 0.0, c.sensed_x, c.sensed_y};
    for (int i = 0; i < 5; ++i) {
      lo[i] = std::min(lo[i], v[i]);
      hi[i] = std::max(hi[i], v[i]);
    }
  }
  Normalization n;
  n.in[0] = span_norm(lo[0], hi[0]);
  n.in[1] = span_norm(lo[1], hi[1]);
  n.in[2] = with_z ? span_norm(lo[2], hi[2]) : AxisNorm{};
  n.out[0] = span_norm(lo[3], hi[3]);
  n.out[1] = span_norm(lo[4], hi[4]);
  return n;
}

// Column layout of the joint unknown vector.
struct Layout {
  int nb, nd;
  int num_x, num_y, den_x, den_y, cols;

  explicit Layout(const ModelSpec& s) : nb(s.numerator_terms()), nd(s.denominator_terms()) {
    num_x = 0;
    num_y = nb;
    den_x = 2 * nb;
    den_y = s.denom == DenomMode::distinct ? den_x + nd : den_x;
    cols = s.denom == DenomMode::distinct ? den_y + nd : den_x + nd;
  }
};

struct Problem {
  const ModelSpec& spec;
  Layout layout;
  Eigen::MatrixXd basis;  // n x nb, normalised
  Eigen::VectorXd obs_x, obs_y;

  Eigen::Index n() const { return basis.rows(); }

  // Ratios and denominators at the current parameters.
  void evaluate(const Eigen::VectorXd& th, Eigen::VectorXd& num_x, Eigen::VectorXd& num_y,
                Eigen::VectorXd& den_x, Eigen::VectorXd& den_y) const {
    const auto& L = layout;
    num_x = basis * th.segment(L.num_x, L.nb);
    num_y = basis * th.segment(L.num_y, L.nb);
    den_x = Eigen::VectorXd::Ones(n());
    den_y = Eigen::VectorXd::Ones(n());
    if (L.nd > 0) {
      const auto tail = basis.rightCols(L.nd);
      den_x += tail * th.segment(L.den_x, L.nd);
      den_y += tail * th.segment(L.den_y, L.nd);
    }
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& th) const {
    Eigen::VectorXd nx, ny, dx, dy;
    evaluate(th, nx, ny, dx, dy);
    Eigen::VectorXd r(2 * n());
    for (Eigen::Index i = 0; i < n(); ++i) {
      r(2 * i) = nx(i) / dx(i) - obs_x(i);
      r(2 * i + 1) = ny(i) / dy(i) - obs_y(i);
    }
    return r;
  }
};

double rms(const Eigen::VectorXd& r) {
  if (r.size() == 0) return 0.0;
  return std::sqrt(r.squaredNorm() / static_cast<double>(r.size() / 2));
}

Eigen::VectorXd solve_checked(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol,
                              const char* what) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 0.0) || sv(sv.size() - 1) <= tol * sv(0) ||
      A.rows() < A.cols()) {
    throw Error(Errc::degenerate_configuration, std::string(what) + ": rank-deficient design");
  }
  return svd.solve(b);
}

bool denominators_ill_conditioned(const FittedModel& m) {
  const int nd = m.spec.denominator_terms();
  if (nd == 0) return false;
  const bool three_d = m.spec.input_dims() == 3;
  const int steps = three_d ? 10 : 20;
  const int zsteps = three_d ? 4 : 0;
  std::array<double, kMaxTerms> b{};
  double sign_x = 0.0, sign_y = 0.0;
  for (int zi = 0; zi <= zsteps; ++zi) {
    const double Z = three_d ? -1.0 + 2.0 * zi / zsteps : 0.0;
    for (int yi = 0; yi <= steps; ++yi) {
      for (int xi = 0; xi <= steps; ++xi) {
        fill_basis(m.spec, -1.0 + 2.0 * xi / steps, -1.0 + 2.0 * yi / steps, Z, b.data());
        const double dx = 1.0 + dot(m.coeffs_x.data() + m.spec.numerator_terms(), b.data() + 1, nd);
        const double dy = 1.0 + dot(m.coeffs_y.data() + m.spec.numerator_terms(), b.data() + 1, nd);
        if (std::abs(dx) < 1e-6 || std::abs(dy) < 1e-6) return true;
        if (sign_x == 0.0) {
          sign_x = dx;
          sign_y = dy;
        } else if (sign_x * dx < 0.0 || sign_y * dy < 0.0) {
          return true;
        }
      }
    }
  }
  return false;
}

}  // namespace

FitResult fit(const ModelSpec& spec, const std::vector<ControlPoint>& cps,
              const FitOptions& options) {
  spec.validate();
  const int min_cps = min_cp_count(spec);
  if (static_cast<int>(cps.size()) < min_cps) {
    throw Error(Errc::insufficient_points, spec.name() + " needs at least " +
                                               std::to_string(min_cps) + " control points, got " +
                                               std::to_string(cps.size()));
  }
  const bool with_z = spec.input_dims() == 3;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const auto& c = cps[i];
    if (with_z && !c.ref_z) {
      throw Error(Errc::missing_dem,
                  spec.name() + " needs heights; control point " + std::to_string(i) + " has none");
    }
    if (!std::isfinite(c.ref_x) || !std::isfinite(c.ref_y) || !std::isfinite(c.sensed_x) ||
        !std::isfinite(c.sensed_y) || (with_z && !std::isfinite(*c.ref_z))) {
      throw Error(Errc::invalid_argument, "control point " + std::to_string(i) + " is not finite");
    }
  }

  FittedModel model;
  model.spec = spec;
  model.norm = options.normalize ? normalization_for(cps, with_z) : Normalization{};

  const auto n = static_cast<Eigen::Index>(cps.size());
  Problem prob{spec, Layout(spec), Eigen::MatrixXd(n, spec.numerator_terms()),
               Eigen::VectorXd(n), Eigen::VectorXd(n)};
  const Layout& L = prob.layout;
  std::array<double, kMaxTerms> b{};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = cps[static_cast<std::size_t>(i)];
    fill_basis(spec, model.norm.in[0].forward(c.ref_x), model.norm.in[1].forward(c.ref_y),
               with_z ? model.norm.in[2].forward(*c.ref_z) : 0.0, b.data());
    for (int k = 0; k < L.nb; ++k) prob.basis(i, k) = b[k];
    prob.obs_x(i) = model.norm.out[0].forward(c.sensed_x);
    prob.obs_y(i) = model.norm.out[1].forward(c.sensed_y);
  }

  // Linearised system: numerator - obs * (denominator - 1) = obs.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, L.cols);
  Eigen::VectorXd rhs(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A.block(2 * i, L.num_x, 1, L.nb) = prob.basis.row(i);
    A.block(2 * i + 1, L.num_y, 1, L.nb) = prob.basis.row(i);
    if (L.nd > 0) {
      A.block(2 * i, L.den_x, 1, L.nd) = -prob.obs_x(i) * prob.basis.row(i).tail(L.nd);
      A.block(2 * i + 1, L.den_y, 1, L.nd) = -prob.obs_y(i) * prob.basis.row(i).tail(L.nd);
    }
    rhs(2 * i) = prob.obs_x(i);
    rhs(2 * i + 1) = prob.obs_y(i);
  }
  Eigen::VectorXd theta = solve_checked(A, rhs, options.rank_tolerance, spec.name().c_str());

  FitResult result;
  Eigen::VectorXd r = prob.residuals(theta);
  double current = r.allFinite() ? rms(r) : std::numeric_limits<double>::infinity();

  if (L.nd > 0) {
    for (int it = 0; it < options.max_refinement_iterations; ++it) {
      Eigen::VectorXd nx, ny, dx, dy;
      prob.evaluate(theta, nx, ny, dx, dy);
      Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, L.cols);
      for (Eigen::Index i = 0; i < n; ++i) {
        J.block(2 * i, L.num_x, 1, L.nb) = prob.basis.row(i) / dx(i);
        J.block(2 * i + 1, L.num_y, 1, L.nb) = prob.basis.row(i) / dy(i);
        J.block(2 * i, L.den_x, 1, L.nd) =
            (-nx(i) / (dx(i) * dx(i))) * prob.basis.row(i).tail(L.nd);
        J.block(2 * i + 1, L.den_y, 1, L.nd) =
            (-ny(i) / (dy(i) * dy(i))) * prob.basis.row(i).tail(L.nd);
      }
      if (!J.allFinite()) break;
      Eigen::VectorXd step;
      try {
        step = solve_checked(J, -r, options.rank_tolerance, "refinement");
      } catch (const Error&) {
        break;
      }
      const Eigen::VectorXd candidate = theta + step;
      const Eigen::VectorXd rc = prob.residuals(candidate);
      const double next = rc.allFinite() ? rms(rc) : std::numeric_limits<double>::infinity();
      if (!(next < current)) break;
      const double gain = current - next;
      theta = candidate;
      r = rc;
      current = next;
      result.refinement_iterations = it + 1;
      if (gain < options.min_improvement) break;
    }
  }

  model.coeffs_x.assign(theta.data() + L.num_x, theta.data() + L.num_x + L.nb);
  model.coeffs_y.assign(theta.data() + L.num_y, theta.data() + L.num_y + L.nb);
  if (L.nd > 0) {
    model.coeffs_x.insert(model.coeffs_x.end(), theta.data() + L.den_x,
                          theta.data() + L.den_x + L.nd);
    model.coeffs_y.insert(model.coeffs_y.end(), theta.data() + L.den_y,
                          theta.data() + L.den_y + L.nd);
  }
  result.model = std::move(model);
  result.ill_conditioned = denominators_ill_conditioned(result.model);

  result.residuals.resize(cps.size());
  result.residuals_normalized.resize(cps.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const double rx = r(2 * static_cast<Eigen::Index>(i));
    const double ry = r(2 * static_cast<Eigen::Index>(i) + 1);
    result.residuals_normalized[i] = std::hypot(rx, ry);
    const auto p = result.model.apply(cps[i].ref_x, cps[i].ref_y, with_z ? cps[i].ref_z : std::nullopt);
    result.residuals[i] = p ? std::hypot(p->x - cps[i].sensed_x, p->y - cps[i].sensed_y)
                            : std::numeric_limits<double>::infinity();
    ss += result.residuals[i] * result.residuals[i];
  }
  result.rmse = std::sqrt(ss / static_cast<double>(cps.size()));
  return result;
}

std::optional<double> dem_height(const RasterGrid& dem, double x, double y) {
  const Point2 p = geo_to_pixel(dem.geotransform, x, y);
  constexpr double kEdge = 1e-9;
  if (!(p.x >= -kEdge && p.y >= -kEdge && p.x <= dem.width() - 1 + kEdge &&
        p.y <= dem.height() - 1 + kEdge)) {
    return std::nullopt;
  }
  const double v = sample_bilinear(dem, std::clamp(p.x, 0.0, dem.width() - 1.0),
                                   std::clamp(p.y, 0.0, dem.height() - 1.0));
  if (dem.is_nodata(v) || std::isnan(v)) return std::nullopt;
  return v;
}

std::vector<ControlPoint> attach_dem_heights(std::vector<ControlPoint> cps, const RasterGrid& dem) {
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const Point2 p = geo_to_pixel(dem.geotransform, cps[i].ref_x, cps[i].ref_y);
    constexpr double kEdge = 1e-9;
    if (!(p.x >= -kEdge && p.y >= -kEdge && p.x <= dem.width() - 1 + kEdge &&
          p.y <= dem.height() - 1 + kEdge)) {
      throw Error(Errc::dem_coverage, "control point " + std::to_string(i) + " lies outside the DEM");
    }
    const auto h = dem_height(dem, cps[i].ref_x, cps[i].ref_y);
    if (!h) throw Error(Errc::dem_coverage, "DEM has nodata at control point " + std::to_string(i));
    cps[i].ref_z = *h;
  }
  return cps;
}

}  // namespace sarreg
