#pragma once

// Relative volume A(p) = 2^n lim e^{-nt} Vol(dB_p(t)) by two routes (sphere
// areas extrapolated in t, and the boundary integral of e^{n b} for the
// Busemann limit b), A(E) for the model cores and collar sublevel sets, the
// explicit lower bounds away from the core, and report-style audits.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <nlohmann/json.hpp>

#include "ahgeo/compactification.hpp"
#include "ahgeo/geodesic.hpp"
#include "ahgeo/models.hpp"
#include "ahgeo/numerics.hpp"

namespace ahgeo {

struct RelVolEstimate {
  double value = 0.0;
  std::string method;  // extrapolation | boundary-integral | closed-form
  double error = 0.0;
  nlohmann::json diagnostics = nlohmann::json::object();

  nlohmann::json to_json() const {
    return {{"value", value}, {"method", method}, {"error", error}, {"diagnostics", diagnostics}};
  }
};

struct CompactSetDescriptor {
  enum class Kind { CorePoint, CoreCircle, CoreSphere, SublevelSet };
  Kind kind = Kind::CorePoint;
  double delta_prime = 0.0;  // SublevelSet only: E = {x >= delta'}

  static CompactSetDescriptor core_point() { return {Kind::CorePoint, 0.0}; }
  static CompactSetDescriptor core_circle() { return {Kind::CoreCircle, 0.0}; }
  static CompactSetDescriptor core_sphere() { return {Kind::CoreSphere, 0.0}; }
  static CompactSetDescriptor sublevel_set(double d) { return {Kind::SublevelSet, d}; }
};

// ---------------------------------------------------------------------------
// Route 1: extrapolation of sphere areas.

struct ExtrapolationOptions {
  SphereAreaOptions area;
  double monotone_tol = 1e-8;  // relative slack allowed in the Bishop-Gromov check
  double fit_tol = 1e-6;       // relative fit residual tolerated with a non-monotone grid
};

/// Fits 2^n e^{-nt} A(t) = a + b e^{-2t} by least squares on the grid and
/// returns a.
inline RelVolEstimate relvol_extrapolate(const ModelMetric& model, const ModelPoint& q,
                                         const std::vector<double>& t_grid, const ExtrapolationOptions& opt = {}) {
  validate(model, q);
  if (t_grid.size() < 3) throw DomainError("relvol_extrapolate: need at least 3 grid points");
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("relvol_extrapolate: grid must be increasing");
  }
  if (t_grid.front() <= 0.0) throw DomainError("relvol_extrapolate: grid must be positive");
  if (t_grid.back() < 10.0) throw DomainError("relvol_extrapolate: largest grid radius must be at least 10");

  const int n = model.n();
  const auto k = static_cast<Eigen::Index>(t_grid.size());
  Eigen::VectorXd y(k), e(k), ratio(k);
  Eigen::MatrixXd design(k, 2);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double t = t_grid[static_cast<std::size_t>(i)];
    const auto s = sphere_area(model, q, t, opt.area);
    const double w = std::pow(2.0, n) * std::exp(-n * t);
    y[i] = w * s.area;
    e[i] = w * s.err;
    ratio[i] = s.area / std::pow(std::sinh(t), n);
    design(i, 0) = 1.0;
    design(i, 1) = std::exp(-2.0 * t);
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd res = y - design * coef;
  // Bishop-Gromov: A(t) / sinh^n(t) is nonincreasing.
  bool monotone = true;
  for (Eigen::Index i = 1; i < k; ++i) {
    const double slack = opt.monotone_tol * ratio[i - 1] + (e[i] + e[i - 1]) / y[i] * ratio[i];
    if (ratio[i] > ratio[i - 1] + slack) monotone = false;
  }
  const double max_res = res.cwiseAbs().maxCoeff();
  nlohmann::json diag;
  diag["grid"] = t_grid;
  diag["samples"] = std::vector<double>(y.data(), y.data() + k);
  diag["tail_exponent"] = 2.0;
  diag["tail_coefficient"] = coef[1];
  diag["max_residual"] = max_res;
  diag["monotone"] = monotone;
  if (!monotone && max_res > opt.fit_tol * std::abs(coef[0])) {
    throw NumericError("relvol_extrapolate: samples are not monotone and the fit does not hold", diag.dump());
  }
  RelVolEstimate r;
  r.value = coef[0];
  r.method = "extrapolation";
  r.error = max_res + e.maxCoeff();
  r.diagnostics = diag;
  if (!(r.value > 0.0)) throw NumericError("relvol_extrapolate: non-positive limit", diag.dump());
  return r;
}

// ---------------------------------------------------------------------------
// Route 2: boundary integral of e^{n b}.

struct BoundaryQuadrature {
  double rel_tol = 1e-9;
  unsigned max_depth = 12;
  BusemannOptions busemann;
};

namespace detail {

inline std::vector<double> tilted(const std::vector<double>& w, const std::vector<double>& u, double y) {
  std::vector<double> v(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) v[i] = std::cos(y) * w[i] + std::sin(y) * u[i];
  return v;
}

// Limits of the geodesic leaving a core point of AdS with a = 0 and
// Clairaut momentum beta = r_m cos(alpha) < r_m, in the variable r = r_m + u^2:
// total sphere angle psi, its beta-derivative, and b = lim (t - s).
struct AdsRayLimit {
  double psi = 0.0;
  double dpsi_dbeta = 0.0;
  double b = 0.0;
  double err = 0.0;
};

inline AdsRayLimit ads_core_ray_limit(const AdsSchwarzschild& a, double beta, double rel_tol) {
  const double rm = a.horizon;
  const double gap = (rm - beta) * (rm + beta);
  auto parts = [rm, beta, gap](double u) {
    const double w2 = u * u;
    const double r = rm + w2;
    const double p = r * r + rm * r + rm * rm + 1.0;
    const double jac = 2.0 * std::sqrt(r / p);  // dt/du
    const double d = gap + w2 * (2.0 * rm + w2);  // r^2 - beta^2
    const double sd = std::sqrt(d);
    return std::array<double, 3>{jac * beta / (r * sd), jac * r / (d * sd), -jac * beta * beta / (sd * (r + sd))};
  };
  const double inf = std::numeric_limits<double>::infinity();
  AdsRayLimit out;
  const auto i0 = integrate([&](double u) { return parts(u)[0]; }, 0.0, inf, rel_tol);
  const auto i1 = integrate([&](double u) { return parts(u)[1]; }, 0.0, inf, rel_tol);
  const auto i2 = integrate([&](double u) { return parts(u)[2]; }, 0.0, inf, rel_tol);
  out.psi = i0.value;
  out.dpsi_dbeta = i1.value;
  out.b = i2.value;
  out.err = i2.error;
  return out;
}

// A at a point of the AdS core sphere. Minimizing geodesics to the boundary
// leave with a = 0; b depends only on the boundary sphere angle psi in [0, pi],
// reached by the ray of momentum beta(psi). With g-hat^E = c^2 (lambda^2 dphi^2
// + g_{S^2}),
//   A = 8 c^3 lambda 2 pi 2 pi int_0^pi e^{3 b} sin psi dpsi,
// integrated in alpha with dpsi = -(dpsi/dbeta) r_m sin(alpha) dalpha.
inline RelVolEstimate ads_core_relvol(const AdsSchwarzschild& a, double rel_tol) {
  const double rm = a.horizon;
  const double tol = std::max(rel_tol * 1e-2, 1e-13);
  auto limit = [&](double alpha) { return ads_core_ray_limit(a, rm * std::cos(alpha), tol); };
  double lo = 0.5;
  while (limit(lo).psi < pi) {
    lo *= 0.5;
    if (lo < 1e-12) throw NumericError("ads_core_relvol: no ray reaches the antipode");
  }
  const double alpha_pi = bracketed_root([&](double al) { return limit(al).psi - pi; }, lo, 0.5 * pi, 1e-14);
  double worst_b_err = 0.0;
  auto integrand = [&](double alpha) {
    const auto l = limit(alpha);
    worst_b_err = std::max(worst_b_err, l.err);
    return std::exp(3.0 * l.b) * std::sin(l.psi) * l.dpsi_dbeta * rm * std::sin(alpha);
  };
  const auto q = integrate(integrand, alpha_pi, 0.5 * pi, rel_tol, 12);
  const double c = a.scale;
  const double factor = 8.0 * c * c * c * a.lambda * 4.0 * pi * pi;
  RelVolEstimate r;
  r.value = factor * q.value;
  r.method = "boundary-integral";
  r.error = factor * q.error + 3.0 * worst_b_err * r.value;
  r.diagnostics = {{"route", "clairaut"}, {"alpha_antipode", alpha_pi}, {"asymptotic_scale", c}};
  return r;
}

}  // namespace detail

/// A(q) as the boundary integral of e^{n b} against the boundary measure of
/// the core compactification, 2^n normalized. Busemann values come from
/// busemann_with_error; at AdS core points the rays are integrated in closed
/// form instead, and AdS points off the core use a 16 x 16 Gauss-Legendre
/// product rule checked against 10 x 10.
inline RelVolEstimate relvol_boundary(const ModelMetric& model, const ModelPoint& q,
                                      const BoundaryQuadrature& opt = {}) {
  validate(model, q);
  const int n = model.n();
  double worst_b_err = 0.0;
  auto bvalue = [&](const BoundaryRay& ray) {
    const auto b = busemann_with_error(model, ray, q, opt.busemann);
    worst_b_err = std::max(worst_b_err, b.err);
    return b.value;
  };
  const auto u = detail::orthogonal_unit(q.direction);
  RelVolEstimate r;
  r.method = "boundary-integral";

  if (model.is_hyperbolic()) {
    // g-hat^E = g_S / 4 for E = {o}: the 2^n cancels against the volume.
    auto f = [&](double y) {
      const BoundaryRay ray{detail::tilted(q.direction, u, y), 0.0};
      return std::pow(std::sin(y), n - 1) * std::exp(n * bvalue(ray));
    };
    const auto res = integrate(f, 0.0, pi, opt.rel_tol, opt.max_depth);
    const double w = unit_sphere_volume(n - 1);
    r.value = w * res.value;
    r.error = w * res.error;
  } else if (model.is_fermi()) {
    // g-hat^E = (g_{S^{n-1}} + g_{S^1(lambda)}) / 4.
    const double lam = model.as_fermi().lambda;
    double inner_rel = 0.0;
    auto outer = [&](double y) {
      const auto dir = detail::tilted(q.direction, u, y);
      auto inner = [&](double th) { return std::exp(n * bvalue(BoundaryRay{dir, q.angle + th})); };
      const auto in = integrate(inner, 0.0, pi, opt.rel_tol, opt.max_depth);
      if (in.value > 0) inner_rel = std::max(inner_rel, in.error / in.value);
      return std::pow(std::sin(y), n - 2) * 2.0 * lam * in.value;
    };
    const auto res = integrate(outer, 0.0, pi, opt.rel_tol, opt.max_depth);
    const double w = unit_sphere_volume(n - 2);
    r.value = w * res.value;
    r.error = w * res.error + inner_rel * r.value;
  } else {
    const auto& a = model.as_ads();
    if (q.t == 0.0) {
      r = detail::ads_core_relvol(a, opt.rel_tol);
      return r;
    }
    const double c = a.scale;
    const double factor = 8.0 * c * c * c * a.lambda * 2.0 * 2.0 * pi;
    auto f = [&](double dphi, double y) {
      const BoundaryRay ray{detail::tilted(q.direction, u, y), q.angle + dphi};
      return std::sin(y) * std::exp(3.0 * bvalue(ray));
    };
    auto product = [&](auto rule) {
      using Rule = decltype(rule);
      return Rule::integrate([&](double x) { return Rule::integrate([&](double y) { return f(x, y); }, 0.0, pi); },
                             0.0, pi);
    };
    const double fine = product(boost::math::quadrature::gauss<double, 16>{});
    const double coarse = product(boost::math::quadrature::gauss<double, 10>{});
    r.value = factor * fine;
    r.error = factor * std::abs(fine - coarse);
    r.diagnostics["route"] = "gauss-legendre 16x16";
  }
  r.error += n * worst_b_err * r.value;
  r.diagnostics["busemann_horizon"] = opt.busemann.horizon;
  r.diagnostics["max_busemann_error"] = worst_b_err;
  if (!(r.value > 0.0)) throw NumericError("relvol_boundary: non-positive value", r.diagnostics.dump());
  return r;
}

// ---------------------------------------------------------------------------
// Compact sets.

/// A(E) = 2^n Vol(dX, g-hat^E). For the cores E is the zero set of t, so
/// g-hat^E is the boundary metric of x = e^{-t}; for E = {x >= delta'} it is
/// g-hat / delta'^2.
inline RelVolEstimate relvol_compact(const ModelMetric& model, const CompactSetDescriptor& e) {
  using K = CompactSetDescriptor::Kind;
  const int n = model.n();
  RelVolEstimate r;
  r.method = "closed-form";
  switch (e.kind) {
    case K::CorePoint:
      if (!model.is_hyperbolic()) throw DomainError("relvol_compact: CorePoint requires the hyperbolic model");
      r.value = unit_sphere_volume(n);
      break;
    case K::CoreCircle:
      if (!model.is_fermi()) throw DomainError("relvol_compact: CoreCircle requires the Fermi quotient");
      r.value = unit_sphere_volume(n - 1) * 2.0 * pi * model.as_fermi().lambda;
      break;
    case K::CoreSphere: {
      if (!model.is_ads()) throw DomainError("relvol_compact: CoreSphere requires AdS-Schwarzschild");
      const auto& a = model.as_ads();
      r.value = 8.0 * std::pow(a.scale, 3) * 2.0 * pi * a.lambda * unit_sphere_volume(2);
      break;
    }
    case K::SublevelSet: {
      const auto c = collar_data(model);
      if (!(e.delta_prime > 0.0) || e.delta_prime > c.delta) {
        throw DomainError("relvol_compact: delta' must lie in (0, delta]");
      }
      r.value = std::pow(2.0 / e.delta_prime, n) * c.boundary_volume;
      r.diagnostics["delta"] = c.delta;
      break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Closed forms and lower bounds.

/// A at a core point of the Fermi quotient: 2 omega_{n-1} int_0^{lambda pi} cosh^{-n}.
inline double center_relvol_formula(int n, double lambda) {
  if (n < 2) throw DomainError("center_relvol_formula: n must be at least 2");
  if (!(lambda > 0.0)) throw DomainError("center_relvol_formula: lambda must be positive");
  auto f = [n](double y) { return std::pow(std::cosh(y), -n); };
  return 2.0 * unit_sphere_volume(n - 1) * integrate(f, 0.0, lambda * pi, 1e-14).value;
}

/// Lower bound for A(t0, ., .) on the Fermi quotient from the broken path
/// radial - sphere - circle.
inline double noncenter_lower_bound(int n, double lambda, double t0) {
  if (n < 2) throw DomainError("noncenter_lower_bound: n must be at least 2");
  if (!(lambda > 0.0) || !(t0 >= 0.0)) throw DomainError("noncenter_lower_bound: need lambda > 0, t0 >= 0");
  const double ch = std::cosh(t0), sh = std::sinh(t0);
  const double circle = -std::expm1(-n * lambda * pi * ch) / (n * ch);
  if (n == 2) {
    const double sphere = t0 == 0.0 ? pi : -std::expm1(-2.0 * pi * sh) / (2.0 * sh);
    return 4.0 * std::exp(2.0 * t0) * circle * sphere;
  }
  if (n == 3) {
    return 4.0 * pi * std::exp(3.0 * t0) * circle * (1.0 + std::exp(-3.0 * pi * sh)) / (1.0 + 9.0 * sh * sh);
  }
  // u = n sinh(t0) y; for large t0 the mass sits at y ~ 1 / (n sinh t0).
  const double a = n * sh;
  double sphere;
  if (a < 1.0) {
    auto f = [n, a](double y) { return std::pow(std::sin(y), n - 2) * std::exp(-a * y); };
    sphere = integrate(f, 0.0, pi, 1e-13).value;
  } else {
    auto f = [n, a](double u) { return std::pow(std::sin(u / a), n - 2) * std::exp(-u); };
    sphere = integrate(f, 0.0, std::min(a * pi, 800.0), 1e-13).value / a;
  }
  return 2.0 * unit_sphere_volume(n - 2) * std::exp(n * t0) * circle * sphere;
}

/// lim_{t0 -> inf} of noncenter_lower_bound: omega_{n-2} (n-2)! 2^{n+1} / n^n.
inline double noncenter_liminf(int n) {
  if (n < 2) throw DomainError("noncenter_liminf: n must be at least 2");
  return unit_sphere_volume(n - 2) * std::tgamma(n - 1.0) * std::pow(2.0, n + 1) / std::pow(n, n);
}

/// Model dispatch: the Fermi bound above, or for AdS-Schwarzschild the same
/// broken-path bound with sphere radius r(t0) and circle radius lambda sqrt V(t0):
///   8 c^3 lambda e^{3 t0} 2 (1 - e^{-3 pi F0}) / (3 F0) 2 pi (1 + e^{-3 pi r0}) / (1 + 9 r0^2).
inline double noncenter_lower_bound(const ModelMetric& model, double t0) {
  if (model.is_fermi()) return noncenter_lower_bound(model.n(), model.as_fermi().lambda, t0);
  if (!model.is_ads()) throw DomainError("noncenter_lower_bound: not defined for the hyperbolic model");
  if (!(t0 > 0.0)) throw DomainError("noncenter_lower_bound: AdS bound needs t0 > 0");
  const auto& a = model.as_ads();
  const auto rv = a.table->eval(t0);
  const double r0 = rv[0];
  const double f0 = a.lambda * rv[1];
  const double c = a.scale;
  return 8.0 * c * c * c * a.lambda * std::exp(3.0 * t0) * 2.0 * (-std::expm1(-3.0 * pi * f0)) / (3.0 * f0) *
         2.0 * pi * (1.0 + std::exp(-3.0 * pi * r0)) / (1.0 + 9.0 * r0 * r0);
}

struct NoncenterRow {
  double t0 = 0.0, lower_bound = 0.0, relvol = 0.0;
  double ratio() const { return lower_bound / relvol; }
};

inline void write_noncenter_csv(std::ostream& os, const std::vector<NoncenterRow>& rows) {
  const auto prec = os.precision(12);
  os << "t0,lower_bound,relvol,ratio\n";
  for (const auto& r : rows) os << r.t0 << ',' << r.lower_bound << ',' << r.relvol << ',' << r.ratio() << '\n';
  os.precision(prec);
}

// ---------------------------------------------------------------------------
// Audits.

struct AuditEntry {
  std::string id;
  double lhs = 0.0, rhs = 0.0, margin = 0.0;
  bool pass = false;
  std::string note;

  nlohmann::json to_json() const {
    nlohmann::json j{{"pair", id}, {"lhs", lhs}, {"rhs", rhs}, {"margin", margin}, {"pass", pass}};
    if (!note.empty()) j["note"] = note;
    return j;
  }
};

struct AuditReport {
  std::string name;
  std::vector<AuditEntry> entries;
  double max_ratio = 0.0;  // lipschitz: largest |d ln A| / d seen

  bool pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const AuditEntry& e) { return e.pass; });
  }
  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries) arr.push_back(e.to_json());
    return {{"audit", name}, {"pass", pass()}, {"max_ratio", max_ratio}, {"entries", arr}};
  }
};

using RelVolFunction = std::function<RelVolEstimate(const ModelPoint&)>;

inline RelVolFunction boundary_route(const ModelMetric& model, BoundaryQuadrature opt = {}) {
  return [model, opt](const ModelPoint& p) { return relvol_boundary(model, p, opt); };
}

/// |ln A(p) - ln A(q)| / d(p, q) <= n with tolerance from the error estimates
/// of both values. Coincident pairs are skipped with a note.
inline AuditReport lipschitz_audit(const ModelMetric& model,
                                   const std::vector<std::pair<ModelPoint, ModelPoint>>& pairs,
                                   RelVolFunction relvol = {}) {
  if (pairs.empty()) throw DomainError("lipschitz_audit: need at least one pair");
  if (!relvol) relvol = boundary_route(model);
  AuditReport rep;
  rep.name = "lipschitz";
  const double n = model.n();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [p, q] = pairs[i];
    AuditEntry e;
    e.id = std::to_string(i);
    e.rhs = n;
    const double d = distance(model, p, q);
    if (d < 1e-12) {
      e.pass = true;
      e.note = "skipped: coincident points";
      rep.entries.push_back(e);
      continue;
    }
    const auto ap = relvol(p), aq = relvol(q);
    e.lhs = std::abs(std::log(ap.value) - std::log(aq.value)) / d;
    const double tol = (ap.error / ap.value + aq.error / aq.value) / d;
    e.margin = e.rhs + tol - e.lhs;
    e.pass = e.margin >= 0.0;
    rep.max_ratio = std::max(rep.max_ratio, e.lhs);
    rep.entries.push_back(e);
  }
  return rep;
}

/// A(q) <= omega_n at every sample. On the Fermi quotient the inequality is
/// required to be strict beyond the tolerance; equality within tolerance is
/// noted, and only expected for the hyperbolic model.
inline AuditReport rigidity_audit(const ModelMetric& model, const std::vector<ModelPoint>& points,
                                  RelVolFunction relvol = {}) {
  if (!relvol) relvol = boundary_route(model);
  AuditReport rep;
  rep.name = "rigidity";
  const double wn = unit_sphere_volume(model.n());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto a = relvol(points[i]);
    AuditEntry e;
    e.id = std::to_string(i);
    e.lhs = a.value;
    e.rhs = wn;
    e.margin = wn + a.error - a.value;
    e.pass = e.margin >= 0.0;
    const bool equal = std::abs(a.value - wn) <= a.error + 1e-12 * wn;
    if (equal) e.note = "equality";
    if (model.is_fermi() && e.lhs >= wn - a.error) {
      e.pass = false;
      e.note = "no strict gap";
    }
    if (equal && !model.is_hyperbolic()) e.pass = false;
    rep.entries.push_back(e);
  }
  return rep;
}

}  // namespace ahgeo
