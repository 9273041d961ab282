#pragma once

// Distances, geodesic spheres, balls and Busemann functions on the models.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "ahgeo/models.hpp"
#include "ahgeo/shooting.hpp"

namespace ahgeo {

// ---------------------------------------------------------------------------
// Distance

namespace detail {

// sinh^2(d/2) forms of the hyperbolic laws of cosines; they keep full
// relative accuracy for nearby points.
inline double hyperbolic_distance(double t1, double t2, double angle) {
  const double a = std::sinh(0.5 * (t1 - t2));
  const double b = std::sin(0.5 * angle);
  const double s2 = a * a + std::sinh(t1) * std::sinh(t2) * b * b;
  return 2.0 * std::asinh(std::sqrt(s2));
}

// cosh d = cosh t1 cosh t2 cosh dz - sinh t1 sinh t2 cos(angle). The right
// side grows with |dz|, so among the deck lifts dz + 2 pi lambda k the one
// with |dz| <= pi lambda is the minimizer and no other winding is needed.
inline double fermi_distance(double t1, double t2, double angle, double dz) {
  const double a = std::sinh(0.5 * (t1 - t2));
  const double b = std::sin(0.5 * angle);
  const double c = std::sinh(0.5 * dz);
  const double s2 = a * a + std::sinh(t1) * std::sinh(t2) * b * b + std::cosh(t1) * std::cosh(t2) * c * c;
  return 2.0 * std::asinh(std::sqrt(s2));
}

}  // namespace detail

struct DistanceOptions {
  ShootingOptions shooting;
};

/// Distance of two points given in reduced form (see ReducedTarget) on the
/// AdS model, by geodesic shooting.
inline double ads_reduced_distance(const ModelMetric& model, ReducedTarget tg, const DistanceOptions& opt = {}) {
  const auto& a = model.as_ads();
  const double rm = a.horizon;
  if (tg.t1 == 0.0 && tg.t2 == 0.0) {
    // Both on the core 2-sphere. g >= r^2 g_{S^2} >= r_m^2 g_{S^2}, so the
    // great circle on the core is minimizing.
    return rm * tg.alpha;
  }
  // Shoot from the inner point: the endpoint then depends smoothly on the
  // momenta, while from far out the initial angle is exponentially sensitive.
  if (tg.t1 > tg.t2) std::swap(tg.t1, tg.t2);
  const auto w = reduced_warp(model);
  // Radially in to the core, along it, and out again.
  const double bound = (tg.t1 + tg.t2 + rm * tg.alpha) * 1.02 + 1e-3;
  if (tg.t1 == 0.0) return shoot_from_axis(w, tg, bound, opt.shooting).length;
  if (tg.t1 == tg.t2 && tg.dphi == 0.0 && tg.alpha == 0.0) return 0.0;
  return shoot_general(w, tg, bound, opt.shooting).length;
}

/// Geodesic distance. Hyperbolic and FermiQuotient use the laws of cosines;
/// AdS solves the two-point problem by shooting (see shooting.hpp).
inline double distance(const ModelMetric& model, const ModelPoint& p, const ModelPoint& q,
                       const DistanceOptions& opt = {}) {
  validate(model, p);
  validate(model, q);
  const double angle = sphere_angle(p.direction, q.direction);
  if (model.is_hyperbolic()) return detail::hyperbolic_distance(p.t, q.t, angle);
  if (model.is_fermi()) {
    const double dz = model.as_fermi().lambda * angle_difference(q.angle, p.angle);
    return detail::fermi_distance(p.t, q.t, angle, dz);
  }
  if (p.t == q.t && angle == 0.0 && (p.t == 0.0 || angle_difference(q.angle, p.angle) == 0.0)) return 0.0;
  return ads_reduced_distance(model, {p.t, q.t, angle_difference(q.angle, p.angle), angle}, opt);
}

/// Distance by geodesic shooting for any model. This is the only route on
/// AdS; on the hyperbolic models it serves to validate the closed forms.
inline double distance_by_shooting(const ModelMetric& model, const ModelPoint& p, const ModelPoint& q,
                                   const DistanceOptions& opt = {}) {
  validate(model, p);
  validate(model, q);
  if (model.is_ads()) {
    if (p.t == q.t && sphere_angle(p.direction, q.direction) == 0.0 && angle_difference(q.angle, p.angle) == 0.0) {
      return 0.0;
    }
    return ads_reduced_distance(model, {p.t, q.t, angle_difference(q.angle, p.angle),
                                        sphere_angle(p.direction, q.direction)}, opt);
  }
  // On the hyperbolic models G vanishes on the pole/core, where the sphere
  // direction of the point carries no information.
  ReducedTarget tg{p.t, q.t, 0.0, sphere_angle(p.direction, q.direction)};
  if (model.is_fermi()) tg.dphi = angle_difference(q.angle, p.angle);
  if (tg.t2 == 0.0) std::swap(tg.t1, tg.t2);
  if (tg.t1 == 0.0) tg.alpha = 0.0;
  if (tg.t1 == tg.t2 && tg.alpha == 0.0 && tg.dphi == 0.0) return 0.0;
  const auto w = reduced_warp(model);
  double bound = tg.t1 + tg.t2;
  if (model.is_fermi()) bound += model.as_fermi().lambda * std::abs(tg.dphi);
  return shoot_general(w, tg, bound * 1.02 + 1e-3, opt.shooting).length;
}

// ---------------------------------------------------------------------------
// Geodesic spheres

struct AreaSample {
  double t = 0.0;
  double area = 0.0;
  std::string method;  // closed-form | jacobi-quadrature | monte-carlo
  double err = 0.0;
};

inline void write_area_csv(std::ostream& os, const std::vector<AreaSample>& samples) {
  os << "t,area,err,method\n";
  os.precision(12);
  for (const auto& s : samples) os << s.t << ',' << s.area << ',' << s.err << ',' << s.method << '\n';
}

struct SphereAreaOptions {
  double rel_tol = 1e-10;
  bool jacobi_on_hyperbolic = false;  // take the ODE route even where a closed form exists
  int ads_nodes = 24;                 // per angle, AdS points off the core (4..32, see gauss_legendre_rule)
  double min_tol = 1e-7;              // minimizing check: t - d <= min_tol * max(1, t)
  DistanceOptions distance;
};

namespace detail {

// Exponential map of the Fermi quotient through the hyperboloid model of its
// universal cover. q sits at z = 0; the direction is
// cos(chi) e_z + sin(chi) (cos(eta) e_t + sin(eta) e_u) with u orthogonal to
// q's sphere direction. Returns the endpoint with the unwrapped z offset.
struct FermiEndpoint {
  ModelPoint point;
  double dz = 0.0;
};

inline FermiEndpoint fermi_exp(const ModelMetric& model, const ModelPoint& q, const std::vector<double>& u,
                               double chi, double eta, double s) {
  const double lam = model.as_fermi().lambda;
  const std::size_t n = q.direction.size();
  const double ch0 = std::cosh(q.t), sh0 = std::sinh(q.t);
  const double cs = std::cosh(s), ss = std::sinh(s);
  const double vz = std::cos(chi), vt = std::sin(chi) * std::cos(eta), vu = std::sin(chi) * std::sin(eta);
  // X = cosh s X0 + sinh s V with X0 = (cosh t0, 0, sinh t0 w0),
  // e_z = (0, 1, 0), e_t = (sinh t0, 0, cosh t0 w0), e_u = (0, 0, u).
  const double x1 = ss * vz;
  std::vector<double> y(n);
  double y2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = (cs * sh0 + ss * vt * ch0) * q.direction[i] + ss * vu * u[i];
    y2 += y[i] * y[i];
  }
  FermiEndpoint e;
  const double ny = std::sqrt(y2);
  e.point.t = std::asinh(ny);
  if (ny > 0) {
    for (auto& c : y) c /= ny;
    // Renormalize to kill rounding before validation.
    double nn = 0.0;
    for (double c : y) nn += c * c;
    nn = std::sqrt(nn);
    for (auto& c : y) c /= nn;
    e.point.direction = y;
  } else {
    e.point.direction = q.direction;
  }
  e.dz = std::asinh(x1 / std::sqrt(1.0 + y2));
  e.point.angle = wrap_angle(q.angle + e.dz / lam);
  return e;
}

inline std::vector<double> orthogonal_unit(const std::vector<double>& w) {
  std::vector<double> u(w.size(), 0.0);
  std::size_t k = 0;
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (std::abs(w[i]) < std::abs(w[k])) k = i;
  }
  u[k] = 1.0;
  const double d = dot(u, w);
  double nn = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    u[i] -= d * w[i];
    nn += u[i] * u[i];
  }
  for (auto& c : u) c /= std::sqrt(nn);
  return u;
}

inline bool still_minimizing(double s, double d, double tol) { return s - d <= tol * std::max(1.0, s); }

// Measure of directions at q whose geodesic still minimizes at length s.
// In the hyperboloid model of the cover, exp_q(s v) is closer to the lift q_k
// (z shifted by 2 pi lambda k) than to q exactly when
//   <v, q_k> > coth(s) (cosh d(q, q_k) - 1),
// a spherical cap of directions. With v = cos(chi) e_z + sin(chi)(cos(eta) e_t
// + sin(eta) e_u) each cap cuts an explicit chi-interval for fixed eta; caps
// of k < 0 are the mirror images chi -> pi - chi. The eta-integral is adaptive.
inline QuadResult fermi_minimizing_measure(const ModelMetric& model, const ModelPoint& q, double s,
                                           const SphereAreaOptions& opt) {
  const int n = model.n();
  const double lam = model.as_fermi().lambda;
  const double ch0 = std::cosh(q.t), sh0 = std::sinh(q.t);
  const double coth = 1.0 / std::tanh(s);
  auto weight = [n](double a, double b) {
    return gauss_legendre<30>([n](double x) { return std::pow(std::sin(x), n - 1); }, a, b);
  };
  const double full = weight(0.0, pi);
  auto inner = [&](double eta) {
    std::vector<std::pair<double, double>> cut;
    for (int k = 1;; ++k) {
      const double z = 2.0 * pi * lam * k;
      const double a = ch0 * std::sinh(z);
      const double b = std::cos(eta) * sh0 * ch0 * (1.0 - std::cosh(z));
      const double c = coth * ch0 * ch0 * (std::cosh(z) - 1.0);
      const double r = std::hypot(a, b);
      // c / r grows with k, so the first empty cap ends the search.
      if (c >= r) break;
      const double phi = std::atan2(b, a), half = std::acos(c / r);
      const double lo = std::max(0.0, phi - half), hi = std::min(pi, phi + half);
      if (hi > lo) {
        cut.emplace_back(lo, hi);
        cut.emplace_back(pi - hi, pi - lo);
      }
      if (k > 100000) throw NumericError("fermi_minimizing_measure: too many lifts");
    }
    std::sort(cut.begin(), cut.end());
    double removed = 0.0, end = 0.0;
    for (const auto& [lo, hi] : cut) {
      const double from = std::max(lo, end);
      if (hi > from) {
        removed += weight(from, hi);
        end = hi;
      }
    }
    return full - removed;
  };
  // Split the eta-range where a cap appears (c = r): the chi-interval opens
  // like a square root there.
  std::vector<double> breaks{0.0, pi};
  if (sh0 > 0.0) {
    for (int k = 1; k < 100000; ++k) {
      const double ct2 = 1.0 / std::pow(std::tanh(pi * lam * k), 2);
      const double c2 = (coth * coth * ch0 * ch0 - ct2) / (sh0 * sh0);
      if (c2 > 1.0) break;
      if (c2 > 0.0) {
        breaks.push_back(std::acos(std::sqrt(c2)));
        breaks.push_back(pi - std::acos(std::sqrt(c2)));
      }
    }
  }
  std::sort(breaks.begin(), breaks.end());
  const double outer_weight = unit_sphere_volume(n - 2);
  auto integrand = [&](double eta) { return std::pow(std::sin(eta), n - 2) * inner(eta); };
  QuadResult r;
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    if (breaks[i] <= breaks[i - 1]) continue;
    const auto piece = integrate(integrand, breaks[i - 1], breaks[i], opt.rel_tol, 18);
    r.value += piece.value;
    r.error += piece.error;
  }
  r.value *= outer_weight;
  r.error *= outer_weight;
  return r;
}

// Geodesics from a point on the AdS core sphere run in the totally geodesic
// surface dt^2 + r(t)^2 dpsi^2 (a half-plane of the axis times a great
// circle). For initial angle alpha above the core, with b = r_m cos(alpha):
//   t'' = b^2 r'/r^3,  psi' = b/r^2,  j'' = (r''/r) j  (j(0)=0, j'(0)=1).
struct CoreRay {
  double t = 0.0, psi = 0.0, j = 0.0;
};

inline CoreRay ads_core_ray(const AdsSchwarzschild& a, double alpha, double s, double tol = 1e-13) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 5>;  // t, t', psi, j, j'
  const double b = a.horizon * std::cos(alpha);
  const auto* table = a.table.get();
  auto rhs = [b, table](const State& x, State& d, double) {
    const auto [r, dr, ddr] = table->eval(x[0]);
    d[0] = x[1];
    d[1] = b * b * dr / (r * r * r);
    d[2] = b / (r * r);
    d[3] = x[4];
    d[4] = ddr / r * x[3];
  };
  State x{0.0, std::sin(alpha), 0.0, 0.0, 1.0};
  if (s > 0) {
    auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
    odeint::integrate_adaptive(stepper, rhs, x, 0.0, s, std::min(0.05, s));
  }
  return {x[0], x[2], x[3]};
}

// Sphere area about a core point: geodesic sphere element j * (r sin psi) * F
// against d(alpha) d(eta) d(phi0), F = lambda sqrt(V). A geodesic stops
// minimizing when psi reaches pi, where it meets its mirror image under the
// rotation about the core point's axis; psi decreases with alpha.
inline QuadResult ads_core_sphere_area(const AdsSchwarzschild& a, double s, double rel_tol) {
  double alpha_c = 0.0;
  if (s > pi * a.horizon) {
    auto f = [&](double al) { return ads_core_ray(a, al, s).psi - pi; };
    if (f(0.5 * pi) < 0.0) alpha_c = bracketed_root(f, 0.0, 0.5 * pi, 1e-13);
    else alpha_c = 0.5 * pi;
  }
  if (alpha_c >= 0.5 * pi) return {0.0, 0.0};
  auto integrand = [&](double al) {
    const auto ray = ads_core_ray(a, al, s);
    const auto rv = a.table->eval(ray.t);
    return ray.j * rv[0] * std::abs(std::sin(ray.psi)) * a.lambda * rv[1];
  };
  auto res = integrate(integrand, alpha_c, 0.5 * pi, rel_tol, 12);
  res.value *= 4.0 * pi * pi;
  res.error *= 4.0 * pi * pi;
  return res;
}

}  // namespace detail

inline AreaSample sphere_area(const ModelMetric& model, const ModelPoint& q, double t,
                              const SphereAreaOptions& opt = {});

namespace detail {

// AdS sphere about a point off the core. Directions
//   cos(beta) e_t + sin(beta) cos(gamma) e_phi + sin(beta) sin(gamma) e_psi(eta)
// with beta, gamma in [0, pi] and eta the rotation about q's sphere direction.
// The eta-variation is a Killing field of length G |sin psi|; the beta- and
// gamma-variations are taken by central differences of the reduced endpoint.
inline AreaSample ads_offcore_sphere_area(const ModelMetric& model, const ModelPoint& q, double s,
                                          const SphereAreaOptions& opt) {
  const auto w = reduced_warp(model);
  auto element = [&](double beta, double gamma, bool check) {
    const double h = 1e-6;
    auto end = [&](double b, double g) {
      return flow(w, start_from_angles(w, q.t, b, g), s);
    };
    const auto e = end(beta, gamma);
    if (check) {
      const auto u = unfold(w, e);
      const double alpha = std::acos(std::cos(u.psi));
      const double d = ads_reduced_distance(model, {q.t, u.t, angle_difference(u.phi, 0.0), alpha}, opt.distance);
      if (!still_minimizing(s, d, opt.min_tol)) return 0.0;
    }
    const auto v = w.eval(e.t);
    auto vec = [&](const ReducedState& a, const ReducedState& b) {
      return std::array<double, 3>{(a.t - b.t) / (2 * h), v.f * (a.phi - b.phi) / (2 * h),
                                   v.g * (a.psi - b.psi) / (2 * h)};
    };
    const auto jb = vec(end(beta + h, gamma), end(beta - h, gamma));
    const auto jg = vec(end(beta, gamma + h), end(beta, gamma - h));
    const double bb = jb[0] * jb[0] + jb[1] * jb[1] + jb[2] * jb[2];
    const double gg = jg[0] * jg[0] + jg[1] * jg[1] + jg[2] * jg[2];
    const double bg = jb[0] * jg[0] + jb[1] * jg[1] + jb[2] * jg[2];
    return std::sqrt(std::max(0.0, bb * gg - bg * bg)) * std::abs(v.g * std::sin(e.psi));
  };
  auto rule = [&](int nodes) {
    const auto [x, wt] = gauss_legendre_rule(nodes);
    double sum = 0.0;
    for (int i = 0; i < nodes; ++i) {
      for (int j = 0; j < nodes; ++j) {
        const double beta = 0.5 * pi * (x[i] + 1.0), gamma = 0.5 * pi * (x[j] + 1.0);
        sum += wt[i] * wt[j] * element(beta, gamma, true);
      }
    }
    return 2.0 * pi * sum * 0.25 * pi * pi;
  };
  const double fine = rule(opt.ads_nodes);
  // Error from the next lower supported order.
  int lower = 4;
  for (int k : {4, 6, 8, 10, 12, 16, 20, 24}) {
    if (k < opt.ads_nodes) lower = k;
  }
  const double coarse = rule(lower);
  return {s, fine, "jacobi-quadrature", std::abs(fine - coarse)};
}

}  // namespace detail

/// Area of the geodesic sphere of radius t about q.
inline AreaSample sphere_area(const ModelMetric& model, const ModelPoint& q, double t,
                              const SphereAreaOptions& opt) {
  validate(model, q);
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("sphere_area: radius must be positive");
  const int n = model.n();
  if (model.is_hyperbolic()) {
    if (!opt.jacobi_on_hyperbolic) {
      return {t, unit_sphere_volume(n) * std::pow(std::sinh(t), n), "closed-form", 0.0};
    }
    // j'' = j along every radial geodesic; integrate it rather than use sinh.
    namespace odeint = boost::numeric::odeint;
    std::array<double, 2> x{0.0, 1.0};
    auto rhs = [](const std::array<double, 2>& y, std::array<double, 2>& d, double) {
      d[0] = y[1];
      d[1] = y[0];
    };
    auto stepper = odeint::make_controlled(1e-14, 1e-14, odeint::runge_kutta_dopri5<std::array<double, 2>>());
    odeint::integrate_adaptive(stepper, rhs, x, 0.0, t, 1e-3);
    const double area = unit_sphere_volume(n) * std::pow(x[0], n);
    return {t, area, "jacobi-quadrature", 1e-12 * area};
  }
  if (model.is_fermi()) {
    // Constant curvature -1: det J = sinh^n along every geodesic.
    const auto m = detail::fermi_minimizing_measure(model, q, t, opt);
    const double sn = std::pow(std::sinh(t), n);
    if (!(m.value > 0.0)) {
      throw NumericError("sphere_area: empty minimizing set", "t=" + std::to_string(t));
    }
    return {t, sn * m.value, "jacobi-quadrature", sn * m.error};
  }
  const auto& a = model.as_ads();
  if (t > a.table->t_max() - 1.0) throw DomainError("sphere_area: radius beyond supported AdS range");
  if (q.t == 0.0) {
    const auto r = detail::ads_core_sphere_area(a, t, opt.rel_tol);
    if (!(r.value > 0.0)) throw NumericError("sphere_area: quadrature collapsed", "t=" + std::to_string(t));
    return {t, r.value, "jacobi-quadrature", r.error};
  }
  return detail::ads_offcore_sphere_area(model, q, t, opt);
}

/// Volume of the geodesic ball of radius t about q.
inline double ball_volume(const ModelMetric& model, const ModelPoint& q, double t, const SphereAreaOptions& opt = {}) {
  validate(model, q);
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("ball_volume: radius must be positive");
  const int n = model.n();
  if (model.is_hyperbolic() && !opt.jacobi_on_hyperbolic) {
    const double w = unit_sphere_volume(n);
    return integrate([n, w](double s) { return w * std::pow(std::sinh(s), n); }, 0.0, t, 1e-13).value;
  }
  std::map<double, double> cache;
  auto area = [&](double s) {
    if (s <= 0.0) return 0.0;
    auto it = cache.find(s);
    if (it != cache.end()) return it->second;
    const double v = sphere_area(model, q, s, opt).area;
    cache.emplace(s, v);
    return v;
  };
  return integrate(area, 0.0, t, std::max(opt.rel_tol, 1e-9), 10).value;
}

// ---------------------------------------------------------------------------
// Busemann functions

/// The radial ray gamma(t) = (t, direction, angle) from the core.
struct BoundaryRay {
  std::vector<double> direction;
  double angle = 0.0;

  ModelPoint at(double t) const { return {t, direction, angle}; }
};

struct BusemannOptions {
  double horizon = 20.0;   // T; samples at T and T + 1
  double cauchy_tol = 1e-3;
  DistanceOptions distance;
};

struct BusemannValue {
  double value = 0.0;
  double err = 0.0;
};

/// b(p) = lim_{t -> inf} (t - d(p, gamma(t))), from t = T and T + 1 with one
/// Richardson step in e^{-2t}.
inline BusemannValue busemann_with_error(const ModelMetric& model, const BoundaryRay& ray, const ModelPoint& p,
                                         const BusemannOptions& opt = {}) {
  validate(model, ray.at(0.0));
  validate(model, p);
  const double T = opt.horizon;
  const double b0 = T - distance(model, p, ray.at(T), opt.distance);
  const double b1 = T + 1.0 - distance(model, p, ray.at(T + 1.0), opt.distance);
  const double inc = b1 - b0;
  if (!std::isfinite(inc) || std::abs(inc) > opt.cauchy_tol) {
    std::ostringstream d;
    d << "b(T)=" << b0 << " b(T+1)=" << b1;
    throw NumericError("busemann: increments are not settling", d.str());
  }
  const double q = std::exp(-2.0);
  const double value = (b1 - q * b0) / (1.0 - q);
  return {value, std::abs(value - b1) + 1e-12 * std::max(1.0, T)};
}

inline double busemann(const ModelMetric& model, const BoundaryRay& ray, const ModelPoint& p,
                       const BusemannOptions& opt = {}) {
  return busemann_with_error(model, ray, p, opt).value;
}

}  // namespace ahgeo
