#pragma once

// The three analytic asymptotically hyperbolic model geometries:
//
//   Hyperbolic(n)       dt^2 + sinh^2 t g_{S^n}                      on H^{n+1}
//   FermiQuotient(n,l)  dt^2 + sinh^2 t g_{S^{n-1}} + cosh^2 t g_{S^1(l)}
//                        on R^n x S^1(l), a hyperbolic quotient in Fermi
//                        coordinates about a closed core geodesic of length 2*pi*l
//   AdsSchwarzschild(m) dt^2 + lambda^2 V dphi^2 + r^2 g_{S^2}       on R^2 x S^2,
//                        V(r) = 1 + r^2 - 2m/r, dt = V^{-1/2} dr, phi of period 2*pi

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/numeric/odeint.hpp>

#include "json.hpp"

#include "ahgeo/numerics.hpp"

namespace ahgeo {

// ---------------------------------------------------------------------------
// Basic special values

/// Volume of the unit round n-sphere, 2 pi^{(n+1)/2} / Gamma((n+1)/2).
/// Accepts n = 0 (two points, volume 2), which shows up in zonal integrals.
inline double unit_sphere_volume(int n) {
  if (n < 0) throw DomainError("unit_sphere_volume: n must be >= 0");
  const double h = 0.5 * (n + 1);
  return 2.0 * std::pow(pi, h) / boost::math::tgamma(h);
}

// ---------------------------------------------------------------------------
// AdS-Schwarzschild radial functions

namespace ads {

inline double potential(double m, double r) { return 1.0 + r * r - 2.0 * m / r; }
inline double potential_d1(double m, double r) { return 2.0 * r + 2.0 * m / (r * r); }
inline double potential_d2(double m, double r) { return 2.0 - 4.0 * m / (r * r * r); }

/// V(r) for r = r_m + w, written without the cancellation at the horizon:
/// r V(r) = r^3 + r - 2m = w (3 r_m^2 + 1 + 3 r_m w + w^2).
inline double potential_from_horizon(double rm, double w) {
  const double r = rm + w;
  return w * (3.0 * rm * rm + 1.0 + 3.0 * rm * w + w * w) / r;
}

/// (V^{-1/2} - 1/r) dr/du at r = r_m + u^2. Written with
/// r^3 - w Q = r_m^3 - w (Q = V r / w) so nothing cancels at large u.
inline double log_corrected_integrand(double rm, double u) {
  const double w = u * u;
  const double rr = rm + w;
  const double sq = std::sqrt(w * w + 3.0 * rm * w + 3.0 * rm * rm + 1.0);
  return 2.0 * (rm * rm * rm - w) / (rr * sq * (rr * std::sqrt(rr) + u * sq));
}

}  // namespace ads

/// Horizon radius r_m > 0 of V(r) = 1 + r^2 - 2m/r (root of r^3 + r - 2m).
inline double ads_horizon(double m) {
  if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("ads_horizon: mass must be positive");
  auto fdf = [m](double r) { return std::make_pair(r * r * r + r - 2.0 * m, 3.0 * r * r + 1.0); };
  const double rm = bracketed_newton(fdf, 0.0, 1.0 + 2.0 * m, 1e-15);
  return rm;
}

/// Circle scale making the metric smooth on the axis: 2 r_m / (3 r_m^2 + 1).
inline double ads_lambda(double m) {
  const double rm = ads_horizon(m);
  return 2.0 * rm / (3.0 * rm * rm + 1.0);
}

/// Arc-length coordinate t(r) = int_{r_m}^r V^{-1/2}. The substitution
/// r = r_m + u^2 removes the inverse square root at the horizon.
inline double ads_t_of_r(double m, double r, double rel_tol = 1e-13) {
  const double rm = ads_horizon(m);
  if (r < rm) throw DomainError("ads_t_of_r: r below the horizon radius");
  if (r == rm) return 0.0;
  auto integrand = [rm](double u) { return ads::log_corrected_integrand(rm, u); };
  // Geometric panels keep every piece well resolved when sqrt(r - r_m) is huge.
  const double ub = std::sqrt(r - rm);
  double sum = 0.0;
  double a = 0.0;
  double b = std::min(ub, 1.0);
  while (a < ub) {
    sum += integrate(integrand, a, b, rel_tol).value;
    a = b;
    b = std::min(ub, 2.0 * b);
  }
  return std::log(r / rm) + sum;
}

/// sqrt(r(t) - r_m): inverse of ads_t_of_r in the variable u where
/// t(u) = int_0^u 2 sqrt(r/Q) is smooth with derivative bounded away from 0.
inline double ads_u_of_t(double m, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("ads_r_of_t: t must be nonnegative");
  const double rm = ads_horizon(m);
  if (t == 0.0) return 0.0;
  const double q = 3.0 * rm * rm + 1.0;
  // V <= 1 + r^2 gives t(r) >= asinh r - asinh r_m.
  const double r_hi = std::sinh(t + std::asinh(rm)) + 1.0;
  const double u_hi = std::sqrt(r_hi - rm);
  auto fdf = [&](double u) {
    const double w = u * u;
    const double slope = 2.0 * std::sqrt((rm + w) / (q + 3.0 * rm * w + w * w));
    return std::make_pair(ads_t_of_r(m, rm + w) - t, slope);
  };
  return bracketed_newton(fdf, 0.0, u_hi, 1e-15 * std::min(1.0, t) + 1e-300);
}

/// Inverse of ads_t_of_r.
inline double ads_r_of_t(double m, double t) {
  const double u = ads_u_of_t(m, t);
  return ads_horizon(m) + u * u;
}

/// lim_{t->inf} r(t) e^{-t} = r_m exp(-int_{r_m}^inf (V^{-1/2} - 1/tau) dtau).
inline double ads_asymptotic_scale(double m) {
  const double rm = ads_horizon(m);
  auto integrand = [rm](double u) { return ads::log_corrected_integrand(rm, u); };
  const double i = integrate(integrand, 0.0, std::numeric_limits<double>::infinity(), 1e-13).value;
  return rm * std::exp(-i);
}

/// Dense table of r(t) on [0, t_max] from r'' = V'(r)/2, r(0) = r_m, r'(0) = 0,
/// evaluated between nodes by quintic Hermite interpolation using the exact
/// r' = sqrt(V) and r'' = V'/2. Used in inner loops where repeated root
/// finding on ads_t_of_r would be too slow. The default step follows r_m,
/// since r varies on that scale near the core when m is small.
class AdsRadialTable {
 public:
  explicit AdsRadialTable(double m, double t_max = 40.0, double step = 0.0)
      : m_(m), rm_(ads_horizon(m)), h_(step > 0.0 ? step : std::clamp(rm_ / 64.0, 1.0 / 16384.0, 1.0 / 256.0)) {
    namespace odeint = boost::numeric::odeint;
    using State = std::array<double, 2>;
    const auto count = static_cast<std::size_t>(std::ceil(t_max / h_)) + 1;
    r_.reserve(count);
    State x{rm_, 0.0};
    const double mm = m_;
    auto rhs = [mm](const State& s, State& d, double) {
      d[0] = s[1];
      d[1] = 0.5 * ads::potential_d1(mm, s[0]);
    };
    std::vector<double> times(count);
    for (std::size_t i = 0; i < count; ++i) times[i] = static_cast<double>(i) * h_;
    auto stepper = odeint::make_dense_output(1e-14, 1e-14, odeint::runge_kutta_dopri5<State>());
    odeint::integrate_times(stepper, rhs, x, times.begin(), times.end(), h_ * 0.25,
                            [this](const State& s, double) { r_.push_back(s[0]); });
  }

  double mass() const { return m_; }
  double horizon() const { return rm_; }
  double t_max() const { return h_ * static_cast<double>(r_.size() - 1); }

  /// r, dr/dt, d^2r/dt^2 at |t|.
  std::array<double, 3> eval(double t) const {
    t = std::abs(t);
    if (t > t_max()) throw DomainError("AdsRadialTable: t beyond table range");
    auto i = static_cast<std::size_t>(t / h_);
    if (i + 1 >= r_.size()) i = r_.size() - 2;
    const double s = (t - static_cast<double>(i) * h_) / h_;
    const auto [p0, d0, a0] = node(i);
    const auto [p1, d1, a1] = node(i + 1);
    // Quintic Hermite basis on [0,1], derivatives scaled by h.
    const double hd0 = h_ * d0, hd1 = h_ * d1, ha0 = h_ * h_ * a0, ha1 = h_ * h_ * a1;
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    const double h00 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
    const double h10 = s - 6 * s3 + 8 * s4 - 3 * s5;
    const double h20 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5);
    const double h01 = 10 * s3 - 15 * s4 + 6 * s5;
    const double h11 = -4 * s3 + 7 * s4 - 3 * s5;
    const double h21 = 0.5 * (s3 - 2 * s4 + s5);
    const double r = h00 * p0 + h10 * hd0 + h20 * ha0 + h01 * p1 + h11 * hd1 + h21 * ha1;
    const double v = ads::potential_from_horizon(rm_, std::max(r - rm_, 0.0));
    return {r, std::sqrt(std::max(v, 0.0)), 0.5 * ads::potential_d1(m_, r)};
  }

 private:
  std::array<double, 3> node(std::size_t i) const {
    const double r = r_[i];
    const double v = ads::potential_from_horizon(rm_, std::max(r - rm_, 0.0));
    return {r, std::sqrt(std::max(v, 0.0)), 0.5 * ads::potential_d1(m_, r)};
  }

  double m_;
  double rm_;
  double h_;
  std::vector<double> r_;
};

// ---------------------------------------------------------------------------
// Model descriptors

struct Hyperbolic {
  int n = 2;
};

struct FermiQuotient {
  int n = 2;
  double lambda = 1.0;
};

struct AdsSchwarzschild {
  double m = 1.0;
  double horizon = 1.0;     // r_m
  double lambda = 0.5;      // 2 r_m / (3 r_m^2 + 1)
  double scale = 0.0;       // lim r e^{-t}
  std::shared_ptr<const AdsRadialTable> table;
};

/// Tagged model geometry. Construct through the factory functions, which
/// validate parameters and cache derived data.
class ModelMetric {
 public:
  using Variant = std::variant<Hyperbolic, FermiQuotient, AdsSchwarzschild>;

  static ModelMetric hyperbolic(int n) {
    if (n < 1) throw DomainError("Hyperbolic: n must be >= 1");
    return ModelMetric(Hyperbolic{n});
  }
  static ModelMetric fermi(int n, double lambda) {
    if (n < 2) throw DomainError("FermiQuotient: n must be >= 2");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("FermiQuotient: lambda must be positive");
    return ModelMetric(FermiQuotient{n, lambda});
  }
  static ModelMetric ads(double m) {
    if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("AdsSchwarzschild: m must be positive");
    AdsSchwarzschild a;
    a.m = m;
    a.horizon = ads_horizon(m);
    a.lambda = 2.0 * a.horizon / (3.0 * a.horizon * a.horizon + 1.0);
    a.scale = ads_asymptotic_scale(m);
    a.table = std::make_shared<const AdsRadialTable>(m);
    return ModelMetric(std::move(a));
  }

  const Variant& variant() const { return v_; }
  bool is_hyperbolic() const { return std::holds_alternative<Hyperbolic>(v_); }
  bool is_fermi() const { return std::holds_alternative<FermiQuotient>(v_); }
  bool is_ads() const { return std::holds_alternative<AdsSchwarzschild>(v_); }
  const Hyperbolic& as_hyperbolic() const { return std::get<Hyperbolic>(v_); }
  const FermiQuotient& as_fermi() const { return std::get<FermiQuotient>(v_); }
  const AdsSchwarzschild& as_ads() const { return std::get<AdsSchwarzschild>(v_); }

  /// Boundary dimension n (the manifold has dimension n + 1).
  int n() const {
    return std::visit([](const auto& m) -> int {
      if constexpr (std::is_same_v<std::decay_t<decltype(m)>, AdsSchwarzschild>) return 3;
      else return m.n;
    }, v_);
  }

  std::string name() const {
    if (is_hyperbolic()) return "hyperbolic";
    if (is_fermi()) return "fermi";
    return "ads";
  }

  nlohmann::json to_json() const {
    if (is_hyperbolic()) return {{"model", "hyperbolic"}, {"n", n()}};
    if (is_fermi()) return {{"model", "fermi"}, {"n", n()}, {"lambda", as_fermi().lambda}};
    return {{"model", "ads"}, {"m", as_ads().m}};
  }

  static ModelMetric from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("model") || !j.at("model").is_string()) {
      throw DomainError("model descriptor must be an object with a string field \"model\"");
    }
    const auto kind = j.at("model").get<std::string>();
    auto number = [&](const char* key) {
      if (!j.contains(key) || !j.at(key).is_number()) {
        throw DomainError(std::string("model descriptor: missing numeric field \"") + key + "\"");
      }
      return j.at(key).get<double>();
    };
    auto integer = [&](const char* key) {
      if (!j.contains(key) || !j.at(key).is_number_integer()) {
        throw DomainError(std::string("model descriptor: missing integer field \"") + key + "\"");
      }
      return j.at(key).get<int>();
    };
    if (kind == "hyperbolic") return hyperbolic(integer("n"));
    if (kind == "fermi") return fermi(integer("n"), number("lambda"));
    if (kind == "ads") return ads(number("m"));
    throw DomainError("unknown model \"" + kind + "\"");
  }

 private:
  explicit ModelMetric(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

// ---------------------------------------------------------------------------
// Points

/// A point in symmetry-adapted coordinates.
///   Hyperbolic: t = distance to the pole, `direction` a unit vector in R^{n+1}.
///   FermiQuotient: t = distance to the core, `direction` a unit vector in R^n
///     (the S^{n-1} factor), `angle` = theta in [0, 2 pi) on the core circle.
///   AdS: t = distance to the core 2-sphere, `direction` a unit vector in R^3
///     (the S^2 factor), `angle` = phi in [0, 2 pi).
struct ModelPoint {
  double t = 0.0;
  std::vector<double> direction;
  double angle = 0.0;
};

inline std::size_t direction_size(const ModelMetric& model) {
  if (model.is_hyperbolic()) return static_cast<std::size_t>(model.n() + 1);
  if (model.is_fermi()) return static_cast<std::size_t>(model.n());
  return 3;
}

inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * pi);
  if (a < 0) a += 2.0 * pi;
  return a;
}

/// Point at radial coordinate t with the first basis vector as direction.
inline ModelPoint make_point(const ModelMetric& model, double t, double angle = 0.0) {
  ModelPoint p;
  p.t = t;
  p.direction.assign(direction_size(model), 0.0);
  p.direction[0] = 1.0;
  p.angle = wrap_angle(angle);
  return p;
}

inline void validate(const ModelMetric& model, const ModelPoint& p) {
  if (!(p.t >= 0.0) || !std::isfinite(p.t)) throw DomainError("point: radial coordinate must be >= 0");
  if (p.direction.size() != direction_size(model)) {
    throw DomainError("point: direction has " + std::to_string(p.direction.size()) +
                      " components, model expects " + std::to_string(direction_size(model)));
  }
  double s = 0.0;
  for (double x : p.direction) s += x * x;
  if (std::abs(std::sqrt(s) - 1.0) > 1e-12) throw DomainError("point: direction is not a unit vector");
  if (!std::isfinite(p.angle)) throw DomainError("point: angle must be finite");
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Great-circle angle between two unit vectors, accurate near 0 and pi.
inline double sphere_angle(const std::vector<double>& a, const std::vector<double>& b) {
  double sum2 = 0.0, diff2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum2 += (a[i] + b[i]) * (a[i] + b[i]);
    diff2 += (a[i] - b[i]) * (a[i] - b[i]);
  }
  return 2.0 * std::atan2(std::sqrt(diff2), std::sqrt(sum2));
}

/// Signed angular separation reduced to (-pi, pi].
inline double angle_difference(double a, double b) {
  double d = std::remainder(a - b, 2.0 * pi);
  if (d <= -pi) d += 2.0 * pi;
  return d;
}

// ---------------------------------------------------------------------------
// Warp factors

struct WarpFactor {
  std::string name;
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Diagonal warp factors of the model at radial coordinate t, with first and
/// second t-derivatives. Hyperbolic: "sphere" (of g_{S^n}). FermiQuotient:
/// "sphere" (g_{S^{n-1}}) and "circle" (g_{S^1(lambda)}). AdS: "circle"
/// (lambda sqrt V against the unit-circle metric) and "sphere" (r, g_{S^2}).
using WarpProfile = std::vector<WarpFactor>;

inline WarpProfile warp_profile(const ModelMetric& model, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("warp_profile: radial coordinate must be >= 0");
  const double sh = std::sinh(t), ch = std::cosh(t);
  if (model.is_hyperbolic()) return {{"sphere", sh, ch, sh}};
  if (model.is_fermi()) return {{"sphere", sh, ch, sh}, {"circle", ch, sh, ch}};
  const auto& a = model.as_ads();
  if (t > a.table->t_max()) throw DomainError("warp_profile: t beyond supported AdS range");
  const double u = ads_u_of_t(a.m, t);
  const double r = a.horizon + u * u;
  const double v = ads::potential_from_horizon(a.horizon, u * u);
  const double sv = std::sqrt(v);
  const double v1 = ads::potential_d1(a.m, r);
  const double v2 = ads::potential_d2(a.m, r);
  return {{"circle", a.lambda * sv, 0.5 * a.lambda * v1, 0.5 * a.lambda * v2 * sv},
          {"sphere", r, sv, 0.5 * v1}};
}

}  // namespace ahgeo
