#pragma once

// p-capacities of geodesic balls and of collar sublevel sets.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/interpolators/barycentric_rational.hpp>
#include <nlohmann/json.hpp>

#include "ahgeo/compactification.hpp"
#include "ahgeo/geodesic.hpp"
#include "ahgeo/relvol.hpp"

namespace ahgeo {

namespace detail {
inline void check_p(double p, const char* who) {
  if (!(p > 1.0) || !std::isfinite(p)) throw DomainError(std::string(who) + ": p must be > 1");
}
}  // namespace detail

/// cap_p(B_r, B_R) on H^{n+1}: omega_n [int_r^R sinh^{n/(1-p)}]^{1-p}.
/// Written as omega_n e^{nr} J^{1-p} with the e^{-kr} factor pulled out of the
/// integral, so large r does not underflow.
inline double cap_hyperbolic_closed(int n, double p, double r, double R = std::numeric_limits<double>::infinity()) {
  detail::check_p(p, "cap_hyperbolic_closed");
  if (n < 1) throw DomainError("cap_hyperbolic_closed: n must be >= 1");
  if (!(r > 0.0) || !(R > r)) throw DomainError("cap_hyperbolic_closed: need 0 < r < R");
  const double k = n / (p - 1.0);
  // sinh(r+u)^{-k} = e^{-k(r+u)} (2 / (1 - e^{-2(r+u)}))^k
  auto f = [k, r](double u) { return std::exp(-k * u) * std::pow(2.0 / -std::expm1(-2.0 * (r + u)), k); };
  const double j = integrate(f, 0.0, R - r, 1e-14).value;
  return unit_sphere_volume(n) * std::exp(n * r) * std::pow(j, 1.0 - p);
}

/// (1/2^n) (n/(p-1))^{p-1} A(q).
inline double cap_asymconst(int n, double p, double relvol) {
  detail::check_p(p, "cap_asymconst");
  return std::pow(0.5, n) * std::pow(n / (p - 1.0), p - 1.0) * relvol;
}

// ---------------------------------------------------------------------------
// Radial profiles.

struct RadialProfile {
  std::vector<double> radii;
  std::vector<double> areas;
  int n = 0;
  double tail_constant = 0.0;  // A(q); 0 means absent

  void validate() const {
    if (radii.size() < 4 || radii.size() != areas.size()) throw DomainError("RadialProfile: need >= 4 samples");
    for (std::size_t i = 0; i < radii.size(); ++i) {
      if (!(areas[i] > 0.0)) throw DomainError("RadialProfile: areas must be positive");
      if (i > 0 && !(radii[i] > radii[i - 1])) throw DomainError("RadialProfile: radii must increase");
    }
    if (radii.front() <= 0.0) throw DomainError("RadialProfile: radii must be positive");
  }

  /// 2^n e^{-ns} A(s) / A(q) - 1 at sample i.
  double tail_residual(std::size_t i) const {
    return std::pow(2.0, n) * std::exp(-n * radii[i]) * areas[i] / tail_constant - 1.0;
  }
};

/// Samples sphere_area on s0, s0 + h, ..., s_max; tail constant from the
/// boundary route unless given.
inline RadialProfile make_radial_profile(const ModelMetric& model, const ModelPoint& q, double s_max,
                                         double step = 0.05, std::optional<double> relvol = std::nullopt,
                                         const SphereAreaOptions& opt = {}) {
  if (!(step > 0.0) || !(s_max > 4.0 * step)) throw DomainError("make_radial_profile: bad range");
  RadialProfile p;
  p.n = model.n();
  const auto count = static_cast<int>(std::floor(s_max / step + 1e-9));
  for (int i = 1; i <= count; ++i) {
    const double s = step * i;
    p.radii.push_back(s);
    p.areas.push_back(sphere_area(model, q, s, opt).area);
  }
  p.tail_constant = relvol ? *relvol : relvol_boundary(model, q).value;
  return p;
}

namespace detail {

inline double log_sinh(double s) { return s + std::log(-std::expm1(-2.0 * s)) - std::log(2.0); }

// log A interpolated as n log sinh s + r(s), with r = log(A / sinh^n) the
// smooth volume-comparison ratio, by a barycentric rational of order 3.
class LogAreaInterpolant {
 public:
  explicit LogAreaInterpolant(const RadialProfile& p) : n_(p.n), lo_(p.radii.front()), hi_(p.radii.back()) {
    std::vector<double> x = p.radii, y(p.areas.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::log(p.areas[i]) - n_ * log_sinh(x[i]);
    f_.emplace(std::move(x), std::move(y), 3);
  }
  double operator()(double s) const { return n_ * log_sinh(s) + (*f_)(std::clamp(s, lo_, hi_)); }

 private:
  int n_;
  double lo_, hi_;
  std::optional<boost::math::barycentric_rational<double>> f_;
};

// int_T^inf [(1 + rho) A(q) (e^s/2)^n]^{1/(1-p)} ds, scaled by e^{nT/(p-1)}.
inline double scaled_tail(const RadialProfile& prof, double p, double rho) {
  const double c = (1.0 + rho) * prof.tail_constant * std::pow(0.5, prof.n);
  return std::pow(c, 1.0 / (1.0 - p)) * (p - 1.0) / prof.n;
}

// rho for a tail starting at T: the largest |residual| at samples >= T.
inline double tail_rho(const RadialProfile& prof, double T) {
  double rho = 0.0;
  for (std::size_t i = 0; i < prof.radii.size(); ++i) {
    if (prof.radii[i] >= T - 1e-12) rho = std::max(rho, std::abs(prof.tail_residual(i)));
  }
  return rho;
}

// Flux integral I = int_t^T A^{1/(1-p)} + tail, returned as I e^{nt/(p-1)}.
inline double scaled_flux(const RadialProfile& prof, const LogAreaInterpolant& la, double p, double t, double T) {
  const double k = prof.n / (p - 1.0);
  auto f = [&](double s) { return std::exp(la(s) / (1.0 - p) + k * t); };
  const double body = T > t ? integrate(f, t, T, 1e-13).value : 0.0;
  return body + std::exp(-k * (T - t)) * scaled_tail(prof, p, tail_rho(prof, T));
}

}  // namespace detail

/// (int_t^inf A(s)^{1/(1-p)} ds)^{1-p} with the sampled profile up to
/// tail_start (default: the last radius) and (A(q)(1+rho))(e^s/2)^n beyond,
/// rho being the measured tail residual. The radial test function built from
/// these areas is admissible, so this bounds cap_p(B_q(t)) from above as long
/// as the tail areas dominate.
inline double cap_upper_radial(const RadialProfile& prof, double p, double t,
                               std::optional<double> tail_start = std::nullopt) {
  detail::check_p(p, "cap_upper_radial");
  prof.validate();
  if (!(prof.tail_constant > 0.0)) throw DomainError("cap_upper_radial: tail constant missing; refusing an unsound bound");
  if (t < prof.radii.front() || t > prof.radii.back()) throw DomainError("cap_upper_radial: t outside profile range");
  const double T = std::clamp(tail_start.value_or(prof.radii.back()), t, prof.radii.back());
  const detail::LogAreaInterpolant la(prof);
  const double i = detail::scaled_flux(prof, la, p, t, T);
  return std::exp(prof.n * t) * std::pow(i, 1.0 - p);
}

/// The optimizer of the radial problem: f(s) = flux(s) / flux(t).
inline double radial_optimizer(const RadialProfile& prof, double p, double t, double s,
                               std::optional<double> tail_start = std::nullopt) {
  detail::check_p(p, "radial_optimizer");
  if (s < t) return 1.0;
  const double T = std::clamp(tail_start.value_or(prof.radii.back()), t, prof.radii.back());
  const detail::LogAreaInterpolant la(prof);
  const double k = prof.n / (p - 1.0);
  const double ft = detail::scaled_flux(prof, la, p, t, T);
  const double fs = detail::scaled_flux(prof, la, p, std::min(s, T), T);
  // fs is scaled by e^{k min(s,T)}; beyond T the tail decays like e^{-k s}.
  double v = fs / ft * std::exp(-k * (std::min(s, T) - t));
  if (s > T) v *= std::exp(-k * (s - T));
  return v;
}

// ---------------------------------------------------------------------------
// Isocapacitary lower bound.

struct IsocapLower {
  double value = 0.0;
  bool valid = false;
  std::string reason;
};

inline IsocapLower isocap_validity(const ModelMetric& model) {
  IsocapLower r;
  if (model.is_hyperbolic()) {
    r.valid = true;
    r.reason = "Cheeger constant n";
  } else if (model.is_fermi()) {
    r.valid = true;
    r.reason = "assumed: boundary Yamabe constant not computed";
  } else {
    r.valid = false;
    r.reason = "scalar-curvature decay hypothesis unverified";
  }
  return r;
}

/// n^p / (p-1)^{p-1} Vol(B_q(t)), valid when the isoperimetric profile is
/// I(v) = n v, i.e. Cheeger constant n.
inline IsocapLower cap_lower_isocap(const ModelMetric& model, const ModelPoint& q, double p, double t,
                                    const SphereAreaOptions& opt = {}) {
  detail::check_p(p, "cap_lower_isocap");
  const int n = model.n();
  IsocapLower r = isocap_validity(model);
  r.value = std::pow(n, p) / std::pow(p - 1.0, p - 1.0) * ball_volume(model, q, t, opt);
  return r;
}

// ---------------------------------------------------------------------------
// Discrete variational problem.

struct VariationalOptions {
  int max_iter = 200;
  double tol = 1e-13;
  double tail_residual = 0.005;  // T: first radius after which the tail residual stays below this
};

struct VariationalResult {
  double value = 0.0;
  double reference = 0.0;  // exact 1-D optimum with the same tail start
  double tail_start = 0.0;
  std::vector<double> s, f;
  int iterations = 0;
  std::string method;
  std::vector<double> trace;  // energy per Newton iteration, normalized

  nlohmann::json to_json() const {
    return {{"value", value}, {"reference", reference}, {"tail_start", tail_start}, {"iterations", iterations},
            {"method", method}};
  }
};

namespace detail {

inline double variational_tail_start(const RadialProfile& prof, double t, double thresh) {
  std::size_t k = prof.radii.size();
  while (k > 0 && std::abs(prof.tail_residual(k - 1)) < thresh) --k;
  const double tres = k < prof.radii.size() ? prof.radii[k] : prof.radii.back();
  return std::min(std::max(t + 1.0, tres), prof.radii.back());
}

// Thomas algorithm for a symmetric tridiagonal system.
inline std::vector<double> solve_tridiagonal(std::vector<double> diag, std::vector<double> off,
                                             std::vector<double> rhs) {
  const std::size_t m = diag.size();
  for (std::size_t i = 1; i < m; ++i) {
    const double w = off[i - 1] / diag[i - 1];
    diag[i] -= w * off[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> x(m);
  x[m - 1] = rhs[m - 1] / diag[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) x[i] = (rhs[i] - off[i] * x[i + 1]) / diag[i];
  return x;
}

}  // namespace detail

/// Minimizes sum_i A(s_i) |f_{i+1} - f_i|^p / h^{p-1} + C_T |f_N|^p over
/// f_1..f_N with f_0 = 1 on a uniform grid of [t, T]; C_T is the tail
/// capacity beyond T. Cell weights are left values, so the discrete minimum
/// sits below the 1-D optimum by O(h). Damped Newton on the tridiagonal
/// Euler-Lagrange system; for p < 1.2, or if Newton stalls, golden-section on
/// the family f^gamma of the analytic optimizer.
inline VariationalResult cap_variational(const RadialProfile& prof, double p, double t, int N,
                                         const VariationalOptions& opt = {}) {
  detail::check_p(p, "cap_variational");
  prof.validate();
  if (N < 16) throw DomainError("cap_variational: N must be >= 16");
  if (!(prof.tail_constant > 0.0)) throw DomainError("cap_variational: tail constant missing");
  if (t < prof.radii.front() || t >= prof.radii.back()) throw DomainError("cap_variational: t outside profile range");

  const int n = prof.n;
  const double T = detail::variational_tail_start(prof, t, opt.tail_residual);
  const double h = (T - t) / N;
  const detail::LogAreaInterpolant la(prof);
  const double k = n / (p - 1.0);

  VariationalResult res;
  res.tail_start = T;
  res.reference = cap_upper_radial(prof, p, t, T);
  // Everything is scaled by e^{-nt}: c_i = A(s_i) e^{-nt} / h^{p-1}.
  std::vector<double> c(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) c[i] = std::exp(la(t + i * h) - n * t) / std::pow(h, p - 1.0);
  const double tail_flux = std::exp(-k * (T - t)) * detail::scaled_tail(prof, p, detail::tail_rho(prof, T));
  const double ct = std::pow(tail_flux, 1.0 - p);

  res.s.resize(N + 1);
  for (int i = 0; i <= N; ++i) res.s[i] = t + i * h;
  // Optimizer on the grid from cell-wise Gauss-Legendre flux integrals.
  std::vector<double> f0(N + 1);
  f0[N] = tail_flux;
  auto flux = [&](double s) { return std::exp(la(s) / (1.0 - p) + k * t); };
  for (int i = N - 1; i >= 0; --i) f0[i] = f0[i + 1] + gauss_legendre<8>(flux, res.s[i], res.s[i + 1]);
  for (int i = N; i >= 0; --i) f0[i] /= f0[0];

  auto energy = [&](const std::vector<double>& f) {
    double e = ct * std::pow(std::abs(f[N]), p);
    for (int i = 0; i < N; ++i) e += c[i] * std::pow(std::abs(f[i + 1] - f[i]), p);
    return e;
  };
  const double scale = energy(f0);

  auto newton = [&](std::vector<double>& f) -> bool {
    for (int it = 0; it < opt.max_iter; ++it) {
      const double e = energy(f);
      res.trace.push_back(e / scale);
      // Gradient and Hessian in f_1..f_N.
      std::vector<double> g(N, 0.0), d(N, 0.0), o(N > 1 ? N - 1 : 0, 0.0);
      for (int i = 0; i < N; ++i) {
        const double df = f[i + 1] - f[i];
        const double a = std::abs(df);
        const double g1 = c[i] * p * std::pow(a, p - 1.0) * (df < 0 ? -1.0 : 1.0);
        const double g2 = c[i] * p * (p - 1.0) * std::pow(std::max(a, 1e-300), p - 2.0);
        // d/df_{i+1} and d/df_i of c |df|^p
        g[i] += g1;
        d[i] += g2;
        if (i > 0) {
          g[i - 1] -= g1;
          d[i - 1] += g2;
          o[i - 1] -= g2;
        }
      }
      const double fn = f[N];
      g[N - 1] += ct * p * std::pow(std::abs(fn), p - 1.0) * (fn < 0 ? -1.0 : 1.0);
      d[N - 1] += ct * p * (p - 1.0) * std::pow(std::max(std::abs(fn), 1e-300), p - 2.0);
      std::vector<double> minus_g(N);
      for (int i = 0; i < N; ++i) minus_g[i] = -g[i];
      const auto step = detail::solve_tridiagonal(d, o, minus_g);
      double dec = 0.0;
      for (int i = 0; i < N; ++i) dec -= g[i] * step[i];
      if (!(dec >= 0.0) || !std::isfinite(dec)) return false;
      if (dec < opt.tol * e) {
        res.iterations = it;
        return true;
      }
      double alpha = 1.0;
      std::vector<double> trial(f);
      for (;;) {
        for (int i = 0; i < N; ++i) trial[i + 1] = f[i + 1] + alpha * step[i];
        if (energy(trial) <= e - 1e-4 * alpha * dec) break;
        alpha *= 0.5;
        if (alpha < 1e-12) {
          res.iterations = it;
          return dec < 1e3 * opt.tol * e;
        }
      }
      f = trial;
    }
    return false;
  };

  std::vector<double> f = f0;
  bool ok = p >= 1.2 && newton(f);
  if (ok) {
    res.method = "newton";
  } else {
    // Golden-section on gamma for f0^gamma.
    auto eg = [&](double gamma) {
      std::vector<double> fg(f0);
      for (auto& v : fg) v = std::pow(std::max(v, 0.0), gamma);
      return energy(fg);
    };
    double a = 0.5, b = 2.0;
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double e1 = eg(x1), e2 = eg(x2);
    for (int it = 0; it < 100 && b - a > 1e-12; ++it) {
      if (e1 < e2) {
        b = x2;
        x2 = x1;
        e2 = e1;
        x1 = b - r * (b - a);
        e1 = eg(x1);
      } else {
        a = x1;
        x1 = x2;
        e1 = e2;
        x2 = a + r * (b - a);
        e2 = eg(x2);
      }
      res.trace.push_back(std::min(e1, e2) / scale);
    }
    const double gamma = 0.5 * (a + b);
    for (int i = 0; i <= N; ++i) f[i] = std::pow(std::max(f0[i], 0.0), gamma);
    res.method = p < 1.2 ? "golden-section" : "golden-section (newton stalled)";
  }
  const double e = energy(f);
  if (!std::isfinite(e) || !(e > 0.0)) {
    nlohmann::json tr = res.trace;
    throw NumericError("cap_variational: did not converge", tr.dump());
  }
  res.value = e * std::exp(n * t);
  res.f = std::move(f);
  return res;
}

/// The exact discrete minimum: a series of conductances c_i and C_T, i.e.
/// (sum c_i^{1/(1-p)} + C_T^{1/(1-p)})^{1-p}. Used to check the solver.
inline double cap_variational_series(const RadialProfile& prof, double p, double t, int N,
                                     const VariationalOptions& opt = {}) {
  const int n = prof.n;
  const double T = detail::variational_tail_start(prof, t, opt.tail_residual);
  const double h = (T - t) / N;
  const detail::LogAreaInterpolant la(prof);
  const double k = n / (p - 1.0);
  double sum = std::exp(-k * (T - t)) * detail::scaled_tail(prof, p, detail::tail_rho(prof, T));
  for (int i = 0; i < N; ++i) sum += h * std::exp((la(t + i * h) - n * t) / (1.0 - p));
  return std::exp(n * t) * std::pow(sum, 1.0 - p);
}

// ---------------------------------------------------------------------------
// Estimates, sweeps and audits.

struct CapacityEstimate {
  double p = 2.0, t = 0.0;
  double upper = 0.0;
  std::optional<double> lower, variational, closed_form;
  double variational_error = 0.0;
  bool isocap_valid = false;
  std::string isocap_reason;

  double ratio_to_e_nt(int n) const { return upper * std::exp(-n * t); }

  /// lower <= variational <= upper up to the variational error estimate.
  bool sandwich(double tol = 0.0) const {
    const double tl = tol + variational_error;
    bool ok = true;
    if (lower && variational) ok = ok && *lower <= *variational + tl;
    if (variational) ok = ok && *variational <= upper + tl;
    if (lower) ok = ok && *lower <= upper * (1 + 1e-12);
    return ok;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"p", p}, {"t", t}, {"upper", upper}};
    j["lower"] = lower ? nlohmann::json(*lower) : nlohmann::json(nullptr);
    j["variational"] = variational ? nlohmann::json(*variational) : nlohmann::json(nullptr);
    j["closed_form"] = closed_form ? nlohmann::json(*closed_form) : nlohmann::json(nullptr);
    j["isocapacitary_lower_valid"] = {{"valid", isocap_valid}, {"reason", isocap_reason}};
    return j;
  }
};


/// All available estimates at one radius; the closed form applies at any q on
/// the homogeneous hyperbolic model. The variational value uses N cells
/// (0 skips it); its error is |V_N - V_{N/2}|, the first-order gap.
inline CapacityEstimate capacity_estimate(const ModelMetric& model, const ModelPoint& q, const RadialProfile& prof,
                                          double p, double t, int N = 0) {
  CapacityEstimate e;
  e.p = p;
  e.t = t;
  e.upper = cap_upper_radial(prof, p, t);
  const auto lo = cap_lower_isocap(model, q, p, t);
  e.lower = lo.value;
  e.isocap_valid = lo.valid;
  e.isocap_reason = lo.reason;
  if (N > 0) {
    const auto v = cap_variational(prof, p, t, N);
    e.variational = v.value;
    e.variational_error = std::abs(v.value - cap_variational_series(prof, p, t, N / 2)) +
                          std::abs(v.reference - e.upper);
  }
  if (model.is_hyperbolic()) e.closed_form = cap_hyperbolic_closed(model.n(), p, t);
  return e;
}

inline void write_capacity_csv(std::ostream& os, int n, const std::vector<CapacityEstimate>& rows) {
  const auto prec = os.precision(12);
  os << "t,lower,variational,upper,ratio_to_e_nt\n";
  for (const auto& r : rows) {
    os << r.t << ',';
    if (r.lower) os << *r.lower;
    os << ',';
    if (r.variational) os << *r.variational;
    os << ',' << r.upper << ',' << r.ratio_to_e_nt(n) << '\n';
  }
  os.precision(prec);
}

struct CapacityAudit {
  double p = 2.0;
  double target = 0.0;         // (1/2^n)(n/(p-1))^{p-1} A(q)
  bool hypotheses_hold = false;  // limit claim applies
  std::string note;
  std::vector<CapacityEstimate> rows;
  double upper_rel_error = 0.0;  // at the largest t
  double lower_rel_error = 0.0;
  double max_ratio = 0.0;  // sup upper / e^{nt}
  bool bounded = false;    // growth bounded by e^{nt}
  bool converging = false;

  bool pass() const { return bounded && (!hypotheses_hold || converging); }

  nlohmann::json to_json(int n) const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
      auto j = r.to_json();
      j["ratio_to_e_nt"] = r.ratio_to_e_nt(n);
      arr.push_back(j);
    }
    return {{"p", p},         {"target", target},         {"hypotheses_hold", hypotheses_hold},
            {"note", note},   {"upper_rel_error", upper_rel_error}, {"lower_rel_error", lower_rel_error},
            {"max_ratio", max_ratio}, {"bounded", bounded},      {"converging", converging},
            {"pass", pass()}, {"rows", arr}};
  }
};

/// Upper, lower and (optionally) variational capacities over the grid divided
/// by e^{nt}. Boundedness is checked for every model against
/// 1.1 x the upper constant; convergence of the bracket to the target only
/// where the limit hypotheses hold.
inline CapacityAudit cap_limit_audit(const ModelMetric& model, const ModelPoint& q, double p,
                                     const std::vector<double>& t_grid, const RadialProfile& prof, int N = 0,
                                     double conv_tol = 0.05) {
  detail::check_p(p, "cap_limit_audit");
  if (t_grid.empty() || *std::max_element(t_grid.begin(), t_grid.end()) < 10.0) {
    throw DomainError("cap_limit_audit: grid max must be >= 10");
  }
  const int n = model.n();
  CapacityAudit a;
  a.p = p;
  a.target = cap_asymconst(n, p, prof.tail_constant);
  a.hypotheses_hold = !model.is_ads();
  a.note = model.is_fermi() ? "limit hypotheses assumed (boundary Yamabe constant not computed)"
           : model.is_ads() ? "boundedness only"
                            : "";
  for (double t : t_grid) a.rows.push_back(capacity_estimate(model, q, prof, p, t, N));
  for (const auto& r : a.rows) a.max_ratio = std::max(a.max_ratio, r.ratio_to_e_nt(n));
  const auto& last = *std::max_element(a.rows.begin(), a.rows.end(),
                                        [](const CapacityEstimate& x, const CapacityEstimate& y) { return x.t < y.t; });
  a.upper_rel_error = std::abs(last.ratio_to_e_nt(n) / a.target - 1.0);
  a.lower_rel_error = std::abs(*last.lower * std::exp(-n * last.t) / a.target - 1.0);
  a.bounded = std::isfinite(a.max_ratio) && a.max_ratio <= 1.1 * a.target;
  a.converging = a.upper_rel_error < conv_tol && a.lower_rel_error < conv_tol;
  return a;
}

/// Same, sampling the profile out to max(t) + 8.
inline CapacityAudit cap_limit_audit(const ModelMetric& model, const ModelPoint& q, double p,
                                     const std::vector<double>& t_grid, int N = 0, double conv_tol = 0.05) {
  if (t_grid.empty() || *std::max_element(t_grid.begin(), t_grid.end()) < 10.0) {
    throw DomainError("cap_limit_audit: grid max must be >= 10");
  }
  const double tmax = *std::max_element(t_grid.begin(), t_grid.end());
  return cap_limit_audit(model, q, p, t_grid, make_radial_profile(model, q, tmax + 8.0), N, conv_tol);
}

// ---------------------------------------------------------------------------
// Collars.

/// Vol(Sigma_x) in g = x^2 g+ for the level set {t = const} of x = k e^{-t}.
inline std::function<double(double)> level_set_volume(const ModelMetric& model) {
  const int n = model.n();
  const double k = defining_constant(model);
  // x sinh t and x cosh t written in x, which stays finite as x -> 0.
  if (model.is_hyperbolic()) {
    return [n, k](double x) { return unit_sphere_volume(n) * std::pow(0.5 * (k - x * x / k), n); };
  }
  if (model.is_fermi()) {
    const double lam = model.as_fermi().lambda;
    return [n, lam](double x) {
      return unit_sphere_volume(n - 1) * std::pow(0.5 * (1.0 - x * x), n - 1) * 0.5 * (1.0 + x * x) * 2.0 * pi * lam;
    };
  }
  const auto a = model.as_ads();
  const double vol = 8.0 * pi * pi * a.lambda;
  return [a, k, vol](double x) {
    const double t = std::log(k / x);
    if (t > a.table->t_max() - 1.0) return vol;  // r x = 1 + O(x^2) well below double precision
    const auto rv = a.table->eval(t);
    return 4.0 * pi * std::pow(rv[0] * x, 2) * 2.0 * pi * a.lambda * rv[1] * x;
  };
}

/// a1 in Vol(Sigma_x) = Vol(dX, g-hat)(1 + a1 x + O(x^2)), by least squares on
/// x in (0, x_max] with the constant pinned.
inline double fit_level_set_slope(const ModelMetric& model, double x_max = 0.05, int samples = 24) {
  const auto c = collar_data(model);
  const auto vol = level_set_volume(model);
  Eigen::MatrixXd a(samples, 3);
  Eigen::VectorXd b(samples);
  for (int i = 0; i < samples; ++i) {
    const double x = x_max * (i + 1) / samples;
    a(i, 0) = x;
    a(i, 1) = x * x;
    a(i, 2) = x * x * x;
    b[i] = vol(x) / c.boundary_volume - 1.0;
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
  return coef[0];
}

/// Upper bound for cap_p of the sublevel set {x >= eps} with
/// Vol(Sigma_x) ~ Vol (1 + a1 x): the leading Vol (n/(p-1))^{p-1} eps^{-n}
/// plus the first subleading correction.
inline double collar_cap_upper(double boundary_volume, int n, double p, double eps, double a1 = 0.0,
                               double collar_height = std::numeric_limits<double>::infinity()) {
  detail::check_p(p, "collar_cap_upper");
  if (!(eps > 0.0)) throw DomainError("collar_cap_upper: eps must be positive");
  if (eps >= collar_height) throw DomainError("collar_cap_upper: eps must be below the collar height");
  const double m = n / (p - 1.0);
  // int_0^eps x^{m-1} (1 + a1 x)^{1/(1-p)} dx ~ eps^m/m - a1/(p-1) eps^{m+1}/(m+1)
  const double i = std::pow(eps, m) / m - a1 / (p - 1.0) * std::pow(eps, m + 1.0) / (m + 1.0);
  return boundary_volume * std::pow(i, 1.0 - p);
}

inline double collar_cap_upper(const ModelMetric& model, double p, double eps) {
  const auto c = collar_data(model);
  return collar_cap_upper(c.boundary_volume, model.n(), p, eps, fit_level_set_slope(model), c.delta);
}

/// The sublevel-set upper bound evaluated with the exact level-set volumes of the model.
inline double collar_cap_exact(const ModelMetric& model, double p, double eps) {
  detail::check_p(p, "collar_cap_exact");
  const auto c = collar_data(model);
  if (!(eps > 0.0) || eps >= c.delta) throw DomainError("collar_cap_exact: eps must lie in (0, delta)");
  const int n = model.n();
  const double m = n / (p - 1.0);
  const auto vol = level_set_volume(model);
  // x = eps y; x^{m-1} Vol^{1/(1-p)} dx = eps^m y^{m-1} Vol(eps y)^{1/(1-p)} dy
  auto f = [&](double y) { return std::pow(y, m - 1.0) * std::pow(vol(eps * y), 1.0 / (1.0 - p)); };
  const double i = integrate(f, 0.0, 1.0, 1e-12).value;
  return std::pow(eps, -n) * std::pow(i, 1.0 - p);
}

}  // namespace ahgeo
