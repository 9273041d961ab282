#pragma once

// Geodesics of the reduced warped metric
//
//     dt^2 + F(t)^2 dphi^2 + G(t)^2 dpsi^2
//
// where phi is the circle angle and psi the arc angle along a great circle of
// the sphere factor (a geodesic of a warped product projects to a great circle
// of the sphere factor, so this 3-dimensional reduction loses nothing).
// a = F^2 phi' and b = G^2 psi' are conserved; the radial motion obeys
// t'' = a^2 F'/F^3 + b^2 G'/G^3.
//
// t is signed: F and G are extended by their parity across t = 0, so a
// geodesic with a = 0 (resp. b = 0) may run through the axis where F (resp. G)
// vanishes. A point with t < 0 is the point |t| with phi + pi (resp. psi + pi).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include <boost/numeric/odeint.hpp>
#include <Eigen/Dense>

#include "ahgeo/models.hpp"

namespace ahgeo {

/// F, F', G, G' at signed t.
struct WarpValues {
  double f = 0.0, df = 0.0, g = 0.0, dg = 0.0;
};

struct ReducedWarp {
  std::function<WarpValues(double)> eval;
  bool has_circle = true;
  bool f_odd = false;  // F vanishes at t = 0 (AdS axis)
  bool g_odd = true;   // G vanishes at t = 0 (hyperbolic pole, Fermi core)
};

inline ReducedWarp reduced_warp(const ModelMetric& model) {
  ReducedWarp w;
  if (model.is_hyperbolic()) {
    w.has_circle = false;
    w.eval = [](double t) { return WarpValues{1.0, 0.0, std::sinh(t), std::cosh(t)}; };
  } else if (model.is_fermi()) {
    const double lam = model.as_fermi().lambda;
    w.eval = [lam](double t) { return WarpValues{lam * std::cosh(t), lam * std::sinh(t), std::sinh(t), std::cosh(t)}; };
  } else {
    const auto& a = model.as_ads();
    auto table = a.table;
    const double lam = a.lambda;
    w.f_odd = true;
    w.g_odd = false;
    w.eval = [table, lam](double t) {
      const auto [r, sv, half_v1] = table->eval(t);
      const double s = t < 0 ? -1.0 : 1.0;
      return WarpValues{s * lam * sv, lam * half_v1, r, s * sv};
    };
  }
  return w;
}

/// Position and radial momentum along a reduced geodesic.
struct ReducedState {
  double t = 0.0;
  double pt = 0.0;
  double phi = 0.0;
  double psi = 0.0;
};

/// Initial data: unit velocity components in the orthonormal frame
/// (d_t, d_phi / F, d_psi / G) at radial coordinate t0.
struct ShotStart {
  double t0 = 0.0;
  double ct = 1.0, cphi = 0.0, cpsi = 0.0;
};

struct ShotMomenta {
  double a = 0.0, b = 0.0;
};

inline ShotMomenta momenta(const ReducedWarp& w, const ShotStart& s) {
  const auto v = w.eval(s.t0);
  return {w.has_circle ? v.f * s.cphi : 0.0, v.g * s.cpsi};
}

namespace detail {

struct ReducedRhs {
  const ReducedWarp* w;
  double a, b;
  void operator()(const std::array<double, 4>& x, std::array<double, 4>& dx, double) const {
    const auto v = w->eval(x[0]);
    dx[0] = x[1];
    double acc = 0.0;
    double dphi = 0.0, dpsi = 0.0;
    if (a != 0.0) {
      acc += a * a * v.df / (v.f * v.f * v.f);
      dphi = a / (v.f * v.f);
    }
    if (b != 0.0) {
      acc += b * b * v.dg / (v.g * v.g * v.g);
      dpsi = b / (v.g * v.g);
    }
    dx[1] = acc;
    dx[2] = dphi;
    dx[3] = dpsi;
  }
};

}  // namespace detail

struct FlowOptions {
  double tol = 1e-12;
};

/// Follow the geodesic for arc length L. `observer(s, state)` is called at
/// the requested sample arclengths if provided.
inline ReducedState flow(const ReducedWarp& w, const ShotStart& s, double length, FlowOptions opt = {}) {
  namespace odeint = boost::numeric::odeint;
  const auto mom = momenta(w, s);
  std::array<double, 4> x{s.t0, s.ct, 0.0, 0.0};
  if (length > 0.0) {
    auto stepper = odeint::make_controlled(opt.tol, opt.tol, odeint::runge_kutta_dopri5<std::array<double, 4>>());
    odeint::integrate_adaptive(stepper, detail::ReducedRhs{&w, mom.a, mom.b}, x, 0.0, length,
                               std::min(0.05, length));
  }
  return {x[0], x[1], x[2], x[3]};
}

/// States at equally spaced arclengths 0, L/k, ..., L.
inline std::vector<ReducedState> flow_samples(const ReducedWarp& w, const ShotStart& s, double length, int k,
                                              FlowOptions opt = {}) {
  namespace odeint = boost::numeric::odeint;
  const auto mom = momenta(w, s);
  std::array<double, 4> x{s.t0, s.ct, 0.0, 0.0};
  std::vector<ReducedState> out;
  out.reserve(static_cast<std::size_t>(k) + 1);
  auto stepper = odeint::make_dense_output(opt.tol, opt.tol, odeint::runge_kutta_dopri5<std::array<double, 4>>());
  odeint::integrate_const(stepper, detail::ReducedRhs{&w, mom.a, mom.b}, x, 0.0, length * (1.0 + 1e-12),
                          length / k, [&](const std::array<double, 4>& y, double) {
                            if (out.size() <= static_cast<std::size_t>(k)) out.push_back({y[0], y[1], y[2], y[3]});
                          });
  return out;
}

// ---------------------------------------------------------------------------
// Two-point problem

/// Endpoints in reduced form: p sits at (t1, phi = 0, psi = 0); q at radial
/// coordinate t2, circle offset dphi in (-pi, pi] and great-circle angle
/// alpha in [0, pi] from p's sphere direction.
struct ReducedTarget {
  double t1 = 0.0;
  double t2 = 0.0;
  double dphi = 0.0;
  double alpha = 0.0;
};

struct ShootingResult {
  double length = 0.0;
  double residual = 0.0;
  int iterations = 0;
  ShotStart start;
};

namespace detail {

// Unit direction from the two shooting angles. Where G vanishes at the start
// (pole or core) the sphere factor contributes only radial directions, so the
// psi-component is folded into d_t.
inline ShotStart start_from_angles(const ReducedWarp& w, double t0, double beta, double gamma) {
  ShotStart s;
  s.t0 = t0;
  if (w.has_circle) {
    s.ct = std::cos(beta);
    s.cphi = std::sin(beta) * std::cos(gamma);
    s.cpsi = std::sin(beta) * std::sin(gamma);
  } else {
    s.ct = std::cos(beta);
    s.cpsi = std::sin(beta);
  }
  if (w.g_odd && t0 == 0.0) {
    s.ct = std::sqrt(std::max(0.0, 1.0 - s.cphi * s.cphi));
    s.cpsi = 0.0;
  }
  return s;
}

// Unfold a signed endpoint to (t >= 0, phi, psi).
inline ReducedState unfold(const ReducedWarp& w, ReducedState e) {
  if (e.t < 0) {
    e.t = -e.t;
    if (w.f_odd) e.phi += pi;
    if (w.g_odd) e.psi += pi;
  }
  return e;
}

}  // namespace detail

/// Residual of the two-point problem. Circle coordinates enter through the
/// planar chart (t cos phi, t sin phi) of the (t, phi) half-plane, which
/// stays regular when q approaches the axis; the sphere part is the
/// great-circle mismatch measured in chord form so that psi and psi + 2 pi
/// agree.
inline Eigen::Vector3d shooting_residual(const ReducedWarp& w, const ReducedTarget& tg, const ShotStart& s,
                                         double length, FlowOptions opt = {}) {
  const auto e = detail::unfold(w, flow(w, s, length, opt));
  // The psi-miss changes the length only through the momentum b, which is
  // bounded by the smaller of the two G values; weighting by the larger one
  // would demand more digits than psi carries at far endpoints.
  const double gs = std::max(std::min(std::abs(w.eval(s.t0).g), std::abs(w.eval(tg.t2).g)), 1e-3);
  Eigen::Vector3d r;
  if (w.has_circle) {
    const double d = angle_difference(e.phi, tg.dphi);
    r[0] = e.t * std::cos(d) - tg.t2;
    r[1] = e.t * std::sin(d);
  } else {
    r[0] = e.t - tg.t2;
    r[1] = 0.0;
  }
  r[2] = 2.0 * gs * std::sin(0.5 * (e.psi - tg.alpha));
  return r;
}

struct ShootingOptions {
  int scan = 16;          // scan grid per shooting angle
  int candidates = 6;     // Newton starts taken from the scan
  int soft_candidates = 3;  // extra starts ranked with capped angular weights
  int max_iter = 60;
  double tol = 1e-11;     // on the residual norm, per unit of length bound
  FlowOptions flow;
};

namespace detail {

// Damped Newton on the shooting unknowns with a forward-difference Jacobian.
template <int K, class Residual>
bool newton_solve(Residual&& res, Eigen::Matrix<double, K, 1>& u, double tol, int max_iter, int& iters,
                  double& final_norm) {
  using Vec = Eigen::Matrix<double, K, 1>;
  using Mat = Eigen::Matrix<double, K, K>;
  Vec r = res(u);
  double nr = r.norm();
  for (iters = 0; iters < max_iter && nr > tol; ++iters) {
    Mat jac;
    for (int j = 0; j < K; ++j) {
      Vec up = u;
      const double h = 1e-7 * std::max(1.0, std::abs(u[j]));
      up[j] += h;
      jac.col(j) = (res(up) - r) / h;
    }
    Vec step = jac.colPivHouseholderQr().solve(-r);
    if (!step.allFinite()) return false;
    double damp = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      Vec trial = u + damp * step;
      Vec rt = res(trial);
      if (rt.allFinite() && rt.norm() < nr) {
        u = trial;
        r = rt;
        nr = rt.norm();
        improved = true;
        break;
      }
      damp *= 0.5;
    }
    if (!improved) break;
  }
  final_norm = nr;
  return nr <= tol;
}

}  // namespace detail

/// Shortest connecting geodesic among those reached from a scan of initial
/// directions, each polished by damped Newton on (beta, gamma, L).
/// Requires a start point off the singular set of the warp (t1 > 0), or t1 = 0
/// where only G vanishes (radial start, handled through beta).
inline ShootingResult shoot_general(const ReducedWarp& w, const ReducedTarget& tg, double length_bound,
                                    ShootingOptions opt = {}) {
  const bool circ = w.has_circle;
  const auto v2 = w.eval(tg.t2);
  // Scan for starting guesses: closest approach of each scanned geodesic.
  struct Cand {
    double miss, beta, gamma, len;
  };
  const int samples = 64;
  // Closest approach of one direction, so that the Newton starts come from
  // distinct geodesics. The soft measure caps the angular weights at 1: with
  // the true weights F(t2), G(t2) ~ e^{t2} every direction looks closest near
  // the start, and the scan misses targets far from the core.
  auto probe = [&](double beta, double gamma) -> std::optional<std::array<Cand, 2>> {
    FlowOptions coarse;
    coarse.tol = 1e-8;
    std::vector<ReducedState> path;
    try {
      path = flow_samples(w, detail::start_from_angles(w, tg.t1, beta, gamma), length_bound, samples, coarse);
    } catch (const DomainError&) {
      return std::nullopt;  // left the tabulated range of the warp
    }
    const double wf = std::max(v2.f, 1e-3), wg = std::max(v2.g, 1e-3);
    const double sf = std::min(wf, 1.0), sg = std::min(wg, 1.0);
    const Cand none{std::numeric_limits<double>::infinity(), beta, gamma, 0.0};
    std::array<Cand, 2> c{none, none};
    for (std::size_t k = 1; k < path.size(); ++k) {
      const auto e = detail::unfold(w, path[k]);
      const double dt = e.t - tg.t2;
      const double dp = circ ? angle_difference(e.phi, tg.dphi) : 0.0;
      const double ds = 2.0 * std::sin(0.5 * (e.psi - tg.alpha));
      const double len = length_bound * static_cast<double>(k) / samples;
      const double hard = dt * dt + dp * dp * wf * wf + ds * ds * wg * wg;
      const double soft = dt * dt + dp * dp * sf * sf + ds * ds * sg * sg;
      if (hard < c[0].miss) c[0] = {hard, beta, gamma, len};
      if (soft < c[1].miss) c[1] = {soft, beta, gamma, len};
    }
    return c;
  };
  auto by_miss = [](const Cand& x, const Cand& y) { return x.miss < y.miss; };
  std::vector<Cand> cands, soft;
  const int nb = opt.scan, ng = circ ? 2 * opt.scan : 1;
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j < ng; ++j) {
      const double gamma = circ ? -pi + 2.0 * pi * (j + 0.5) / ng : 0.0;
      if (auto c = probe(pi * (i + 0.5) / nb, gamma)) {
        cands.push_back((*c)[0]);
        soft.push_back((*c)[1]);
      }
    }
  }
  std::sort(cands.begin(), cands.end(), by_miss);
  std::sort(soft.begin(), soft.end(), by_miss);
  if (static_cast<int>(cands.size()) > opt.candidates) cands.resize(opt.candidates);
  for (int k = 0; k < std::min<int>(opt.soft_candidates, static_cast<int>(soft.size())); ++k) cands.push_back(soft[k]);

  ShootingResult best;
  best.length = std::numeric_limits<double>::infinity();
  double best_res = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) {
    int iters = 0;
    double nr = 0.0;
    bool ok = false;
    ShotStart s;
    double len = 0.0;
    if (circ) {
      Eigen::Vector3d u(c.beta, c.gamma, c.len);
      auto res = [&](const Eigen::Vector3d& x) {
        if (x[2] < 0 || x[2] > 2.0 * length_bound) return Eigen::Vector3d::Constant(1e3).eval();
        try {
          return shooting_residual(w, tg, detail::start_from_angles(w, tg.t1, x[0], x[1]), x[2], opt.flow);
        } catch (const DomainError&) {
          return Eigen::Vector3d::Constant(1e3).eval();
        }
      };
      ok = detail::newton_solve<3>(res, u, opt.tol * (1.0 + length_bound), opt.max_iter, iters, nr);
      s = detail::start_from_angles(w, tg.t1, u[0], u[1]);
      len = u[2];
    } else {
      Eigen::Vector2d u(c.beta, c.len);
      auto res = [&](const Eigen::Vector2d& x) {
        if (x[1] < 0 || x[1] > 2.0 * length_bound) return Eigen::Vector2d::Constant(1e3).eval();
        try {
          const auto r = shooting_residual(w, tg, detail::start_from_angles(w, tg.t1, x[0], 0.0), x[1], opt.flow);
          return Eigen::Vector2d(r[0], r[2]);
        } catch (const DomainError&) {
          return Eigen::Vector2d::Constant(1e3).eval();
        }
      };
      ok = detail::newton_solve<2>(res, u, opt.tol * (1.0 + length_bound), opt.max_iter, iters, nr);
      s = detail::start_from_angles(w, tg.t1, u[0], 0.0);
      len = u[1];
    }
    best_res = std::min(best_res, nr);
    if (ok && len < best.length) {
      best.length = len;
      best.residual = nr;
      best.iterations = iters;
      best.start = s;
    }
  }
  if (!std::isfinite(best.length)) {
    std::ostringstream diag;
    diag << "t1=" << tg.t1 << " t2=" << tg.t2 << " dphi=" << tg.dphi << " alpha=" << tg.alpha
         << " best residual=" << best_res;
    throw NumericError("geodesic shooting did not converge", diag.str());
  }
  return best;
}

/// Start on the axis (F(t1) = 0, t1 = 0): the connecting geodesic has a = 0
/// and lies in the plane through the axis containing the target. Unknowns
/// (beta, L) with initial velocity cos(beta) d_t + sin(beta) d_psi / G; a
/// negative endpoint t is the mirror half-plane, hence the |t|.
inline ShootingResult shoot_from_axis(const ReducedWarp& w, const ReducedTarget& tg, double length_bound,
                                      ShootingOptions opt = {}) {
  ReducedWarp planar = w;
  planar.has_circle = false;
  planar.f_odd = false;
  const double gs = std::max(std::min(std::abs(w.eval(0.0).g), std::abs(w.eval(tg.t2).g)), 1e-3);
  auto start = [&](double beta) { return detail::start_from_angles(planar, 0.0, beta, 0.0); };
  struct Cand {
    double miss, beta, len;
  };
  std::vector<Cand> cands;
  const int nb = 4 * opt.scan;
  for (int i = 0; i < nb; ++i) {
    const double beta = pi * (i + 0.5) / nb;
    FlowOptions coarse;
    coarse.tol = 1e-8;
    std::vector<ReducedState> path;
    try {
      path = flow_samples(planar, start(beta), length_bound, 64, coarse);
    } catch (const DomainError&) {
      continue;
    }
    Cand c{std::numeric_limits<double>::infinity(), beta, 0.0};
    for (std::size_t k = 1; k < path.size(); ++k) {
      const double dt = std::abs(path[k].t) - tg.t2;
      const double ds = 2.0 * gs * std::sin(0.5 * (path[k].psi - tg.alpha));
      const double miss = dt * dt + ds * ds;
      if (miss < c.miss) c = {miss, beta, length_bound * static_cast<double>(k) / 64};
    }
    cands.push_back(c);
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.miss < y.miss; });

  ShootingResult best;
  best.length = std::numeric_limits<double>::infinity();
  double best_res = std::numeric_limits<double>::infinity();
  for (int c = 0; c < std::min<int>(opt.candidates, static_cast<int>(cands.size())); ++c) {
    Eigen::Vector2d u(cands[c].beta, cands[c].len);
    auto res = [&](const Eigen::Vector2d& x) {
      if (x[1] < 0 || x[1] > 2.0 * length_bound) return Eigen::Vector2d::Constant(1e3).eval();
      try {
        const auto e = flow(planar, start(x[0]), x[1], opt.flow);
        return Eigen::Vector2d(std::abs(e.t) - tg.t2, 2.0 * gs * std::sin(0.5 * (e.psi - tg.alpha)));
      } catch (const DomainError&) {
        return Eigen::Vector2d::Constant(1e3).eval();
      }
    };
    int iters = 0;
    double nr = 0.0;
    const bool ok = detail::newton_solve<2>(res, u, opt.tol * (1.0 + length_bound), opt.max_iter, iters, nr);
    best_res = std::min(best_res, nr);
    if (ok && u[1] < best.length) {
      best.length = u[1];
      best.residual = nr;
      best.iterations = iters;
      best.start = start(u[0]);
    }
  }
  if (!std::isfinite(best.length)) {
    std::ostringstream diag;
    diag << "axis start: t2=" << tg.t2 << " alpha=" << tg.alpha << " best residual=" << best_res;
    throw NumericError("geodesic shooting from the axis did not converge", diag.str());
  }
  return best;
}

}  // namespace ahgeo
