#pragma once

// Audits of the collar height inequalities against computed relative volumes.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ahgeo/compactification.hpp"
#include "ahgeo/relvol.hpp"

namespace ahgeo {

/// Y(S^n, [g_S]) = n (n-1) omega_n^{2/n}. The only Yamabe constant we know.
inline double sphere_yamabe_constant(int n) {
  return n * (n - 1.0) * std::pow(unit_sphere_volume(n), 2.0 / n);
}

/// Boundary Yamabe constant if known: only the round conformal class.
inline std::optional<double> boundary_yamabe_constant(const ModelMetric& model) {
  if (model.is_hyperbolic()) return sphere_yamabe_constant(model.n());
  return std::nullopt;
}

struct InequalityCheck {
  std::string inequality_id;
  double lhs = 0.0, mid = 0.0, rhs = 0.0;
  double slack = 0.0;  // smallest gap along the chain, in the direction of the inequality
  double tolerance = 0.0;
  bool applicable = true;
  bool pass = false;
  bool equality = false;
  std::string reason;

  nlohmann::json to_json() const {
    nlohmann::json j{{"inequality_id", inequality_id}};
    if (!applicable) {
      j["not_applicable"] = true;
      j["reason"] = reason;
      return j;
    }
    j["lhs"] = lhs;
    j["mid"] = mid;
    j["rhs"] = rhs;
    j["slack"] = slack;
    j["tolerance"] = tolerance;
    j["pass"] = pass;
    j["equality"] = equality;
    return j;
  }
};

struct CollarReport {
  std::string model;
  std::vector<InequalityCheck> checks;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const InequalityCheck& c) { return !c.applicable || c.pass; });
  }
  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks) arr.push_back(c.to_json());
    return {{"model", model}, {"pass", pass()}, {"checks", arr}};
  }
};

namespace detail {

inline InequalityCheck chain(std::string id, double lo, double mid, double hi, double tol) {
  InequalityCheck c;
  c.inequality_id = std::move(id);
  c.lhs = lo;
  c.mid = mid;
  c.rhs = hi;
  c.slack = std::min(mid - lo, hi - mid);
  c.tolerance = tol;
  c.pass = c.slack >= -tol;
  c.equality = std::abs(mid - lo) <= tol && std::abs(hi - mid) <= tol;
  return c;
}

}  // namespace detail

/// volume_chain:  A(q) <= (2/delta)^n Vol(dX, g-hat) <= e^{n diam} A(q)
/// height_lower:  delta e^{diam} >= 2 (Vol / A(q))^{1/n} >= 2 (Vol / omega_n)^{1/n}
/// for q in the complement of the collar, which for our defining functions is
/// the core (t = 0).
inline CollarReport audit_height_bounds(const ModelMetric& model, const ModelPoint& q,
                                        RelVolFunction relvol = {}) {
  validate(model, q);
  if (q.t > 1e-12) throw DomainError("audit_height_bounds: q must lie in X \\ X_delta, i.e. on the core (t = 0)");
  if (!relvol) relvol = boundary_route(model);
  const int n = model.n();
  const auto c = collar_data(model);
  const auto a = relvol(q);
  const double wn = unit_sphere_volume(n);
  const double mid = std::pow(2.0 / c.delta, n) * c.boundary_volume;
  const double grow = std::exp(n * c.diameter);
  const double rel = a.error / a.value + 1e-12;

  CollarReport r;
  r.model = model.to_json().dump();
  r.checks.push_back(detail::chain("volume_chain", a.value, mid, grow * a.value, rel * grow * a.value + 1e-12 * mid));

  // Written in increasing order so the chain reads rhs <= mid <= lhs.
  const double top = c.delta * std::exp(c.diameter);
  const double middle = 2.0 * std::pow(c.boundary_volume / a.value, 1.0 / n);
  const double bottom = 2.0 * std::pow(c.boundary_volume / wn, 1.0 / n);
  auto c7 = detail::chain("height_lower", bottom, middle, top, (rel / n + 1e-12) * top);
  std::swap(c7.lhs, c7.rhs);
  r.checks.push_back(c7);
  return r;
}

/// height_upper:  delta <= 2 (Vol / omega_n)^{1/n} (Y(S^n) / Y(dX))^{1/2}. Only
/// evaluated when the boundary Yamabe constant is known.
inline CollarReport audit_upper_bound(const ModelMetric& model) {
  CollarReport r;
  r.model = model.to_json().dump();
  const auto y = boundary_yamabe_constant(model);
  if (!y) {
    InequalityCheck c;
    c.inequality_id = "height_upper";
    c.applicable = false;
    c.reason = "boundary Yamabe constant unknown";
    r.checks.push_back(c);
    return r;
  }
  const int n = model.n();
  const auto cd = collar_data(model);
  const double rhs =
      2.0 * std::pow(cd.boundary_volume / unit_sphere_volume(n), 1.0 / n) * std::sqrt(sphere_yamabe_constant(n) / *y);
  auto c = detail::chain("height_upper", cd.delta, cd.delta, rhs, 1e-12 * rhs);
  c.lhs = cd.delta;
  c.mid = cd.delta;
  r.checks.push_back(c);
  return r;
}

}  // namespace ahgeo
