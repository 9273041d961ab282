#pragma once

// Geodesic defining functions x = k e^{-t} of the three models and the data
// of the induced compactification g = x^2 g+.

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ahgeo/geodesic.hpp"
#include "ahgeo/models.hpp"

namespace ahgeo {

struct CollarData {
  double delta = 0.0;            // sup of x on the collar where |dx|_g = 1
  double boundary_volume = 0.0;  // Vol(dX, g-hat)
  double diameter = 0.0;         // diam(X \ X_delta, g+)
  std::string boundary_metric;

  nlohmann::json to_json() const {
    return {{"delta", delta}, {"boundary_volume", boundary_volume}, {"diameter", diameter},
            {"boundary_metric", boundary_metric}};
  }
};

/// Constant k in x = k e^{-t}. Hyperbolic: the Poincare-ball function
/// 2(1-|z|)/(1+|z|); Fermi: plain e^{-t}; AdS: 1/c with r ~ c e^t, which makes
/// the boundary metric lambda^2 dphi^2 + g_{S^2}.
inline double defining_constant(const ModelMetric& model) {
  if (model.is_hyperbolic()) return 2.0;
  if (model.is_fermi()) return 1.0;
  return 1.0 / model.as_ads().scale;
}

inline double defining_function(const ModelMetric& model, double t) {
  if (!(t >= 0.0)) throw DomainError("defining_function: t must be nonnegative");
  return defining_constant(model) * std::exp(-t);
}

inline CollarData collar_data(const ModelMetric& model) {
  CollarData c;
  const int n = model.n();
  c.delta = defining_constant(model);
  if (model.is_hyperbolic()) {
    c.boundary_volume = unit_sphere_volume(n);
    c.diameter = 0.0;
    c.boundary_metric = "round S^" + std::to_string(n);
  } else if (model.is_fermi()) {
    const double lam = model.as_fermi().lambda;
    c.boundary_volume = std::pow(0.5, n) * unit_sphere_volume(n - 1) * 2.0 * pi * lam;
    c.diameter = lam * pi;
    c.boundary_metric = "(g_S^" + std::to_string(n - 1) + " + g_S^1(lambda)) / 4";
  } else {
    const auto& a = model.as_ads();
    c.boundary_volume = 2.0 * pi * a.lambda * unit_sphere_volume(2);
    // Antipodal points of the core sphere.
    const ModelPoint p{0.0, {1.0, 0.0, 0.0}, 0.0}, q{0.0, {-1.0, 0.0, 0.0}, 0.0};
    c.diameter = distance(model, p, q);
    c.boundary_metric = "lambda^2 dphi^2 + g_S^2";
  }
  return c;
}

/// max | |dx|_g - 1 | over a grid of t in the collar, with |dx|_g = |dx/dt| / x
/// from a central difference of x along the unit-speed t lines.
inline double collar_gradient_defect(const ModelMetric& model, const std::vector<double>& t_grid,
                                     double h = 1e-4) {
  double worst = 0.0;
  for (double t : t_grid) {
    if (!(t > h)) throw DomainError("collar_gradient_defect: grid must stay off the core");
    const double dx = (defining_function(model, t + h) - defining_function(model, t - h)) / (2.0 * h);
    // Richardson with h/2 removes the h^2 term of the difference.
    const double h2 = 0.5 * h;
    const double dx2 = (defining_function(model, t + h2) - defining_function(model, t - h2)) / (2.0 * h2);
    const double d = (4.0 * dx2 - dx) / 3.0;
    worst = std::max(worst, std::abs(std::abs(d) / defining_function(model, t) - 1.0));
  }
  return worst;
}

}  // namespace ahgeo
