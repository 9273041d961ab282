#pragma once

// Finite-difference curvature of the model metrics in diagonal charts.
//
// Each model is written in hyperspherical coordinates where the metric is
// diagonal, g = diag(g_0(x), ..., g_{D-1}(x)). Christoffel symbols come from
// central differences of g with step h, and the Riemann tensor from central
// differences of the Christoffel symbols, so the error is O(h^2) before the
// Richardson step and O(h^4) after it.
// The metrics are invariant under rotations of the sphere factors, so the
// chart is always centered on the equator of each sphere where the chart is
// regular; this loses no generality.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ahgeo/models.hpp"

namespace ahgeo {

using DiagonalMetric = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

namespace detail {

inline Eigen::VectorXd checked_metric(const DiagonalMetric& g, const Eigen::VectorXd& x) {
  Eigen::VectorXd v = g(x);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0) || !std::isfinite(v[i])) {
      throw NumericError("curvature: metric sample lost positivity; reduce the step",
                         "component " + std::to_string(i));
    }
  }
  return v;
}

// Gamma[k](i, j) = Gamma^k_{ij} at x.
inline std::vector<Eigen::MatrixXd> christoffel(const DiagonalMetric& g, const Eigen::VectorXd& x,
                                                double h) {
  const auto d = x.size();
  const Eigen::VectorXd g0 = checked_metric(g, x);
  Eigen::MatrixXd dg(d, d);  // dg(a, i) = d_a g_ii
  for (Eigen::Index a = 0; a < d; ++a) {
    Eigen::VectorXd xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    dg.row(a) = (checked_metric(g, xp) - checked_metric(g, xm)).transpose() / (2.0 * h);
  }
  std::vector<Eigen::MatrixXd> gam(d, Eigen::MatrixXd::Zero(d, d));
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        double s = 0.0;
        if (j == k) s += dg(i, k);
        if (i == k) s += dg(j, k);
        if (i == j) s -= dg(k, i);
        gam[k](i, j) = 0.5 * s / g0[k];
      }
    }
  }
  return gam;
}

}  // namespace detail

/// Riemann tensor R^l_{ijk} (components of R(d_i, d_j) d_k along d_l),
/// stored as riem[l][i](j, k).
struct RiemannSample {
  Eigen::VectorXd metric;
  std::vector<std::vector<Eigen::MatrixXd>> riem;

  Eigen::MatrixXd ricci() const {
    const auto d = metric.size();
    Eigen::MatrixXd ric = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) ric += riem[i][i];
    return ric;
  }

  /// Sectional curvature of the coordinate plane spanned by d_i, d_j.
  double sectional(int i, int j) const { return riem[i][i](j, j) / metric[j]; }
};

namespace detail {

inline RiemannSample riemann_single(const DiagonalMetric& g, const Eigen::VectorXd& x, double h) {
  const auto d = x.size();
  const auto gam = detail::christoffel(g, x, h);
  std::vector<std::vector<Eigen::MatrixXd>> dgam(d);  // dgam[a][k] = d_a Gamma^k
  for (Eigen::Index a = 0; a < d; ++a) {
    Eigen::VectorXd xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    const auto gp = detail::christoffel(g, xp, h);
    const auto gm = detail::christoffel(g, xm, h);
    for (Eigen::Index k = 0; k < d; ++k) dgam[a].push_back((gp[k] - gm[k]) / (2.0 * h));
  }
  RiemannSample out;
  out.metric = detail::checked_metric(g, x);
  out.riem.assign(d, std::vector<Eigen::MatrixXd>(d, Eigen::MatrixXd::Zero(d, d)));
  for (Eigen::Index l = 0; l < d; ++l) {
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index k = 0; k < d; ++k) {
          double s = dgam[i][l](j, k) - dgam[j][l](i, k);
          for (Eigen::Index q = 0; q < d; ++q) s += gam[l](i, q) * gam[q](j, k) - gam[l](j, q) * gam[q](i, k);
          out.riem[l][i](j, k) = s;
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// Riemann tensor by nested central differences with step h. With
/// `richardson` the steps h and h/2 are combined to cancel the h^2 term.
inline RiemannSample riemann_fd(const DiagonalMetric& g, const Eigen::VectorXd& x, double h,
                                bool richardson = true) {
  auto coarse = detail::riemann_single(g, x, h);
  if (!richardson) return coarse;
  auto fine = detail::riemann_single(g, x, 0.5 * h);
  for (std::size_t l = 0; l < fine.riem.size(); ++l) {
    for (std::size_t i = 0; i < fine.riem.size(); ++i) {
      fine.riem[l][i] = (4.0 * fine.riem[l][i] - coarse.riem[l][i]) / 3.0;
    }
  }
  return fine;
}

/// Diagonal chart of the model and the chart point representing `point`.
/// Coordinates: radial first (t, or r for AdS), then the circle angle where
/// present, then hyperspherical angles of the sphere factor (all pi/2).
struct ModelChart {
  DiagonalMetric metric;
  Eigen::VectorXd x;
};

inline ModelChart model_chart(const ModelMetric& model, const ModelPoint& point) {
  auto sphere_part = [](Eigen::VectorXd& g, const Eigen::VectorXd& x, Eigen::Index first, double radius2) {
    double f = radius2;
    for (Eigen::Index i = first; i < x.size(); ++i) {
      g[i] = f;
      const double s = std::sin(x[i]);
      f *= s * s;
    }
  };
  ModelChart c;
  if (model.is_hyperbolic()) {
    const int n = model.n();
    c.x = Eigen::VectorXd::Constant(n + 1, pi / 2);
    c.x[0] = point.t;
    c.metric = [sphere_part](const Eigen::VectorXd& x) {
      Eigen::VectorXd g(x.size());
      g[0] = 1.0;
      const double s = std::sinh(x[0]);
      sphere_part(g, x, 1, s * s);
      return g;
    };
  } else if (model.is_fermi()) {
    const int n = model.n();
    const double lam = model.as_fermi().lambda;
    c.x = Eigen::VectorXd::Constant(n + 1, pi / 2);
    c.x[0] = point.t;
    c.x[1] = point.angle;
    c.metric = [sphere_part, lam](const Eigen::VectorXd& x) {
      Eigen::VectorXd g(x.size());
      g[0] = 1.0;
      const double ch = std::cosh(x[0]) * lam;
      g[1] = ch * ch;
      const double s = std::sinh(x[0]);
      sphere_part(g, x, 2, s * s);
      return g;
    };
  } else {
    const auto& a = model.as_ads();
    c.x = Eigen::VectorXd::Constant(4, pi / 2);
    c.x[0] = a.table->eval(point.t)[0];
    c.x[1] = point.angle;
    const double rm = a.horizon, lam = a.lambda;
    c.metric = [sphere_part, rm, lam](const Eigen::VectorXd& x) {
      Eigen::VectorXd g(4);
      const double v = ads::potential_from_horizon(rm, x[0] - rm);
      g[0] = 1.0 / v;
      g[1] = lam * lam * v;
      sphere_part(g, x, 2, x[0] * x[0]);
      return g;
    };
  }
  return c;
}

/// max |Ric + n g| over entries in a g-orthonormal frame, by finite
/// differences with step h in the chart of `model_chart`.
inline double ricci_deviation(const ModelMetric& model, const ModelPoint& point, double step = 1e-3) {
  validate(model, point);
  if (!(step > 0.0)) throw DomainError("ricci_deviation: step must be positive");
  const auto chart = model_chart(model, point);
  const double interior = model.is_ads() ? chart.x[0] - model.as_ads().horizon : point.t;
  if (interior <= step) throw DomainError("ricci_deviation: point must lie further than the step from the core");
  const auto sample = riemann_fd(chart.metric, chart.x, step);
  const Eigen::MatrixXd ric = sample.ricci();
  const int n = model.n();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < ric.rows(); ++i) {
    for (Eigen::Index j = 0; j < ric.cols(); ++j) {
      double e = ric(i, j) / std::sqrt(sample.metric[i] * sample.metric[j]);
      if (i == j) e += n;
      worst = std::max(worst, std::abs(e));
    }
  }
  return worst;
}

/// Sectional curvatures of all coordinate 2-planes at `point`.
inline std::vector<double> coordinate_sectional_curvatures(const ModelMetric& model, const ModelPoint& point,
                                                           double step = 1e-3) {
  validate(model, point);
  const auto chart = model_chart(model, point);
  const auto sample = riemann_fd(chart.metric, chart.x, step);
  std::vector<double> out;
  const auto d = static_cast<int>(chart.x.size());
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) out.push_back(sample.sectional(i, j));
  }
  return out;
}

}  // namespace ahgeo
