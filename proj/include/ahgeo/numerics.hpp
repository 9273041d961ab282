#pragma once

// Shared numerical plumbing: error types, adaptive quadrature and root finding.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

namespace ahgeo {

inline constexpr double pi = std::numbers::pi;

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed to reach its target; `diagnostics` carries
/// whatever partial information is useful to the caller.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::string diagnostics = {})
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod (7/15) on [a, b]; either end may be infinite.
template <class F>
QuadResult integrate(F&& f, double a, double b, double rel_tol = 1e-12,
                     unsigned max_depth = 15) {
  double err = 0.0;
  double l1 = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      std::forward<F>(f), a, b, max_depth, rel_tol, &err, &l1);
  if (!std::isfinite(v)) {
    throw NumericError("quadrature produced a non-finite value",
                       "interval [" + std::to_string(a) + ", " + std::to_string(b) + "]");
  }
  (void)l1;
  return {v, err};
}

/// Fixed-order Gauss-Legendre rule mapped to [a, b].
template <unsigned Points, class F>
double gauss_legendre(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, Points>::integrate(std::forward<F>(f), a, b);
}

namespace detail {

template <unsigned N>
void expand_gauss_rule(std::vector<double>& x, std::vector<double>& w) {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& a = G::abscissa();
  const auto& c = G::weights();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) {
      x.push_back(0.0);
      w.push_back(c[i]);
    } else {
      x.push_back(-a[i]);
      w.push_back(c[i]);
      x.push_back(a[i]);
      w.push_back(c[i]);
    }
  }
}

}  // namespace detail

/// Nodes and weights of the Gauss-Legendre rule on [-1, 1] for a run-time
/// order in {4, 6, 8, 10, 12, 16, 20, 24, 32}.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre_rule(int order) {
  std::vector<double> x, w;
  switch (order) {
    case 4: detail::expand_gauss_rule<4>(x, w); break;
    case 6: detail::expand_gauss_rule<6>(x, w); break;
    case 8: detail::expand_gauss_rule<8>(x, w); break;
    case 10: detail::expand_gauss_rule<10>(x, w); break;
    case 12: detail::expand_gauss_rule<12>(x, w); break;
    case 16: detail::expand_gauss_rule<16>(x, w); break;
    case 20: detail::expand_gauss_rule<20>(x, w); break;
    case 24: detail::expand_gauss_rule<24>(x, w); break;
    case 32: detail::expand_gauss_rule<32>(x, w); break;
    default: throw DomainError("gauss_legendre_rule: unsupported order " + std::to_string(order));
  }
  return {x, w};
}

/// Root of a function with a sign change on [lo, hi]: a few bisections,
/// then Newton steps, falling back to bisection whenever a Newton step leaves
/// the current bracket. `fdf` returns the pair (f(x), f'(x)).
template <class FdF>
double bracketed_newton(FdF&& fdf, double lo, double hi, double abs_tol = 1e-14,
                        int max_iter = 200) {
  double flo = fdf(lo).first;
  const double fhi = fdf(hi).first;
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) {
    throw NumericError("root not bracketed",
                       "f(lo)=" + std::to_string(flo) + " f(hi)=" + std::to_string(fhi));
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    const auto [fx, dfx] = fdf(x);
    if (fx == 0.0) return x;
    if ((fx > 0) == (flo > 0)) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
    }
    if (hi - lo <= abs_tol) return 0.5 * (lo + hi);
    double next = x - fx / dfx;
    if (it < 8 || !std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= abs_tol) return next;
    x = next;
  }
  throw NumericError("bracketed Newton did not converge",
                     "bracket [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

/// Root of a scalar function with a sign change on [lo, hi] (TOMS 748).
template <class F>
double bracketed_root(F&& f, double lo, double hi, double abs_tol = 1e-14,
                      std::uintmax_t max_iter = 200) {
  std::uintmax_t iters = max_iter;
  auto tol = [abs_tol](double a, double b) { return std::abs(b - a) <= abs_tol; };
  const double fl = f(lo);
  const double fh = f(hi);
  if (fl == 0.0) return lo;
  if (fh == 0.0) return hi;
  if ((fl > 0) == (fh > 0)) {
    throw NumericError("root not bracketed",
                       "f(lo)=" + std::to_string(fl) + " f(hi)=" + std::to_string(fh));
  }
  auto r = boost::math::tools::toms748_solve(f, lo, hi, fl, fh, tol, iters);
  if (iters >= max_iter) throw NumericError("TOMS748 did not converge");
  return 0.5 * (r.first + r.second);
}

/// Composite Simpson rule over equally spaced samples (odd count >= 3).
inline double simpson(const std::vector<double>& y, double h) {
  const std::size_t n = y.size();
  if (n < 3 || n % 2 == 0) throw DomainError("simpson needs an odd number (>= 3) of samples");
  double s = y.front() + y.back();
  for (std::size_t i = 1; i + 1 < n; ++i) s += (i % 2 ? 4.0 : 2.0) * y[i];
  return s * h / 3.0;
}

}  // namespace ahgeo
