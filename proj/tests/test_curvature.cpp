#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ahgeo/curvature.hpp"

using namespace ahgeo;

TEST(RicciDeviation, HyperbolicIsEinstein) {
  for (int n : {2, 3, 4}) {
    const auto h = ModelMetric::hyperbolic(n);
    for (double t : {0.3, 1.0, 2.5}) {
      EXPECT_LT(ricci_deviation(h, make_point(h, t), 1e-3), 1e-5) << n << " " << t;
    }
  }
}

TEST(RicciDeviation, FermiQuotientIsLocallyHyperbolic) {
  const auto f = ModelMetric::fermi(2, 1.0);
  EXPECT_LT(ricci_deviation(f, make_point(f, 1.0, 0.4), 1e-3), 1e-5);
  const auto f3 = ModelMetric::fermi(3, 0.3);
  EXPECT_LT(ricci_deviation(f3, make_point(f3, 0.7, 2.0), 1e-3), 1e-5);
}

TEST(RicciDeviation, AdsSchwarzschildIsEinstein) {
  const auto a = ModelMetric::ads(1.0);
  const double t = ads_t_of_r(1.0, 2.0);
  EXPECT_LT(ricci_deviation(a, make_point(a, t), 1e-3), 1e-4);
}

TEST(RicciDeviation, DetectsANonEinsteinMetric) {
  // Round product S^2 x R is not Einstein; the machinery must see that.
  DiagonalMetric g = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd v(3);
    v << 1.0, 1.0, std::sin(x[1]) * std::sin(x[1]);
    return v;
  };
  Eigen::VectorXd x(3);
  x << 0.0, pi / 2, 0.0;
  const auto s = riemann_fd(g, x, 1e-3);
  const Eigen::MatrixXd ric = s.ricci();
  EXPECT_NEAR(ric(0, 0), 0.0, 1e-6);
  EXPECT_NEAR(ric(1, 1), 1.0, 1e-6);
  EXPECT_NEAR(s.sectional(1, 2), 1.0, 1e-6);
}

TEST(RicciDeviation, Guards) {
  const auto h = ModelMetric::hyperbolic(2);
  EXPECT_THROW(ricci_deviation(h, make_point(h, 1e-4), 1e-3), DomainError);
  const auto a = ModelMetric::ads(1.0);
  EXPECT_THROW(ricci_deviation(a, make_point(a, 0.0), 1e-3), DomainError);
}

TEST(SectionalCurvature, AdsBoundsAtRandomPoints) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> tt(0.2, 4.0);
  for (double m : {0.1, 1.0, 3.0}) {
    const auto a = ModelMetric::ads(m);
    for (int k = 0; k < 5; ++k) {
      const auto p = make_point(a, tt(rng));
      const double r = a.as_ads().table->eval(p.t)[0];
      const double lo = -1.0 - m / (r * r * r), hi = -1.0 + 2.0 * m / (r * r * r);
      for (double kk : coordinate_sectional_curvatures(a, p, 1e-3)) {
        EXPECT_GE(kk, lo - 1e-4);
        EXPECT_LE(kk, hi + 1e-4);
      }
    }
  }
}

TEST(SectionalCurvature, ConstantOnHyperbolicModels) {
  const auto f = ModelMetric::fermi(3, 0.8);
  for (double k : coordinate_sectional_curvatures(f, make_point(f, 1.2), 1e-3)) EXPECT_NEAR(k, -1.0, 1e-5);
}
