#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ahgeo/collar.hpp"

using namespace ahgeo;

namespace {

std::vector<double> collar_grid() {
  std::vector<double> g;
  for (double t = 0.01; t < 30.0; t *= 1.7) g.push_back(t);
  return g;
}

ModelPoint core_point(const ModelMetric& m, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 2 * pi);
  ModelPoint p = make_point(m, 0.0, ud(rng));
  double s = 0.0;
  for (auto& x : p.direction) {
    x = nd(rng);
    s += x * x;
  }
  for (auto& x : p.direction) x /= std::sqrt(s);
  return p;
}

}  // namespace

TEST(CollarData, Hyperbolic) {
  for (int n : {2, 3, 5}) {
    const auto c = collar_data(ModelMetric::hyperbolic(n));
    EXPECT_EQ(c.delta, 2.0);
    EXPECT_NEAR(c.boundary_volume, unit_sphere_volume(n), 1e-14);
    EXPECT_EQ(c.diameter, 0.0);
  }
  const auto h = ModelMetric::hyperbolic(2);
  EXPECT_NEAR(defining_function(h, 0.0), 2.0, 0.0);
  // Poincare ball: x = 2(1 - |z|)/(1 + |z|) with |z| = tanh(t/2).
  const double z = std::tanh(0.35);
  EXPECT_NEAR(defining_function(h, 0.7), 2 * (1 - z) / (1 + z), 1e-15);
}

TEST(CollarData, Fermi) {
  const auto c = collar_data(ModelMetric::fermi(2, 1.0));
  EXPECT_EQ(c.delta, 1.0);
  EXPECT_NEAR(c.boundary_volume, pi * pi, 1e-13);
  EXPECT_NEAR(c.diameter, pi, 1e-15);
  const auto c3 = collar_data(ModelMetric::fermi(3, 0.4));
  EXPECT_NEAR(c3.boundary_volume, 0.125 * 4 * pi * 2 * pi * 0.4, 1e-13);
}

TEST(CollarData, FermiCoreDiameterBySampling) {
  std::mt19937 rng(11);
  for (double lam : {0.3, 1.0}) {
    const auto f = ModelMetric::fermi(2, lam);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) worst = std::max(worst, distance(f, core_point(f, rng), core_point(f, rng)));
    const double d = collar_data(f).diameter;
    EXPECT_LE(worst, d + 1e-12);
    EXPECT_NEAR(distance(f, make_point(f, 0.0, 0.0), make_point(f, 0.0, pi)), d, 1e-12);
  }
}

TEST(CollarData, Ads) {
  const auto a = ModelMetric::ads(1.0);
  const auto c = collar_data(a);
  const auto& ad = a.as_ads();
  EXPECT_NEAR(c.delta, 1.0 / ad.scale, 1e-15);
  EXPECT_NEAR(c.boundary_volume, 8 * pi * pi * ad.lambda, 1e-12);
  // The core sphere is totally geodesic; antipodes are pi r_m apart.
  EXPECT_NEAR(c.diameter, pi * ad.horizon, 1e-6);
  std::mt19937 rng(3);
  for (int i = 0; i < 20; ++i) EXPECT_LE(distance(a, core_point(a, rng), core_point(a, rng)), c.diameter + 1e-6);
  // Boundary metric: r / x -> 1 and lambda sqrt(V) / x -> lambda at large t.
  const double t = 25.0;
  const auto rv = ad.table->eval(t);
  EXPECT_NEAR(rv[0] * defining_function(a, t), 1.0, 1e-10);
  EXPECT_NEAR(rv[1] * defining_function(a, t), 1.0, 1e-10);
}

TEST(CollarData, UnitGradient) {
  for (const auto& m : {ModelMetric::hyperbolic(2), ModelMetric::fermi(2, 1.0), ModelMetric::ads(1.0),
                        ModelMetric::ads(0.01)}) {
    EXPECT_LT(collar_gradient_defect(m, collar_grid()), 1e-8);
  }
  EXPECT_THROW(collar_gradient_defect(ModelMetric::hyperbolic(2), {0.0}), DomainError);
  EXPECT_THROW(defining_function(ModelMetric::hyperbolic(2), -1.0), DomainError);
}

TEST(CollarData, SublevelConsistency) {
  for (const auto& m : {ModelMetric::hyperbolic(3), ModelMetric::fermi(2, 0.5), ModelMetric::ads(1.0)}) {
    const auto c = collar_data(m);
    const double expect = std::pow(2.0 / c.delta, m.n()) * c.boundary_volume;
    EXPECT_NEAR(relvol_compact(m, CompactSetDescriptor::sublevel_set(c.delta)).value, expect, 1e-12 * expect);
    EXPECT_GT(relvol_compact(m, CompactSetDescriptor::sublevel_set(0.5 * c.delta)).value, expect);
  }
}

TEST(HeightBounds, HyperbolicEqualities) {
  for (int n : {2, 3}) {
    const auto h = ModelMetric::hyperbolic(n);
    const auto r = audit_height_bounds(h, make_point(h, 0.0));
    ASSERT_EQ(r.checks.size(), 2u);
    EXPECT_TRUE(r.pass());
    for (const auto& c : r.checks) {
      EXPECT_TRUE(c.equality) << c.inequality_id;
      EXPECT_NEAR(c.slack, 0.0, 1e-6);
    }
    EXPECT_NEAR(r.checks[0].mid, unit_sphere_volume(n), 1e-12);
    EXPECT_NEAR(r.checks[1].lhs, 2.0, 1e-15);
    EXPECT_NEAR(r.checks[1].rhs, 2.0, 1e-12);
  }
}

TEST(HeightBounds, FermiChain) {
  const auto f = ModelMetric::fermi(2, 1.0);
  const auto r = audit_height_bounds(f, make_point(f, 0.0));
  EXPECT_TRUE(r.pass());
  const auto& c = r.checks[0];
  EXPECT_NEAR(c.lhs, 4 * pi * std::tanh(pi), 1e-8);
  EXPECT_NEAR(c.mid, 4 * pi * pi, 1e-12);
  EXPECT_NEAR(c.rhs, std::exp(2 * pi) * 4 * pi * std::tanh(pi), 1e-4);
  EXPECT_GT(c.slack, 0.0);
  EXPECT_FALSE(c.equality);
  EXPECT_GT(r.checks[1].slack, 0.0);
  EXPECT_NEAR(r.checks[1].lhs, std::exp(pi), 1e-12);
}

TEST(HeightBounds, AdsChain) {
  const auto a = ModelMetric::ads(1.0);
  const auto r = audit_height_bounds(a, make_point(a, 0.0));
  EXPECT_TRUE(r.pass());
  EXPECT_GT(r.checks[0].slack, 0.0);
}

TEST(HeightBounds, OutsideComplement) {
  const auto f = ModelMetric::fermi(2, 1.0);
  EXPECT_THROW(audit_height_bounds(f, make_point(f, 0.5)), DomainError);
}

TEST(HeightBounds, JsonFields) {
  const auto h = ModelMetric::hyperbolic(2);
  const auto j = audit_height_bounds(h, make_point(h, 0.0)).to_json();
  for (const char* k : {"inequality_id", "lhs", "mid", "rhs", "slack", "pass"}) EXPECT_TRUE(j["checks"][0].contains(k)) << k;
}

TEST(UpperBound, HyperbolicEquality) {
  for (int n : {2, 3}) {
    const auto r = audit_upper_bound(ModelMetric::hyperbolic(n));
    ASSERT_EQ(r.checks.size(), 1u);
    EXPECT_TRUE(r.checks[0].applicable);
    EXPECT_TRUE(r.checks[0].pass);
    EXPECT_TRUE(r.checks[0].equality);
    EXPECT_NEAR(r.checks[0].rhs, 2.0, 1e-12);
  }
  EXPECT_NEAR(sphere_yamabe_constant(2), 2 * 4 * pi, 1e-12);
}

TEST(UpperBound, UnknownYamabe) {
  for (const auto& m : {ModelMetric::fermi(2, 1.0), ModelMetric::ads(1.0)}) {
    const auto r = audit_upper_bound(m);
    ASSERT_EQ(r.checks.size(), 1u);
    EXPECT_FALSE(r.checks[0].applicable);
    EXPECT_EQ(r.checks[0].reason, "boundary Yamabe constant unknown");
    const auto j = r.to_json();
    EXPECT_TRUE(j["checks"][0]["not_applicable"].get<bool>());
    EXPECT_FALSE(j["checks"][0].contains("pass"));
  }
}
