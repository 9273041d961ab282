#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "ahgeo/capacity.hpp"

using namespace ahgeo;

namespace {

const RadialProfile& hyperbolic_profile() {
  static const RadialProfile p = [] {
    const auto h = ModelMetric::hyperbolic(2);
    return make_radial_profile(h, make_point(h, 0.0), 30.0);
  }();
  return p;
}

const RadialProfile& fermi_profile() {
  static const RadialProfile p = [] {
    const auto f = ModelMetric::fermi(2, 1.0);
    return make_radial_profile(f, make_point(f, 0.0), 20.0);
  }();
  return p;
}

}  // namespace

TEST(CapClosed, Hyperbolic) {
  EXPECT_NEAR(cap_hyperbolic_closed(2, 2.0, 1.0), 4 * pi / (1 / std::tanh(1.0) - 1), 1e-10);
  EXPECT_NEAR(cap_hyperbolic_closed(2, 2.0, 1.0), 40.143, 1e-3);
  for (double t : {0.5, 2.0, 7.0}) {
    for (double R : {t + 0.1, t + 1.0, t + 5.0}) {
      const double exact = 4 * pi / (1 / std::tanh(t) - 1 / std::tanh(R));
      EXPECT_NEAR(cap_hyperbolic_closed(2, 2.0, t, R) / exact, 1.0, 1e-8) << t << " " << R;
    }
  }
  EXPECT_GT(cap_hyperbolic_closed(2, 2.0, 1.0, 1.0 + 1e-6), 1e6);
  EXPECT_NEAR(cap_hyperbolic_closed(2, 2.0, 10.0) / std::exp(20.0) / (2 * pi), 1.0, 1e-2);
  EXPECT_NEAR(cap_hyperbolic_closed(2, 2.0, 12.0) / std::exp(24.0) / (2 * pi), 1.0, 1e-9);
  // p = 3 on H^4: omega_3 [int sinh^{-3/2}]^{-2}, checked against the large-t limit.
  EXPECT_NEAR(cap_hyperbolic_closed(3, 3.0, 14.0) / std::exp(42.0) / cap_asymconst(3, 3.0, 2 * pi * pi), 1.0, 1e-6);
  EXPECT_THROW(cap_hyperbolic_closed(2, 1.0, 1.0), DomainError);
  EXPECT_THROW(cap_hyperbolic_closed(2, 2.0, 1.0, 0.5), DomainError);
}

TEST(CapAsymconst, Values) {
  EXPECT_NEAR(cap_asymconst(2, 2.0, 4 * pi), 2 * pi, 1e-14);
  EXPECT_NEAR(cap_asymconst(3, 2.0, 2 * pi * pi), 3 * pi * pi / 4, 1e-13);
  EXPECT_NEAR(cap_asymconst(3, 2.0, 2 * pi * pi), 7.4022, 1e-4);
  EXPECT_NEAR(cap_asymconst(2, 1.001, 1.0), 0.25 * std::pow(2000.0, 0.001), 1e-14);
  EXPECT_NEAR(cap_asymconst(2, 1.001, 1.0) / 0.25, 1.0076, 1e-4);
  EXPECT_THROW(cap_asymconst(2, 0.5, 1.0), DomainError);
}

TEST(CapUpperRadial, ExactOnHyperbolic) {
  const auto& prof = hyperbolic_profile();
  for (double t : {1.0, 4.0, 10.0}) {
    EXPECT_NEAR(cap_upper_radial(prof, 2.0, t) / cap_hyperbolic_closed(2, 2.0, t), 1.0, 1e-6) << t;
  }
  for (double p : {1.5, 3.0}) EXPECT_NEAR(cap_upper_radial(prof, p, 2.0) / cap_hyperbolic_closed(2, p, 2.0), 1.0, 1e-6);
  for (double t = 2.0; t < 12.0; t += 1.0) {
    EXPECT_GE(cap_upper_radial(prof, 2.0, t + 1) / cap_upper_radial(prof, 2.0, t), std::exp(2.0 - 0.05));
  }
  auto bare = prof;
  bare.tail_constant = 0.0;
  EXPECT_THROW(cap_upper_radial(bare, 2.0, 1.0), DomainError);
  EXPECT_THROW(cap_upper_radial(prof, 2.0, 40.0), DomainError);
}

TEST(CapUpperRadial, FermiCoreTail) {
  const auto& prof = fermi_profile();
  const double a = 4 * pi * std::tanh(pi);
  EXPECT_NEAR(prof.tail_constant / a, 1.0, 1e-8);
  const double u = cap_upper_radial(prof, 2.0, 5.0);
  EXPECT_LE(u, cap_asymconst(2, 2.0, a) * std::exp(10.0) * 1.05);
  EXPECT_GT(u, 0.0);
}

TEST(CapLower, Isocapacitary) {
  const auto h = ModelMetric::hyperbolic(2);
  const auto q = make_point(h, 0.0);
  const auto lo = cap_lower_isocap(h, q, 2.0, 10.0);
  EXPECT_TRUE(lo.valid);
  EXPECT_NEAR(lo.value, 4 * pi * (std::sinh(20.0) - 20.0), 1e-9 * lo.value);
  EXPECT_LE(lo.value, cap_hyperbolic_closed(2, 2.0, 10.0));
  EXPECT_NEAR(cap_lower_isocap(h, q, 2.0, 12.0).value / std::exp(24.0) / (2 * pi), 1.0, 1e-2);

  const auto a = ModelMetric::ads(1.0);
  const auto la = cap_lower_isocap(a, make_point(a, 0.0), 2.0, 3.0);
  EXPECT_FALSE(la.valid);
  EXPECT_EQ(la.reason, "scalar-curvature decay hypothesis unverified");
  const auto f = ModelMetric::fermi(2, 1.0);
  const auto lf = cap_lower_isocap(f, make_point(f, 0.0), 2.0, 3.0);
  EXPECT_TRUE(lf.valid);
  EXPECT_NE(lf.reason.find("assumed"), std::string::npos);
}

TEST(CapVariational, MatchesClosedFormAndRate) {
  const auto& prof = hyperbolic_profile();
  const double exact = cap_hyperbolic_closed(2, 2.0, 1.0);
  const auto v = cap_variational(prof, 2.0, 1.0, 4096);
  EXPECT_NEAR(v.value / exact, 1.0, 1e-3);
  EXPECT_EQ(v.method, "newton");
  EXPECT_NEAR(v.value / cap_variational_series(prof, 2.0, 1.0, 4096), 1.0, 1e-10);
  EXPECT_LE(v.value, v.reference);

  double prev_gap = 0.0;
  for (int N : {256, 512, 1024, 2048}) {
    const double gap = v.reference - cap_variational(prof, 2.0, 1.0, N).value;
    EXPECT_GT(gap, 0.0);
    if (prev_gap > 0.0) {
      EXPECT_NEAR(prev_gap / gap, 2.0, 0.1) << N;
    }
    prev_gap = gap;
  }
}

TEST(CapVariational, OptimizerShape) {
  const auto& prof = hyperbolic_profile();
  const int N = 4096;
  const auto v = cap_variational(prof, 2.0, 1.0, N);
  const double mid = v.s[N / 2];
  EXPECT_NEAR(v.f[N / 2], radial_optimizer(prof, 2.0, 1.0, mid, v.tail_start), 1e-3);
  // On H^3 with p = 2 the optimizer is (coth s - 1) / (coth t - 1) up to the tail.
  EXPECT_NEAR(v.f[N / 2], (1 / std::tanh(mid) - 1) / (1 / std::tanh(1.0) - 1), 2e-3);
  EXPECT_DOUBLE_EQ(v.f[0], 1.0);
  for (int i = 0; i < N; ++i) ASSERT_GE(v.f[i], v.f[i + 1]);
}

TEST(CapVariational, HolderTightness) {
  // At the optimizer, 1 = sum |df| + f_N meets the Holder bound
  // E^{1/p} (sum c^{1/(1-p)} + C_T^{1/(1-p)})^{(p-1)/p} with equality.
  const auto& prof = hyperbolic_profile();
  for (double p : {1.5, 2.0, 3.0}) {
    for (int N : {512, 2048}) {
      const auto v = cap_variational(prof, p, 1.0, N);
      const double series = cap_variational_series(prof, p, 1.0, N);
      const double holder = std::pow(v.value, 1 / p) * std::pow(series, -1 / p);
      EXPECT_NEAR(holder, 1.0, 1e-9) << p << " " << N;
      // Against the continuous flux the gap is first order in 1/N.
      const double cont = std::pow(v.value, 1 / p) * std::pow(v.reference, -1 / p);
      EXPECT_LT(1.0 - cont, 4.0 / N);
      EXPECT_GT(1.0 - cont, 0.0);
    }
  }
}

TEST(CapVariational, SmallPFallback) {
  const auto& prof = hyperbolic_profile();
  const auto v = cap_variational(prof, 1.1, 1.0, 1024);
  EXPECT_EQ(v.method, "golden-section");
  EXPECT_NEAR(v.value / cap_variational_series(prof, 1.1, 1.0, 1024), 1.0, 1e-6);
  EXPECT_THROW(cap_variational(prof, 2.0, 1.0, 8), DomainError);
}

TEST(CapEstimate, SandwichAndMonotone) {
  const auto f = ModelMetric::fermi(2, 1.0);
  const auto q = make_point(f, 0.0);
  const auto& prof = fermi_profile();
  double prev = 0.0;
  for (double t : {2.0, 4.0, 6.0, 8.0}) {
    const auto e = capacity_estimate(f, q, prof, 2.0, t, 1024);
    EXPECT_TRUE(e.sandwich()) << t;
    EXPECT_GT(e.upper, prev);
    prev = e.upper;
    EXPECT_FALSE(e.closed_form.has_value());
  }
  const auto h = ModelMetric::hyperbolic(2);
  const auto e = capacity_estimate(h, make_point(h, 0.0), hyperbolic_profile(), 2.0, 3.0, 1024);
  EXPECT_TRUE(e.sandwich());
  ASSERT_TRUE(e.closed_form.has_value());
  EXPECT_NEAR(e.upper / *e.closed_form, 1.0, 1e-6);
  const auto j = e.to_json();
  EXPECT_TRUE(j["isocapacitary_lower_valid"]["valid"].get<bool>());
}

TEST(CapEstimate, Csv) {
  CapacityEstimate e;
  e.t = 1.0;
  e.upper = std::exp(2.0);
  e.lower = 2.0;
  std::ostringstream os;
  write_capacity_csv(os, 2, {e});
  EXPECT_EQ(os.str(), "t,lower,variational,upper,ratio_to_e_nt\n1,2,,7.38905609893,1\n");
}

TEST(CapLimitAudit, Hyperbolic) {
  const auto h = ModelMetric::hyperbolic(2);
  const auto a = cap_limit_audit(h, make_point(h, 0.0), 2.0, {2.0, 6.0, 10.0, 12.0});
  EXPECT_TRUE(a.pass());
  EXPECT_NEAR(a.target, 2 * pi, 1e-12);
  EXPECT_LT(a.upper_rel_error, 1e-2);
  EXPECT_LT(a.lower_rel_error, 1e-2);
  EXPECT_THROW(cap_limit_audit(h, make_point(h, 0.0), 2.0, {2.0, 6.0}), DomainError);
}

TEST(CapLimitAudit, FermiBracket) {
  const auto f = ModelMetric::fermi(2, 1.0);
  const auto a = cap_limit_audit(f, make_point(f, 0.0), 2.0, {4.0, 8.0, 12.0});
  EXPECT_TRUE(a.pass());
  const double target = 0.25 * 2 * 4 * pi * std::tanh(pi);
  EXPECT_NEAR(a.target, target, 1e-8);
  const auto& last = a.rows.back();
  const double lo = *last.lower * std::exp(-24.0), up = last.upper * std::exp(-24.0);
  // Both approach the target from below; quadrature noise is ~1e-9.
  EXPECT_LE(lo, up * (1 + 1e-8));
  EXPECT_NEAR(up / target, 1.0, 1e-6);
  EXPECT_NEAR(lo / target, 1.0, 1e-6);
  EXPECT_LT((up - lo) / target, 0.05);
}

TEST(CapLimitAudit, BoundedForAllModels) {
  for (const auto& m : {ModelMetric::hyperbolic(2), ModelMetric::fermi(2, 0.5), ModelMetric::ads(1.0)}) {
    const auto q = make_point(m, 0.0);
    const auto prof = make_radial_profile(m, q, 20.0, 0.05);
    for (double p : {1.5, 2.0, 3.0}) {
      const auto a = cap_limit_audit(m, q, p, {2.0, 7.0, 12.0}, prof);
      EXPECT_TRUE(a.bounded) << m.to_json().dump() << " p=" << p;
      EXPECT_TRUE(a.pass());
      if (m.is_ads()) {
        EXPECT_FALSE(a.hypotheses_hold);
      }
    }
  }
}

TEST(CollarCap, Hyperbolic) {
  const auto h = ModelMetric::hyperbolic(2);
  EXPECT_NEAR(collar_cap_upper(4 * pi, 2, 2.0, 0.1), 800 * pi, 1e-9);
  EXPECT_NEAR(fit_level_set_slope(h), 0.0, 1e-4);
  for (double eps : {0.1, 0.01}) {
    EXPECT_NEAR(std::pow(eps, 2) * collar_cap_upper(h, 2.0, eps) / (4 * pi * 2), 1.0, 2e-2);
  }
  for (double p : {1.5, 3.0}) {
    const double lead = 4 * pi * std::pow(2 / (p - 1), p - 1);
    EXPECT_NEAR(1e-4 * collar_cap_exact(h, p, 0.01) / lead, 1.0, 2e-2);
  }
  EXPECT_THROW(collar_cap_upper(h, 2.0, 2.5), DomainError);
  EXPECT_THROW(collar_cap_upper(4 * pi, 2, 2.0, 0.0), DomainError);
}

TEST(CollarCap, SandwichesBalls) {
  // |s - r| = ln 2 for r = -ln x about the pole; {x >= eps(t)} sits between
  // B(t) and B(t + 2D).
  const auto h = ModelMetric::hyperbolic(2);
  const double d = std::log(2.0);
  for (double t : {2.0, 5.0, 8.0}) {
    const double c = collar_cap_exact(h, 2.0, std::exp(-(t + d)));
    EXPECT_LE(cap_hyperbolic_closed(2, 2.0, t), c);
    EXPECT_LE(c, cap_hyperbolic_closed(2, 2.0, t + 2 * d) * (1 + 1e-9));
  }
}

TEST(CollarCap, OtherModels) {
  for (const auto& m : {ModelMetric::fermi(2, 1.0), ModelMetric::ads(1.0)}) {
    const auto c = collar_data(m);
    EXPECT_NEAR(fit_level_set_slope(m), 0.0, 1e-4);
    const int n = m.n();
    const double lead = c.boundary_volume * n;
    const double eps = 0.01 * c.delta;
    EXPECT_NEAR(std::pow(eps, n) * collar_cap_upper(m, 2.0, eps) / lead, 1.0, 2e-2);
    EXPECT_NEAR(collar_cap_exact(m, 2.0, eps) / collar_cap_upper(m, 2.0, eps), 1.0, 1e-3);
  }
}
