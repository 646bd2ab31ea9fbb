#include <cmath>

#include <gtest/gtest.h>

#include "common.hpp"

using namespace vslctl;
using namespace vslctl::testing;

namespace {

FixedInletGains sec5_gains() {
  return calibrate(greenshields_exp(), kRhoStar, kLength, 0.12, 0.1, CalibrationMode::override);
}

}  // namespace

TEST(FixedInlet, CalibrationConstants) {
  const auto g = sec5_gains();
  const auto d = greenshields_exp();
  EXPECT_NEAR(d.slope(kRhoStar + g.a), 0.12, 1e-11);
  EXPECT_GT(g.a, 0.04);
  EXPECT_LT(g.a, 0.05);
  EXPECT_NEAR(g.Q, 0.4 * std::exp(-1.6), 1e-12);
  EXPECT_NEAR(g.q, 0.6 * std::exp(-1.6), 1e-12);
  EXPECT_NEAR(g.c, 0.02, 1e-15);
  EXPECT_NEAR(g.contraction_bound(), 0.1 / 0.12, 1e-15);
}

TEST(FixedInlet, Sec5ConditionsAndOverride) {
  const auto g = sec5_gains();
  EXPECT_FALSE(g.certified);
  const auto* flow = g.condition("flow_margin");
  ASSERT_NE(flow, nullptr);
  EXPECT_TRUE(flow->holds);
  EXPECT_NEAR(flow->lhs, 0.7 * std::exp(-0.7), 1e-15);
  EXPECT_NEAR(flow->rhs, 0.138, 1e-15);
  EXPECT_TRUE(g.condition("slope_margin")->holds);
  EXPECT_NEAR(g.condition("slope_margin")->lhs, 0.3 * std::exp(-0.7), 1e-15);
  const auto* conc = g.condition("concavity_margin");
  EXPECT_FALSE(conc->holds);
  EXPECT_NEAR(conc->lhs, 5e-5, 1e-5);
  EXPECT_NEAR(conc->rhs, 0.1, 1e-15);
  EXPECT_TRUE(g.condition("decay_positive")->holds);
}

TEST(FixedInlet, StrictModeRejects) {
  try {
    calibrate(greenshields_exp(), kRhoStar, kLength, 0.12, 0.1, CalibrationMode::strict);
    FAIL() << "strict calibration accepted uncertified gains";
  } catch (const CertificationError& e) {
    EXPECT_NE(std::string(e.what()).find("concavity_margin"), std::string::npos);
  }
}

TEST(FixedInlet, HugeSigmaFailsSlopeMargin) {
  for (auto mode : {CalibrationMode::strict, CalibrationMode::override})
    EXPECT_THROW(calibrate(greenshields_exp(), kRhoStar, kLength, 5.0, 0.1, mode), CertificationError);
}

TEST(FixedInlet, NonPositiveDecayRejected) {
  EXPECT_THROW(calibrate(greenshields_exp(), kRhoStar, kLength, 0.12, 0.2, CalibrationMode::override),
               CertificationError);
}

TEST(FixedInlet, SetPointRange) {
  // rho_max / 2 = 0.8 caps the set point here.
  EXPECT_THROW(calibrate(greenshields_exp(), 0.85, kLength, 0.05, 0.01), AssumptionViolation);
}

TEST(FixedInlet, CertifiedGainsExist) {
  // Small gains satisfy every condition on a concave parabola.
  const auto d = FundamentalDiagram::sample(
      2.0, 201, [](double r) { return r * (2.0 - r); }, [](double r) { return 2.0 - 2.0 * r; },
      [](double) { return -2.0; });
  const auto g = calibrate(d, 0.3, 1.0, 0.2, 0.001);
  EXPECT_TRUE(g.certified);
}

TEST(FixedInlet, Admissibility) {
  const auto g = sec5_gains();
  const auto d = greenshields_exp();
  const auto flat = admissible(g, d, DensityProfile::uniform(1.0, 100, kRhoStar, kRhoMax));
  EXPECT_TRUE(flat.admissible);
  EXPECT_EQ(flat.min_slack, 0.0);
  EXPECT_TRUE(admissible(g, d, bump_profile(10000)).admissible);
  const auto shifted = DensityProfile::sample(1.0, 100, kRhoStar, kRhoMax,
                                              [](double x) { return kRhoStar + 0.05 + bump(x); });
  const auto r = admissible(g, d, shifted);
  EXPECT_FALSE(r.boundary_ok);
  EXPECT_FALSE(r.admissible);
}

TEST(FixedInlet, ControlValues) {
  const auto g = sec5_gains();
  const auto d = greenshields_exp();
  const auto p = bump_profile(400);
  EXPECT_EQ(control(g, d, p, 0.0), 1.0);
  const double expected = (d.flow(0.7) + 0.12 * kBumpIntegral - 0.05 * 0.5184) / d.flow(0.86);
  EXPECT_NEAR(control(g, d, p, 1.0), expected, 1e-6);
  for (double u : controls(g, d, p)) {
    EXPECT_GT(u, 0.0);
    EXPECT_LE(u, 1.0);
  }
  for (double u : controls(g, d, DensityProfile::uniform(1.0, 20, kRhoStar, kRhoMax))) EXPECT_EQ(u, 1.0);
}

TEST(FixedInlet, EquilibriumStaysPut) {
  Scenario scn{greenshields_exp(), DensityProfile::uniform(1.0, 100, kRhoStar, kRhoMax), 20.0, 11};
  const auto trace = simulate(sec5_gains(), scn);
  for (const auto& s : trace.samples) {
    for (double r : s.rho) EXPECT_EQ(r, kRhoStar);
    for (double u : s.u) EXPECT_EQ(u, 1.0);
  }
}

TEST(FixedInlet, InadmissibleStartThrows) {
  Scenario scn{greenshields_exp(),
               DensityProfile::sample(1.0, 100, kRhoStar, kRhoMax,
                                      [](double x) { return kRhoStar - 0.1 * std::sin(M_PI * x); }),
               10.0, 11};
  EXPECT_THROW(simulate(sec5_gains(), scn), StateEscapeError);
}

TEST(FixedInlet, BumpRunSatisfiesInvariants) {
  const auto g = sec5_gains();
  const auto scn = bump_scenario(200, 60.0);
  const auto trace = simulate(g, scn);
  const auto inv = check_fixed_inlet(trace, g, scn);
  for (const auto& r : inv.results) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
  EXPECT_LE(trace.max_contraction_ratio(), g.contraction_bound());
  EXPECT_GE(gronwall_margin(g, trace, scn.rho0.sup_deviation()), -1e-8);
  EXPECT_LT(trace.metadata.at("signed_max_mismatch"), 1e-9);
  for (const auto& s : trace.samples) {
    EXPECT_EQ(s.u.front(), 1.0);
    EXPECT_EQ(s.rho.front(), kRhoStar);
  }
}
