// Randomised property suites. Every property runs at least kCases cases from a
// fixed seed so failures reproduce.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "common.hpp"

using namespace vslctl;
using namespace vslctl::testing;

namespace {

constexpr int kCases = 250;

class Rng {
 public:
  explicit Rng(unsigned seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(gen_);
  }

 private:
  std::mt19937 gen_;
};

ExponentialFamily random_family(Rng& r) {
  return {r.uniform(0.5, 2.0), r.uniform(0.5, 1.5), r.uniform(0.8, 3.0), r.uniform(0.0, 2.0)};
}

DensityProfile random_profile(Rng& r, double rho_star, double rho_max, std::size_t n) {
  const double a1 = r.uniform(-0.3, 0.3), a2 = r.uniform(-0.3, 0.3), w = r.uniform(1.0, 8.0);
  const double room = std::min(rho_star, rho_max - rho_star) * 0.9;
  return DensityProfile::sample(1.0, n, rho_star, rho_max, [&](double x) {
    return rho_star + room * std::tanh(a1 * std::sin(w * x) + a2 * x);
  });
}

}  // namespace

TEST(Properties, TrapezoidExactOnLinearProfiles) {
  Rng r(101);
  for (int c = 0; c < kCases; ++c) {
    const double L = r.uniform(0.5, 3.0), rho_star = r.uniform(0.6, 0.8);
    const double s0 = r.uniform(-0.2, 0.2), s1 = r.uniform(-0.1, 0.1);
    const auto p = DensityProfile::sample(L, r.index(2, 300), rho_star, 1.6,
                                          [&](double x) { return rho_star + s0 + s1 * x; });
    const double x = r.uniform(0.0, L);
    EXPECT_NEAR(p.cumulative_deviation(x), s0 * x + 0.5 * s1 * x * x, 1e-13);
  }
}

TEST(Properties, CumulativeDeviationAdditive) {
  Rng r(102);
  for (int c = 0; c < kCases; ++c) {
    const auto p = random_profile(r, 0.7, 1.6, r.index(2, 200));
    const auto cum = p.cumulative_deviations();
    EXPECT_EQ(cum[0], 0.0);
    const std::size_t i = r.index(0, p.intervals()), j = r.index(i, p.intervals());
    double piece = 0.0;
    for (std::size_t m = i + 1; m <= j; ++m)
      piece += 0.5 * p.spacing() * (p[m - 1] + p[m] - 2.0 * p.rho_star());
    EXPECT_NEAR(cum[j] - cum[i], piece, 1e-13);
  }
}

TEST(Properties, SupDeviationIsANorm) {
  Rng r(103);
  for (int c = 0; c < kCases; ++c) {
    const std::size_t n = r.index(2, 100);
    const double rho_star = 0.8;
    std::vector<double> d1(n + 1), d2(n + 1);
    for (auto& v : d1) v = r.uniform(-0.35, 0.35);
    for (auto& v : d2) v = r.uniform(-0.35, 0.35);
    const double lam = r.uniform(-1.0, 1.0);
    auto make = [&](auto f) {
      std::vector<double> v(n + 1);
      for (std::size_t i = 0; i <= n; ++i) v[i] = rho_star + f(i);
      return DensityProfile(1.0, rho_star, 1.6, v).sup_deviation();
    };
    const double n1 = make([&](std::size_t i) { return d1[i]; });
    const double n2 = make([&](std::size_t i) { return d2[i]; });
    EXPECT_NEAR(make([&](std::size_t i) { return lam * d1[i]; }), std::abs(lam) * n1, 1e-15);
    EXPECT_LE(make([&](std::size_t i) { return d1[i] + d2[i]; }), n1 + n2 + 1e-15);
    EXPECT_GT(n1, 0.0);
    EXPECT_EQ(make([](std::size_t) { return 0.0; }), 0.0);
  }
}

TEST(Properties, InvertVslRoundTrip) {
  Rng r(104);
  for (int c = 0; c < kCases; ++c) {
    const auto d = FundamentalDiagram::exponential(random_family(r), 1.6);
    const double rho = r.uniform(0.05, 1.6);
    const double top = d.ltilde(rho);
    const double l0 = r.uniform(1e-3, 1.0) * top;
    EXPECT_NEAR(d.invert_vsl(rho, d.vsl_flow(rho, l0)), l0, 1e-9) << "rho=" << rho;
  }
}

TEST(Properties, SpeedLimitsReduceFlowBelowDelta) {
  Rng r(105);
  for (int c = 0; c < kCases; ++c) {
    const auto d = FundamentalDiagram::exponential(random_family(r), 1.6);
    const double rho = r.uniform(1e-3, 1.0) * d.delta();
    const double l = r.uniform(1e-3, 1.0 - 1e-9);
    EXPECT_LT(d.vsl_flow(rho, l), d.flow(rho));
    EXPECT_EQ(d.vsl_flow(rho, 1.0), d.flow(rho));
  }
}

TEST(Properties, CriticalDensityBracketsSlopeSignChange) {
  Rng r(106);
  for (int c = 0; c < kCases; ++c) {
    auto p = random_family(r);
    const auto d = FundamentalDiagram::exponential(p, 2.0 / p.b);
    const double rc = d.critical_density();
    EXPECT_NEAR(rc, 1.0 / p.b, 1e-11);
    EXPECT_GT(d.slope(rc - 1e-6), 0.0);
    EXPECT_LT(d.slope(rc + 1e-6), 0.0);
  }
}

TEST(Properties, ValidatorVerdictsOnReferenceDiagrams) {
  Rng r(107);
  const auto parabola = FundamentalDiagram::sample(
      1.6, 161, [](double x) { return x * (2.0 - x); }, [](double x) { return 2.0 - 2.0 * x; },
      [](double) { return -2.0; });
  const auto linear = FundamentalDiagram::sample(
      1.6, 161, [](double x) { return x; }, [](double) { return 1.0; }, [](double) { return 0.0; });
  const auto expo = greenshields_exp();
  for (int c = 0; c < kCases; ++c) {
    const std::size_t n = r.index(3, 400);
    EXPECT_TRUE(validate_assumptions(expo, n).all_passed()) << n;
    EXPECT_TRUE(validate_assumptions(parabola, n).all_passed()) << n;
    const auto lin = validate_assumptions(linear, n);
    EXPECT_FALSE(lin.find("slope_sign_pattern")->passed);
    EXPECT_FALSE(lin.find("strict_concavity")->passed);
  }
}

TEST(Properties, FreeInletEquilibriumIsFixedPoint) {
  Rng r(108);
  const auto d = greenshields_exp();
  for (int c = 0; c < kCases; ++c) {
    const double rho_star = r.uniform(0.05, 1.55);
    const double L = r.uniform(0.5, 2.0);
    const FreeInletGain g{r.uniform(0.01, 0.9) / (L * rho_star), L, rho_star};
    Scenario scn{d, DensityProfile::uniform(L, r.index(2, 40), rho_star, 1.6), 0.5, 3};
    const auto trace = simulate(g, scn);
    for (const auto& s : trace.samples) {
      for (double v : s.rho) EXPECT_EQ(v, rho_star);
      for (double u : s.u) EXPECT_EQ(u, 1.0);
      EXPECT_EQ(*s.bottleneck_flow, d.flow(rho_star));
    }
  }
}

TEST(Properties, FixedInletEquilibriumIsFixedPoint) {
  Rng r(109);
  const auto d = greenshields_exp();
  for (int c = 0; c < kCases; ++c) {
    const double rho_star = r.uniform(0.05, 0.79);
    const double L = r.uniform(0.5, 2.0);
    const double sigma = r.uniform(0.05, 0.95) * d.slope(rho_star) / L;
    const double gamma = r.uniform(0.05, 0.95) * sigma / L;
    const auto g = calibrate(d, rho_star, L, sigma, gamma, CalibrationMode::override);
    Scenario scn{d, DensityProfile::uniform(L, r.index(2, 40), rho_star, 1.6), 2.0, 3};
    const auto trace = simulate(g, scn);
    for (const auto& s : trace.samples) {
      for (double v : s.rho) EXPECT_EQ(v, rho_star);
      for (double u : s.u) EXPECT_EQ(u, 1.0);
    }
  }
}

TEST(Properties, FreeInletControlsAndFluxIdentity) {
  Rng r(110);
  const auto d = greenshields_exp();
  for (int c = 0; c < kCases; ++c) {
    const double rho_star = r.uniform(0.2, 1.4);
    const FreeInletGain g{r.uniform(0.01, 0.99) / rho_star, 1.0, rho_star};
    const auto p = random_profile(r, rho_star, 1.6, r.index(10, 200));
    const auto u = controls(g, d, p);
    const auto b = bottleneck(g, d, p);
    const auto cum = p.cumulative_deviations();
    EXPECT_EQ(u[b.index], 1.0);
    for (std::size_t i = 0; i < u.size(); ++i) {
      EXPECT_GT(u[i], 0.0);
      EXPECT_LE(u[i], 1.0);
      EXPECT_NEAR(d.flow(p[i]) * u[i] / (1.0 + g.k * cum[i]), b.flow, 1e-14);
    }
  }
}

TEST(Properties, FreeInletPicardContractsWithinSafety) {
  Rng r(111);
  const auto d = greenshields_exp();
  for (int c = 0; c < kCases; ++c) {
    const double rho_star = r.uniform(0.2, 1.4);
    const FreeInletGain g{r.uniform(0.05, 0.95) / rho_star, 1.0, rho_star};
    Scenario scn{d, random_profile(r, rho_star, 1.6, 30), 3.0, 4};
    PicardSettings ps;
    ps.samples_per_window = 16;
    const auto trace = simulate(g, scn, ps);
    EXPECT_LE(trace.max_contraction_ratio(), ps.safety);
    const auto inv = check_free_inlet(trace, g, scn, ps, 1.0);
    for (const auto& res : inv.results) EXPECT_TRUE(res.passed) << res.name << ": " << res.detail;
  }
}

TEST(Properties, FixedInletPicardContractsWithinBound) {
  Rng r(112);
  const auto d = greenshields_exp();
  const auto g = calibrate(d, kRhoStar, kLength, 0.12, 0.1, CalibrationMode::override);
  int tested = 0;
  for (int attempt = 0; tested < kCases && attempt < 20 * kCases; ++attempt) {
    const double amp = r.uniform(0.2, 5.0), w = r.uniform(1.0, 1.6);
    auto p = DensityProfile::sample(1.0, 40, kRhoStar, kRhoMax, [&](double x) {
      return std::min(kRhoMax, kRhoStar + amp * x * x * (w - x) * (w - x));
    });
    if (!admissible(g, d, p).admissible) continue;
    ++tested;
    Scenario scn{d, std::move(p), 10.0, 6};
    const auto trace = simulate(g, scn);
    EXPECT_LE(trace.max_contraction_ratio(), g.contraction_bound());
    for (const auto& s : trace.samples) EXPECT_EQ(s.u.front(), 1.0);
    const auto inv = check_fixed_inlet(trace, g, scn);
    for (const auto& res : inv.results) EXPECT_TRUE(res.passed) << res.name << ": " << res.detail;
  }
  EXPECT_EQ(tested, kCases);
}
