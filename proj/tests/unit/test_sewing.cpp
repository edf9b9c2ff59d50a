#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "noisereg/averaging.hpp"
#include "noisereg/occupation.hpp"
#include "noisereg/paths.hpp"
#include "noisereg/sewing.hpp"

using namespace noisereg;

namespace {

Germ scalar_germ(std::function<double(double, double)> a) {
  Germ g;
  g.eval = [a](double s, double t, std::span<double> out) { out[0] = a(s, t); };
  return g;
}

const Germ additive = scalar_germ([](double s, double t) { return std::cos(t) * t - std::cos(s) * s; });
const Germ quadratic = scalar_germ([](double s, double t) { return s * (t - s); });
const Germ root = scalar_germ([](double s, double t) { return std::sqrt(t - s); });

}  // namespace

TEST(Delta, AdditiveGermVanishes) {
  EXPECT_NEAR(delta(additive, 0.1, 0.4, 0.9)[0], 0.0, 1e-15);
}

TEST(Delta, QuadraticGerm) { EXPECT_DOUBLE_EQ(delta(quadratic, 0.0, 0.5, 1.0)[0], -0.25); }

TEST(Delta, DegenerateMidpoint) {
  EXPECT_EQ(delta(root, 0.2, 0.2, 0.7)[0], 0.0);
  EXPECT_EQ(delta(root, 0.2, 0.7, 0.7)[0], 0.0);
}

TEST(Sew, AdditiveGermIsPartitionInvariant) {
  const auto r = sew(additive, 0.0, 1.0, 10);
  for (const auto& s : r.level_sums) EXPECT_NEAR(s[0], r.level_sums[0][0], 1e-14);
  EXPECT_FALSE(r.divergent);
}

TEST(Sew, QuadraticGermConvergesAtRateOne) {
  const auto r = sew(quadratic, 0.0, 1.0, 12);
  // S_K = ½ - 2^{-K-1}: a left Riemann sum of ∫_0^1 s ds.
  EXPECT_NEAR(r.value[0], 0.5 - std::ldexp(1.0, -13), 1e-14);
  ASSERT_TRUE(r.rate.has_value());
  EXPECT_NEAR(*r.rate, 1.0, 0.1);
  EXPECT_NEAR(r.best()[0], 0.5, 1e-9);
  EXPECT_FALSE(r.divergent);
}

TEST(Sew, SquareRootGermDiverges) {
  const auto r = sew(root, 0.0, 1.0, 12);
  for (std::size_t k = 0; k < r.level_sums.size(); ++k)
    EXPECT_NEAR(r.level_sums[k][0], std::pow(2.0, static_cast<double>(k) / 2.0), 1e-9);
  EXPECT_TRUE(r.divergent);
}

TEST(Sew, ThreadCountDoesNotChangeBits) {
  const auto a = sew(quadratic, 0.0, 1.0, 14);
  const auto b = sew(quadratic, 0.0, 1.0, 14, {.noise_floor = -1.0, .threads = 3});
  EXPECT_EQ(a.level_sums, b.level_sums);
}

TEST(Remainder, AdditiveAndZeroGerms) {
  EXPECT_EQ(remainder_check(additive, sew(additive, 0.0, 1.0, 10), 1.5), 0.0);
  const Germ zero = scalar_germ([](double, double) { return 0.0; });
  EXPECT_EQ(remainder_check(zero, sew(zero, 0.0, 1.0, 10), 2.0), 0.0);
}

TEST(Remainder, QuadraticGermMatchesBruteForce) {
  // Brute force over every dyadic window of level <= 8 against the level-12
  // partition: on a level-l window IA - A = (t-s)^2/2 (1 - 2^{-(12-l)}), so
  // the supremum is attained on [0,1] and approaches ½, not ¼.
  const auto r = sew(quadratic, 0.0, 1.0, 12);
  double brute = 0.0;
  for (int l = 0; l <= 8; ++l) {
    const double len = std::ldexp(1.0, -l);
    for (int j = 0; j < (1 << l); ++j) {
      const double s = j * len, t = s + len;
      const auto fine = sew(quadratic, s, t, 12 - l);
      brute = std::max(brute, std::abs(fine.value[0] - s * (t - s)) / (len * len));
    }
  }
  const double got = remainder_check(quadratic, r, 2.0, 8);
  EXPECT_NEAR(got, brute, 1e-12);
  EXPECT_NEAR(got, 0.5 * (1.0 - std::ldexp(1.0, -12)), 1e-12);
  EXPECT_LT(got, 0.5);
}

TEST(StochasticSewing, BrownianIncrementIsDegenerate) {
  const TimeGrid g(1.0, 256);
  std::vector<BmPath> bms;
  for (std::size_t i = 0; i < 1000; ++i) bms.push_back(generate_bm(1, g, 5, i));
  const PathGerm germ = [&](std::size_t p, std::size_t k0, std::size_t k1) {
    return bms[p].path(k1, 0) - bms[p].path(k0, 0);
  };
  const std::vector<int> levels{2, 3, 4, 5, 6};
  const auto d = stochastic_sewing_diagnostic(germ, 1000, g, 2.0, levels);
  EXPECT_TRUE(d.moment.degenerate);
  EXPECT_TRUE(d.conditional.degenerate);
}

TEST(StochasticSewing, AveragedLipschitzGermAlongBrownianMotion) {
  const TimeGrid g(1.0, 1024);
  const auto w = generate_fbm(0.2, 1, g, 13).path;
  const ScalarFunction f = [](std::span<const double> x) { return std::sin(3.0 * x[0]); };
  std::vector<BmPath> bms;
  for (std::size_t i = 0; i < 1000; ++i) bms.push_back(generate_bm(1, g, 6, i));
  const PathGerm germ = [&](std::size_t p, std::size_t k0, std::size_t k1) {
    const double x[1] = {bms[p].path(k0, 0)};
    return average_direct(f, w, g.node(k0), g.node(k1), x)[0];
  };
  const std::vector<int> levels{3, 4, 5, 6, 7};
  const auto d = stochastic_sewing_diagnostic(germ, 1000, g, 2.0, levels);
  EXPECT_GE(d.moment.exponent, 1.2);
}

TEST(NonlinearYoung, ZeroDriftStaysPut) {
  const TimeGrid g(1.0, 64);
  const AveragedDrift zero = [](double, double, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  const double y0[1] = {0.7};
  const auto sol = nonlinear_young_solve(zero, y0, g);
  for (double v : sol.path.values) EXPECT_EQ(v, 0.7);
}

TEST(NonlinearYoung, LinearOdeWithoutNoise) {
  const TimeGrid g(1.0, 4096);
  const AveragedDrift lin = [](double s, double t, std::span<const double> x, std::span<double> out) {
    out[0] = (t - s) * x[0];
  };
  const double y0[1] = {1.0};
  const auto sol = nonlinear_young_solve(lin, y0, g);
  EXPECT_NEAR(sol.path(4096, 0), std::exp(1.0), 2.0 * std::exp(1.0) / 4096.0);
  EXPECT_FALSE(sol.blown_up);
}

TEST(NonlinearYoung, StepDriftIsTimeRegular) {
  const TimeGrid g(1.0, 16384);
  const auto w = generate_fbm(0.1, 1, g, 3).path;
  const ScalarFunction b = [](std::span<const double> x) { return x[0] > 0.0 ? 1.0 : -1.0; };
  const AveragedDrift drift = [&](double s, double t, std::span<const double> x, std::span<double> out) {
    out[0] = average_direct(b, w, s, t, x)[0];
  };
  const double y0[1] = {0.1};
  const auto sol = nonlinear_young_solve(drift, y0, g);
  ASSERT_TRUE(sol.time_regularity.has_value());
  EXPECT_GE(sol.time_regularity->exponent, 0.9);
}

TEST(NonlinearYoung, BlowupDetection) {
  const TimeGrid g(1.0, 64);
  const AveragedDrift explode = [](double, double, std::span<const double> x, std::span<double> out) {
    out[0] = 10.0 * x[0];
  };
  const double y0[1] = {1.0};
  const auto sol = nonlinear_young_solve(explode, y0, g, 1e6);
  EXPECT_TRUE(sol.blown_up);
  EXPECT_GT(sol.first_failure, 0u);
}
