#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "noisereg/error.hpp"
#include "noisereg/fields.hpp"
#include "noisereg/solver.hpp"
#include "noisereg/stats.hpp"

using namespace noisereg;

namespace {

QuenchedScenario scenario(MatrixField sigma, std::size_t steps, std::size_t paths, double hurst = 0.2) {
  const TimeGrid grid(1.0, steps);
  return QuenchedScenario{generate_fbm(hurst, 1, grid, 7), std::move(sigma), {0.25, 0.125}, 1.0 / 256.0, {0.5}, 1,
                          paths, 99};
}

// Brownian path on the grid coarsened by `factor`, built from the same increments.
BmPath coarsen(const BmPath& fine, std::size_t factor) {
  const TimeGrid g = fine.path.grid.coarsened(factor);
  BmPath out{fine.seed, Path(g, fine.path.dim), {}};
  for (std::size_t k = 0; k < g.steps(); ++k) {
    double acc = 0.0;
    for (std::size_t r = 0; r < factor; ++r) acc += fine.increments[k * factor + r];
    out.increments.push_back(acc);
    out.path.values[k + 1] = out.path.values[k] + acc;
  }
  return out;
}

}  // namespace

TEST(EulerMaruyama, IdentityCoefficientReproducesBrownianMotion) {
  const TimeGrid g(1.0, 256);
  const auto w = generate_fbm(0.3, 2, g, 1).path;
  const auto b = generate_bm(2, g, 2);
  // From the origin the recursion is the prefix sum itself: bitwise equal.
  const double origin[2] = {0.0, 0.0};
  EXPECT_EQ(euler_maruyama(constant_identity(2), w, b, origin).path.values, b.path.values);
  // Elsewhere x0 enters the running sum, so equality holds up to rounding.
  const double x0[2] = {0.25, -1.0};
  const auto sol = euler_maruyama(constant_identity(2), w, b, x0);
  for (std::size_t k = 0; k <= 256; ++k)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(sol.path(k, c), x0[c] + b.path(k, c), 1e-13);
}

TEST(EulerMaruyama, ZeroCoefficientFreezesState) {
  const TimeGrid g(1.0, 64);
  const auto w = generate_fbm(0.3, 1, g, 1).path;
  const double x0[1] = {0.4};
  const auto sol = euler_maruyama(constant_matrix(1, 1, 1, {0.0}), w, generate_bm(1, g, 3), x0);
  for (double v : sol.path.values) EXPECT_EQ(v, 0.4);
}

TEST(EulerMaruyama, BlowupFlag) {
  const TimeGrid g(1.0, 64);
  const auto w = generate_fbm(0.3, 1, g, 1).path;
  const double x0[1] = {0.0};
  const auto sol = euler_maruyama(constant_identity(1, 1e8), w, generate_bm(1, g, 3), x0, 1e6);
  EXPECT_TRUE(sol.blown_up);
  EXPECT_EQ(sol.first_failure, 1u);
}

TEST(EulerMaruyama, Adaptedness) {
  const TimeGrid g(1.0, 128);
  const auto sc = scenario(singular_example(0.4, 1.0, 1), 128, 1);
  const auto sigma = sc.mollified(1);
  auto b1 = generate_bm(1, g, 4);
  auto b2 = generate_bm(1, g, 5);
  // Splice: share increments up to step 64, differ afterwards.
  for (std::size_t k = 0; k < 64; ++k) b2.increments[k] = b1.increments[k];
  for (std::size_t k = 0; k < 128; ++k) b2.path.values[k + 1] = b2.path.values[k] + b2.increments[k];
  const auto x1 = euler_maruyama(sigma, sc.fbm.path, b1, sc.x0);
  const auto x2 = euler_maruyama(sigma, sc.fbm.path, b2, sc.x0);
  for (std::size_t k = 0; k <= 64; ++k) EXPECT_EQ(x1.path(k, 0), x2.path(k, 0));
  EXPECT_NE(x1.path(128, 0), x2.path(128, 0));
}

TEST(EulerMaruyama, SecondMomentStableUnderStepDoubling) {
  const auto fine_w = generate_fbm(0.2, 1, TimeGrid(1.0, 2048), 7).path;
  const auto coarse_w = fine_w.subsampled(2);
  const auto sc = scenario(singular_example(0.4, 1.0, 1), 1024, 1);
  const MatrixField sigma =
      mollify(singular_example(0.4, 1.0, 1), MollifierSpec{0.0625}, SpatialGrid::covering(1, 1.1, 1.0 / 1024.0));
  std::vector<double> fine, coarse;
  for (std::size_t i = 0; i < 2000; ++i) {
    const auto b = generate_bm(1, TimeGrid(1.0, 2048), 8, i);
    const auto xf = euler_maruyama(sigma, fine_w, b, sc.x0);
    const auto xc = euler_maruyama(sigma, coarse_w, coarsen(b, 2), sc.x0);
    fine.push_back(std::pow(xf.path(2048, 0) - 0.5, 2));
    coarse.push_back(std::pow(xc.path(1024, 0) - 0.5, 2));
  }
  const double mf = mean(fine), mc = mean(coarse);
  EXPECT_TRUE(std::isfinite(mf));
  EXPECT_LE(std::abs(mf - mc) / mf, 0.05);
}

TEST(Ensemble, SinglePathMatchesEulerMaruyama) {
  auto sc = scenario(constant_identity(1, 0.7), 64, 1);
  const auto sigma = sc.mollified(0);
  const auto e = solve_ensemble(sc, sigma);
  const auto direct = euler_maruyama(sigma, sc.fbm.path, generate_bm(1, sc.fbm.path.grid, sc.base_seed, 0), sc.x0);
  for (std::size_t k = 0; k <= 64; ++k) EXPECT_EQ(e.state(0, k, 0), direct.path(k, 0));
}

TEST(Ensemble, ThreadCountDoesNotChangeBits) {
  auto sc = scenario(singular_example(0.4, 1.0, 1), 64, 50);
  const auto sigma = sc.mollified(0);
  const auto a = solve_ensemble(sc, sigma);
  sc.threads = 3;
  const auto b = solve_ensemble(sc, sigma);
  EXPECT_EQ(a.states, b.states);
}

TEST(Ensemble, BrownianSecondMoment) {
  const auto sc = scenario(constant_identity(1), 64, 4000);
  const auto e = solve_ensemble(sc, sc.sigma);
  const auto windows = dyadic_windows(e.grid, 0, 3);
  const std::vector<double> ms{2.0};
  for (const auto& entry : moment_table(e, ms, windows))
    EXPECT_LE(std::abs(entry.moment - (entry.t - entry.s)), 4.0 * entry.std_error) << entry.s << "," << entry.t;
}

TEST(Ensemble, StandardErrorScaling) {
  // Quadrupling M halves the standard error.
  const auto small = scenario(constant_identity(1), 16, 2000);
  auto large = small;
  large.paths = 8000;
  const std::vector<Window> whole{{0, 16}};
  const std::vector<double> ms{2.0};
  const double se1 = moment_table(solve_ensemble(small, small.sigma), ms, whole)[0].std_error;
  const double se4 = moment_table(solve_ensemble(large, large.sigma), ms, whole)[0].std_error;
  EXPECT_NEAR(se1 / se4, 2.0, 0.4);
}

TEST(Ensemble, AbortsWhenTooManyPathsBlowUp) {
  auto sc = scenario(constant_identity(1, 1e8), 16, 100);
  sc.blowup_bound = 1e6;
  EXPECT_THROW(solve_ensemble(sc, sc.sigma), BlowupError);
}

TEST(Windows, DyadicLevels) {
  const auto w = dyadic_windows(TimeGrid(1.0, 16), 0, 2);
  EXPECT_EQ(w.size(), 1u + 2u + 4u);
  EXPECT_EQ(w.front(), (Window{0, 16}));
  EXPECT_EQ(w.back(), (Window{12, 16}));
  EXPECT_THROW(dyadic_windows(TimeGrid(1.0, 16), 0, 5), ParameterError);
}

TEST(IntegralSequence, IdentityCoefficientIsEpsilonIndependent) {
  const auto sc = scenario(constant_identity(1), 64, 200);
  const auto ref = solve_ensemble(sc, sc.sigma);
  const std::vector<MatrixField> fields{sc.sigma, sc.sigma};
  const auto seq = mollified_integral_sequence(sc, fields, ref, 2.0);
  EXPECT_EQ(seq.integrals[0], seq.integrals[1]);
  EXPECT_EQ(seq.consecutive_differences[0], 0.0);
  for (std::size_t i = 0; i < 200; ++i) EXPECT_NEAR(seq.integrals[0][i], ref.brownian(i, 64, 0), 1e-12);
}

TEST(IntegralSequence, SmoothBoundedCoefficientIsQuiet) {
  const MatrixField smooth(1, 1, 1, [](std::span<const double> x, std::span<double> out) {
    out[0] = 1.0 + 0.5 * std::sin(x[0]);
    return false;
  });
  auto sc = scenario(smooth, 64, 200);
  const auto ref = solve_ensemble(sc, smooth);
  const std::vector<MatrixField> fields{smooth, smooth, smooth};
  sc.epsilons = {0.25, 0.125, 0.0625};
  const auto seq = mollified_integral_sequence(sc, fields, ref, 2.0);
  for (double d : seq.consecutive_differences) EXPECT_LE(d, 1e-12);
}
