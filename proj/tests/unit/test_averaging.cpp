#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "noisereg/averaging.hpp"
#include "noisereg/error.hpp"
#include "noisereg/occupation.hpp"
#include "noisereg/paths.hpp"

using namespace noisereg;

namespace {

Path linear_path(std::size_t n) {
  Path p(TimeGrid(1.0, n), 1);
  for (std::size_t k = 0; k <= n; ++k) p.values[k] = p.grid.node(k);
  return p;
}

const ScalarFunction tent = [](std::span<const double> x) { return std::max(0.0, 1.0 - std::abs(x[0])); };

}  // namespace

TEST(AverageDirect, ZeroPathReproducesField) {
  Path zero(TimeGrid(1.0, 64), 1);
  const std::vector<double> probes{-0.5, 0.0, 0.3};
  const auto v = average_direct(tent, zero, 0.25, 0.75, probes);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const double x[1] = {probes[i]};
    EXPECT_DOUBLE_EQ(v[i], 0.5 * tent(x));
  }
}

TEST(AverageDirect, ConstantFieldGivesWindowLength) {
  const auto w = generate_fbm(0.3, 1, TimeGrid(1.0, 128), 1).path;
  const ScalarFunction c = [](std::span<const double>) { return 2.5; };
  const std::vector<double> probes{-3.0, 0.1, 7.0};
  for (double v : average_direct(c, w, 0.0, 0.5, probes)) EXPECT_NEAR(v, 1.25, 1e-14);
}

TEST(AverageDirect, HeavisideAlongLinearPath) {
  const auto p = linear_path(1024);
  const ScalarFunction step = [](std::span<const double> x) { return x[0] >= 0.0 ? 1.0 : 0.0; };
  const std::vector<double> probe{1.0};
  EXPECT_NEAR(average_direct(step, p, 0.0, 1.0, probe)[0], 1.0, 1e-12);
}

TEST(AverageViaLocalTime, ZeroPathShiftsField) {
  Path zero(TimeGrid(1.0, 32), 1);
  const double h = 1.0 / 64.0;
  const auto L = local_time(zero, SpatialGrid::covering(1, 0.25, h), 0.0, 1.0);
  const auto f = sample_on_grid(tent, SpatialGrid::covering(1, 1.5, h));
  const auto T = average_via_local_time(f, L);
  for (std::size_t i = 0; i < T.values.size(); ++i) {
    const double x[1] = {T.lattice.node(i)};
    EXPECT_NEAR(T.values[i], tent(x), h + 1e-12);
  }
}

TEST(AverageViaLocalTime, ZeroFieldGivesZero) {
  const auto w = generate_fbm(0.25, 1, TimeGrid(1.0, 256), 2).path;
  const double h = 1.0 / 128.0;
  const auto L = local_time(w, SpatialGrid::covering(1, 4.0, h), 0.0, 1.0);
  const GridFunction f{SpatialGrid::covering(1, 1.0, h), std::vector<double>(256, 0.0)};
  for (double v : average_via_local_time(f, L).values) EXPECT_EQ(v, 0.0);
}

TEST(AverageViaLocalTime, AgreesWithDirectQuadrature) {
  const auto w = generate_fbm(0.25, 1, TimeGrid(1.0, 1024), 8).path;
  const double h = 1.0 / 256.0;
  const auto L = local_time(w, SpatialGrid::covering(1, 4.0, h), 0.0, 1.0);
  const ScalarFunction f = [](std::span<const double> x) { return std::sin(2.0 * x[0]) * std::exp(-x[0] * x[0]); };
  const auto T = average_via_local_time(sample_on_grid(f, SpatialGrid::covering(1, 5.0, h)), L);
  std::vector<double> probes;
  for (std::size_t i = 0; i < T.values.size(); i += 37) probes.push_back(T.lattice.node(i));
  const auto direct = average_direct(f, w, 0.0, 1.0, probes);
  const double lip = 2.5;  // bound on |f'|
  for (std::size_t q = 0; q < probes.size(); ++q) {
    const double x[1] = {probes[q]};
    EXPECT_NEAR(T(x), direct[q], lip * h + 1e-9);
  }
}

TEST(AverageViaLocalTime, GridErrors) {
  const auto w = generate_fbm(0.25, 1, TimeGrid(1.0, 256), 2).path;
  const auto L = local_time(w, SpatialGrid::covering(1, 0.01, 1.0 / 256.0), 0.0, 1.0);
  const auto f = sample_on_grid(tent, SpatialGrid::covering(1, 1.0, 1.0 / 256.0));
  ASSERT_GT(L.escaped_fraction(), 1e-3);
  EXPECT_THROW(average_via_local_time(f, L), CoverageError);
  const auto g = sample_on_grid(tent, SpatialGrid::covering(1, 1.0, 1.0 / 128.0));
  EXPECT_THROW(average_via_local_time(g, L, 1.0), ParameterError);
}

TEST(Holder, LinearSamplesAreLipschitz) {
  std::vector<double> v(4096);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) / 4096.0;
  for (auto dir : {HolderDirection::time, HolderDirection::space}) {
    const auto e = holder_exponent(v, dir);
    EXPECT_NEAR(e.exponent, 1.0, 0.05);
    EXPECT_FALSE(e.degenerate);
  }
}

TEST(Holder, ConstantSamplesAreDegenerate) {
  const std::vector<double> v(1024, 3.0);
  EXPECT_TRUE(holder_exponent(v, HolderDirection::space).degenerate);
}

TEST(Holder, TooFewScales) {
  const std::vector<double> v(16, 1.0);
  EXPECT_THROW(holder_exponent(v, HolderDirection::time), InsufficientDataError);
}

TEST(Holder, RecoversHurstInTime) {
  for (double h : {0.25, 0.5}) {
    const auto w = generate_fbm(h, 1, TimeGrid(1.0, 16384), 31).path;
    const auto e = holder_exponent(w.values, HolderDirection::time);
    EXPECT_NEAR(e.exponent, h, 0.07) << "H=" << h;
  }
}

TEST(Admissibility, VariantTwo) {
  const auto b = admissible_regularity(0.1, 1, 2.0, RegularityVariant::II);
  EXPECT_NEAR(b.lambda_max, 4.5, 1e-12);
  EXPECT_NEAR(b.gamma_max(1.0), 0.85, 1e-12);
}

TEST(Admissibility, VariantOne) {
  const auto b = admissible_regularity(0.2, 1, 2.0, RegularityVariant::I);
  EXPECT_NEAR(b.lambda_max, 2.0, 1e-12);
  EXPECT_NEAR(b.gamma_max(1.0), 0.7, 1e-12);
  EXPECT_THROW(admissible_regularity(0.5, 2, 4.0, RegularityVariant::I), HypothesisError);
}

TEST(Admissibility, MainHurstBound) {
  EXPECT_DOUBLE_EQ(hurst_admissible_main(1, 2.0), 0.25);
  EXPECT_DOUBLE_EQ(hurst_admissible_main(2, 4.0), 0.2);
  EXPECT_NEAR(hurst_admissible_main(1, 4.0), 2.0 / 7.0, 1e-15);
  EXPECT_THROW(hurst_admissible_main(2, 2.0), HypothesisError);
  EXPECT_THROW(hurst_admissible_main(1, 1.5), HypothesisError);
}

TEST(Admissibility, FbmDriverBound) {
  EXPECT_NEAR(hurst_admissible_fbm_driver(0.75, 1, 2.0), 0.1, 1e-15);
  EXPECT_LT(hurst_admissible_fbm_driver(0.5 + 1e-9, 1, 2.0), 1e-8);
  EXPECT_THROW(hurst_admissible_fbm_driver(1.0, 1, 2.0), HypothesisError);
  EXPECT_THROW(hurst_admissible_fbm_driver(0.5, 1, 2.0), HypothesisError);
}
