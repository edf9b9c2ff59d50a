#include <cmath>
#include <vector>

#include <gtest/gtest.h>

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

}  // namespace

TEST(SpatialGrid, RejectsBinCenteredAtOrigin) {
  EXPECT_THROW(SpatialGrid(1, -1.0, 1.0, 3), ParameterError);
  EXPECT_NO_THROW(SpatialGrid(1, -1.0, 1.0, 4));
  EXPECT_THROW(SpatialGrid::symmetric(1, 1.0, 5), ParameterError);
}

TEST(SpatialGrid, LocateAndCenters) {
  const auto g = SpatialGrid::symmetric(2, 1.0, 4);
  EXPECT_EQ(g.total_bins(), 16u);
  const double x[2] = {-0.9, 0.6};
  EXPECT_EQ(g.locate(x), std::optional<std::size_t>(0 * 4 + 3));
  const double far[2] = {2.0, 0.0};
  EXPECT_FALSE(g.locate(far));
  std::vector<double> c(2);
  g.center(3, c);
  EXPECT_DOUBLE_EQ(c[0], -0.75);
  EXPECT_DOUBLE_EQ(c[1], 0.75);
}

TEST(Occupation, ZeroPathPutsAllMassInOriginBin) {
  Path zero(TimeGrid(1.0, 16), 1);
  const auto grid = SpatialGrid::symmetric(1, 1.0, 8);
  const auto mu = occupation_measure(zero, grid, 0.0, 1.0);
  const double origin[1] = {0.0};
  const auto bin = *grid.locate(origin);
  EXPECT_DOUBLE_EQ(mu.mass(bin), 1.0);
  EXPECT_DOUBLE_EQ(mu.covered_mass(), 1.0);
  EXPECT_EQ(mu.escaped, 0u);
}

TEST(Occupation, LinearPathSpreadsMassUniformly) {
  const std::size_t n = 1024;
  const auto p = linear_path(n);
  const auto grid = SpatialGrid::symmetric(1, 2.0, 64);
  const auto mu = occupation_measure(p, grid, 0.0, 1.0);
  const double h = grid.width(), dt = p.grid.dt();
  for (std::size_t i = 0; i < grid.bins(); ++i) {
    const double c = grid.center(i);
    if (c > 0.0 && c < 1.0) {
      EXPECT_NEAR(mu.mass(i), h, dt + 1e-15);
    }
  }
}

TEST(Occupation, CoverageOfFbmPath) {
  const auto w = generate_fbm(0.25, 1, TimeGrid(1.0, 512), 9).path;
  double reach = 0.0;
  for (double v : w.values) reach = std::max(reach, std::abs(v));
  const auto grid = SpatialGrid::covering(1, reach + 0.01, 0.01);
  const auto mu = occupation_measure(w, grid, 0.25, 0.75);
  EXPECT_EQ(mu.escaped_mass(), 0.0);
  EXPECT_NEAR(mu.covered_mass(), 0.5, 1e-12);
}

TEST(Occupation, WindowMustBeNodeAligned) {
  const auto p = linear_path(16);
  const auto grid = SpatialGrid::symmetric(1, 2.0, 8);
  EXPECT_THROW(occupation_measure(p, grid, 0.0, 0.3), ParameterError);
}

TEST(Occupation, WindowAdditivityIsExact) {
  const auto w = generate_fbm(0.3, 2, TimeGrid(1.0, 256), 4).path;
  const auto grid = SpatialGrid::symmetric(2, 3.0, 32);
  const auto a = occupation_measure(w, grid, 0.0, 0.375);
  const auto b = occupation_measure(w, grid, 0.375, 1.0);
  const auto whole = occupation_measure(w, grid, 0.0, 1.0);
  const auto sum = a + b;
  EXPECT_EQ(sum.counts, whole.counts);
  EXPECT_EQ(sum.escaped, whole.escaped);
  const auto la = local_time(a), lb = local_time(b), lw = local_time(whole);
  EXPECT_EQ((la + lb).density, lw.density);
  EXPECT_THROW(b + a, ParameterError);
}

TEST(LocalTime, LinearPathHasUnitDensity) {
  const auto p = linear_path(4096);
  const auto grid = SpatialGrid::symmetric(1, 2.0, 128);
  const auto L = local_time(p, grid, 0.0, 1.0);
  const double h = grid.width(), dt = p.grid.dt();
  for (std::size_t i = 0; i < grid.bins(); ++i) {
    const double c = grid.center(i);
    if (c > h && c < 1.0 - h) {
      EXPECT_NEAR(L.density[i], 1.0, (h + dt) / h);
    } else if (c < -h || c > 1.0 + h) {
      EXPECT_EQ(L.density[i], 0.0);
    }
  }
}

TEST(LocalTime, TotalMassEqualsWindowLength) {
  const auto w = generate_fbm(0.2, 1, TimeGrid(2.0, 1024), 5).path;
  const auto grid = SpatialGrid::covering(1, 8.0, 0.02);
  const auto L = local_time(w, grid, 0.5, 1.5);
  double total = 0.0;
  for (double v : L.density) total += v * grid.cell_volume();
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(L.escaped_fraction(), 0.0);
}

TEST(LocalTime, SelfConvergesUnderTimeRefinement) {
  // Same fBm realisation at 2^16 steps, read at 2^14, 2^15, 2^16.
  const auto fine = generate_fbm(0.25, 1, TimeGrid(1.0, 65536), 17).path;
  double reach = 0.0;
  for (double v : fine.values) reach = std::max(reach, std::abs(v));
  const auto grid = SpatialGrid::covering(1, reach + 0.05, 1.0 / 64.0);
  const auto l16 = local_time(fine, grid, 0.0, 1.0);
  const auto l15 = local_time(fine.subsampled(2), grid, 0.0, 1.0);
  const auto l14 = local_time(fine.subsampled(4), grid, 0.0, 1.0);
  auto sup = [](const LocalTimeField& a, const LocalTimeField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.density.size(); ++i) m = std::max(m, std::abs(a.density[i] - b.density[i]));
    return m;
  };
  EXPECT_LT(sup(l15, l16), sup(l14, l16));
}

TEST(OccupationFormula, ConstantFieldIsExact) {
  const auto w = generate_fbm(0.25, 1, TimeGrid(1.0, 512), 3).path;
  const auto grid = SpatialGrid::covering(1, 4.0, 1.0 / 128.0);
  const ScalarFunction one = [](std::span<const double>) { return 1.0; };
  EXPECT_EQ(occupation_formula_residual(one, w, grid, 1.0), 0.0);
}

TEST(OccupationFormula, IdentityOnLinearPath) {
  const auto p = linear_path(1024);
  const auto grid = SpatialGrid::symmetric(1, 2.0, 256);
  const ScalarFunction id = [](std::span<const double> x) { return x[0]; };
  EXPECT_LE(occupation_formula_residual(id, p, grid, 1.0), grid.width() / 2.0);
}

TEST(OccupationFormula, BinConstantIndicatorIsExact) {
  const auto w = generate_fbm(0.25, 1, TimeGrid(1.0, 512), 6).path;
  const auto grid = SpatialGrid::symmetric(1, 4.0, 512);
  // Union of whole bins: [-0.5, 0.25).
  const ScalarFunction f = [](std::span<const double> x) { return x[0] >= -0.5 && x[0] < 0.25 ? 1.0 : 0.0; };
  EXPECT_LE(occupation_formula_residual(f, w, grid, 1.0), 1e-15);
}
