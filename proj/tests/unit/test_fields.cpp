#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "noisereg/error.hpp"
#include "noisereg/fields.hpp"
#include "noisereg/occupation.hpp"

using namespace noisereg;

namespace {

MatrixField ball_indicator(std::size_t dim, double radius) {
  return MatrixField(
      dim, dim, dim,
      [dim, radius](std::span<const double> x, std::span<double> out) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        std::fill(out.begin(), out.end(), 0.0);
        if (r2 <= radius * radius)
          for (std::size_t i = 0; i < dim; ++i) out[i * dim + i] = 1.0;
        return false;
      },
      FieldInfo{"ball", radius, std::nullopt, false});
}

}  // namespace

TEST(MatrixField, ShapeChecks) {
  EXPECT_THROW(constant_matrix(1, 2, 2, {1.0, 2.0, 3.0}), ParameterError);
  EXPECT_THROW(constant_matrix(1, 9, 9, std::vector<double>(81, 0.0)), ParameterError);
  const auto f = constant_matrix(2, 2, 1, {1.0, -2.0});
  const double x[2] = {0.3, 0.4};
  EXPECT_EQ(f(x), (std::vector<double>{1.0, -2.0}));
  EXPECT_EQ(f.entry(1, 0)(x), -2.0);
  EXPECT_THROW(f.entry(2, 0), ParameterError);
}

TEST(MatrixField, LinearCombination) {
  const auto f = linear_combination(2.0, constant_identity(2), -1.0, constant_identity(2, 3.0));
  const double x[2] = {0.0, 5.0};
  EXPECT_EQ(f(x), (std::vector<double>{-1.0, 0.0, 0.0, -1.0}));
}

TEST(MatrixField, LatticeFieldInterpolatesAndVanishesOutside) {
  const auto f = lattice_field(1, 1, 1, 0.0, 0.5, 3, {0.0, 1.0, 4.0});
  const double inside[1] = {0.75}, outside[1] = {1.5};
  EXPECT_DOUBLE_EQ(f(inside)[0], 2.5);
  EXPECT_EQ(f(outside)[0], 0.0);
}

TEST(HsNormSq, Examples) {
  const double x[2] = {0.1, 0.2};
  EXPECT_DOUBLE_EQ(hs_norm_sq(constant_identity(2))(x)[0], 2.0);
  EXPECT_EQ(hs_norm_sq(constant_matrix(2, 2, 2, {0, 0, 0, 0}))(x)[0], 0.0);
  const double gamma = 0.3, K = 2.0;
  const auto s = hs_norm_sq(singular_example(gamma, K, 2));
  const double half[2] = {K / 2.0, 0.0};
  EXPECT_NEAR(s(half)[0], 2.0 * std::pow(K / 2.0, -2.0 * gamma), 1e-12);
}

TEST(SingularExample, GammaZeroIsIndicator) {
  const auto f = singular_example(0.0, 1.0, 2);
  const double in[2] = {0.5, 0.5}, out[2] = {1.0, 1.0};
  EXPECT_EQ(f(in), (std::vector<double>{1.0, 0.0, 0.0, 1.0}));
  EXPECT_EQ(f(out), (std::vector<double>{0.0, 0.0, 0.0, 0.0}));
  EXPECT_FALSE(f.info().singular_at_origin);
}

TEST(SingularExample, IntegrabilityTags) {
  const auto info = singular_example_info(0.4, 1.0, 1);
  EXPECT_DOUBLE_EQ(info.lp_threshold, 2.5);
  EXPECT_TRUE(info.two_below_d_over_gamma);
  const auto f = singular_example(0.4, 1.0, 1);
  EXPECT_TRUE(f.in_lp(2.0));
  EXPECT_FALSE(f.in_lp(2.5));
}

TEST(SingularExample, OriginIsClampedAndFlagged) {
  const auto f = singular_example(0.4, 1.0, 1);
  const double origin[1] = {0.0};
  std::vector<double> out(1);
  EXPECT_TRUE(f.evaluate(origin, out));
  EXPECT_EQ(out[0], kSingularClamp);
  const double x[1] = {0.5};
  EXPECT_FALSE(f.evaluate(x, out));
  EXPECT_NEAR(out[0], std::pow(0.5, -0.4), 1e-15);
}

TEST(Mollifier, KernelHasUnitMass) {
  for (std::size_t d : {1, 2, 3}) {
    // Radial integral: |S^{d-1}| ∫_0^1 ρ(r) r^{d-1} dr.
    const double sphere = 2.0 * std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double r = (i + 0.5) / n;
      acc += MollifierSpec::kernel(r, d) * std::pow(r, static_cast<double>(d) - 1.0) / n;
    }
    EXPECT_NEAR(sphere * acc, 1.0, 1e-8) << "d=" << d;
  }
}

TEST(Mollifier, CutoffIsSmoothStep) {
  const MollifierSpec spec{0.25};
  EXPECT_EQ(spec.cutoff(1.0), 1.0);
  EXPECT_EQ(spec.cutoff(2.0), 1.0);
  EXPECT_EQ(spec.cutoff(4.0), 0.0);
  EXPECT_NEAR(spec.cutoff(3.0), 0.5, 1e-15);
  EXPECT_GT(spec.cutoff(2.5), spec.cutoff(3.5));
}

TEST(Mollify, ConstantOnLargeBallAwayFromBoundary) {
  const auto f = ball_indicator(1, 3.0);
  const MollifierSpec spec{0.125};
  const auto g = mollify(f, spec, SpatialGrid::covering(1, 3.5, 1.0 / 256.0));
  for (double x : {-2.5, -1.0, 0.3, 2.8}) {
    const double p[1] = {x};
    EXPECT_NEAR(g(p)[0], 1.0, 1e-9) << x;
  }
}

TEST(Mollify, SupportWithinCutoffReach) {
  const MollifierSpec spec{0.25};
  const auto g = mollify(constant_identity(1), spec, SpatialGrid::covering(1, 4.5, 1.0 / 64.0));
  for (double x : {4.26, 4.4, -4.3}) {
    const double p[1] = {x};
    EXPECT_EQ(g(p)[0], 0.0) << x;
  }
}

TEST(Mollify, ResolutionAndCoverageErrors) {
  const auto f = singular_example(0.4, 1.0, 1);
  EXPECT_THROW(mollify(f, MollifierSpec{0.25}, SpatialGrid::covering(1, 2.0, 0.125)), ResolutionError);
  EXPECT_THROW(mollify(f, MollifierSpec{0.25}, SpatialGrid::covering(1, 0.5, 1.0 / 64.0)), ParameterError);
}

TEST(Mollify, ApproximationErrorShrinksAlongEpsilon) {
  const auto f = singular_example(0.4, 1.0, 1);
  const auto grid = SpatialGrid::covering(1, 1.25, 1.0 / 1024.0);
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {0.25, 0.125, 0.0625, 0.03125, 0.015625}) {
    const auto g = mollify(f, MollifierSpec{eps}, SpatialGrid::covering(1, 1.0 + eps + 0.01, 1.0 / 1024.0));
    const auto diff = linear_combination(1.0, g, -1.0, f);
    MatrixField tagged(1, 1, 1, [diff](std::span<const double> x, std::span<double> out) { return diff.evaluate(x, out); },
                       FieldInfo{"diff", 1.5, std::nullopt, true});
    const double err = lp_norm(tagged, 2.0, grid).value;
    EXPECT_LT(err, previous) << "eps=" << eps;
    previous = err;
  }
}

TEST(LpNorm, SingularExampleInOneDimension) {
  const auto f = singular_example(0.4, 1.0, 1);
  const auto n = lp_norm(f, 2.0, SpatialGrid::symmetric(1, 1.0, 4096));
  EXPECT_NEAR(n.value, std::sqrt(10.0), 0.02 * std::sqrt(10.0));
  EXPECT_FALSE(n.integrability_warning);
}

TEST(LpNorm, IdentityOnUnitDisc) {
  const auto n = lp_norm(ball_indicator(2, 1.0), 2.0, SpatialGrid::symmetric(2, 1.25, 512));
  EXPECT_NEAR(n.value, std::sqrt(2.0 * std::numbers::pi), 0.02 * std::sqrt(2.0 * std::numbers::pi));
}

TEST(LpNorm, ZeroFieldAndHomogeneity) {
  const auto grid = SpatialGrid::symmetric(1, 2.0, 256);
  EXPECT_EQ(lp_norm(constant_matrix(1, 1, 1, {0.0}), 2.0, grid).value, 0.0);
  const auto f = ball_indicator(1, 1.0);
  const double base = lp_norm(f, 3.0, grid).value;
  const auto scaled = linear_combination(-2.5, f, 0.0, f);
  EXPECT_NEAR(lp_norm(scaled, 3.0, grid).value, 2.5 * base, 1e-12 * base);
}

TEST(LpNorm, WarnsOutsideIntegrability) {
  const auto f = singular_example(0.6, 1.0, 1);
  const auto n = lp_norm(f, 2.0, SpatialGrid::symmetric(1, 1.0, 1024));
  EXPECT_TRUE(n.integrability_warning);
  EXPECT_FALSE(n.warning.empty());
}
