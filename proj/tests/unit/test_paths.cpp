#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "noisereg/error.hpp"
#include "noisereg/paths.hpp"
#include "noisereg/stats.hpp"

using namespace noisereg;

namespace {

double within_sigmas(const std::vector<double>& xs, double target) {
  return std::abs(mean(xs) - target) / standard_error(xs);
}

}  // namespace

TEST(TimeGrid, NodesAndIndices) {
  const TimeGrid g(2.0, 8);
  EXPECT_EQ(g.points(), 9u);
  EXPECT_DOUBLE_EQ(g.dt(), 0.25);
  EXPECT_EQ(g.node(8), 2.0);
  EXPECT_EQ(g.index_of(0.75), 3u);
  EXPECT_THROW(g.index_of(0.3), ParameterError);
  EXPECT_EQ(g.coarsened(2), TimeGrid(2.0, 4));
}

TEST(Fbm, RejectsHurstOutsideUnitInterval) {
  const TimeGrid g(1.0, 16);
  EXPECT_THROW(generate_fbm(0.0, 1, g, 1), ParameterError);
  EXPECT_THROW(generate_fbm(1.0, 1, g, 1), ParameterError);
  EXPECT_THROW(generate_fbm(-0.2, 1, g, 1), ParameterError);
}

TEST(Fbm, StartsAtZeroAndIsDeterministic) {
  const TimeGrid g(1.0, 64);
  const auto a = generate_fbm(0.3, 2, g, 11);
  const auto b = generate_fbm(0.3, 2, g, 11);
  const auto c = generate_fbm(0.3, 2, g, 12);
  EXPECT_EQ(a.path.values, b.path.values);
  EXPECT_NE(a.path.values, c.path.values);
  EXPECT_EQ(a.path(0, 0), 0.0);
  EXPECT_EQ(a.path(0, 1), 0.0);
}

TEST(Fbm, CovarianceFunction) {
  EXPECT_DOUBLE_EQ(fbm_covariance(0.5, 0.3, 0.7), 0.3);
  EXPECT_NEAR(fbm_covariance(0.25, 1.0, 2.0), 0.5 * (1.0 + std::sqrt(2.0) - 1.0), 1e-15);
}

TEST(Fbm, BrownianCaseHasUncorrelatedDisjointIncrements) {
  const TimeGrid g(1.0, 16);
  const FbmGenerator gen(0.5, 1, g);
  std::vector<double> prod;
  for (std::size_t i = 0; i < 20000; ++i) {
    const auto w = gen.sample(3, i).path;
    prod.push_back((w(8, 0) - w(0, 0)) * (w(16, 0) - w(8, 0)));
  }
  EXPECT_LE(within_sigmas(prod, 0.0), 4.0);
}

TEST(Fbm, UnitVarianceAtTimeOne) {
  for (double h : {0.1, 0.25, 0.75}) {
    const TimeGrid g(1.0, 32);
    const FbmGenerator gen(h, 1, g);
    std::vector<double> sq;
    for (std::size_t i = 0; i < 20000; ++i) sq.push_back(std::pow(gen.sample(5, i).path(32, 0), 2));
    EXPECT_LE(within_sigmas(sq, 1.0), 4.0) << "H=" << h;
  }
}

TEST(Fbm, CrossMomentAgainstClosedForm) {
  // R(1,2) = ½(1 + 2^{2H} - 1) with H = 1/4.
  const TimeGrid g(2.0, 64);
  const FbmGenerator gen(0.25, 1, g);
  std::vector<double> prod;
  for (std::size_t i = 0; i < 20000; ++i) {
    const auto w = gen.sample(9, i).path;
    prod.push_back(w(32, 0) * w(64, 0));
  }
  EXPECT_LE(within_sigmas(prod, 0.5 * std::sqrt(2.0)), 4.0);
}

TEST(Fbm, CirculantAndCholeskyShareTheLaw) {
  const TimeGrid g(1.0, 32);
  const FbmGenerator circ(0.3, 1, g, FbmMethod::circulant);
  const FbmGenerator chol(0.3, 1, g, FbmMethod::cholesky);
  EXPECT_EQ(circ.method(), FbmMethod::circulant);
  EXPECT_EQ(chol.method(), FbmMethod::cholesky);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < 20000; ++i) {
    a.push_back(circ.sample(1, i).path(16, 0) * circ.sample(1, i).path(32, 0));
    b.push_back(chol.sample(2, i).path(16, 0) * chol.sample(2, i).path(32, 0));
  }
  const double exact = fbm_covariance(0.3, 0.5, 1.0);
  EXPECT_LE(within_sigmas(a, exact), 4.0);
  EXPECT_LE(within_sigmas(b, exact), 4.0);
}

TEST(Bm, SingleStepVariance) {
  const TimeGrid g(1.0, 1);
  std::vector<double> sq;
  for (std::size_t i = 0; i < 20000; ++i) sq.push_back(std::pow(generate_bm(1, g, 4, i).increments[0], 2));
  EXPECT_LE(within_sigmas(sq, 1.0), 4.0);
}

TEST(Bm, DeterministicAndConsistent) {
  const TimeGrid g(1.0, 128);
  const auto a = generate_bm(2, g, 8, 3);
  const auto b = generate_bm(2, g, 8, 3);
  EXPECT_EQ(a.path.values, b.path.values);
  EXPECT_EQ(a.increments, b.increments);
  double acc = 0.0;
  for (std::size_t k = 0; k < 128; ++k) acc += a.increments[k * 2 + 1];
  EXPECT_NEAR(acc, a.path(128, 1), 1e-12);
  EXPECT_EQ(a.path(0, 0), 0.0);
}

TEST(Bm, QuadraticVariationConcentrates) {
  // Σ (ΔB)² is T χ²_N / N; compare a Monte Carlo sample of it with T.
  const TimeGrid g(1.0, 4096);
  std::vector<double> qv;
  for (std::size_t i = 0; i < 200; ++i) {
    const auto b = generate_bm(1, g, 21, i);
    double acc = 0.0;
    for (double x : b.increments) acc += x * x;
    qv.push_back(acc);
  }
  EXPECT_LE(within_sigmas(qv, 1.0), 4.0);
}

TEST(Path, SubsamplingKeepsNodes) {
  const TimeGrid g(1.0, 64);
  const auto w = generate_fbm(0.4, 1, g, 2).path;
  const auto s = w.subsampled(4);
  EXPECT_EQ(s.grid, TimeGrid(1.0, 16));
  for (std::size_t k = 0; k <= 16; ++k) EXPECT_EQ(s(k, 0), w(4 * k, 0));
}

TEST(Path, CsvHeader) {
  std::ostringstream out;
  write_csv(out, generate_fbm(0.25, 2, TimeGrid(1.0, 4), 3));
  const auto text = out.str();
  EXPECT_EQ(text.rfind("# H=0.25", 0), 0u);
  EXPECT_NE(text.find("t,w_1,w_2"), std::string::npos);
}
