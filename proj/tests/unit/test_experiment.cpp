#include <sstream>

#include <gtest/gtest.h>

#include "noisereg/error.hpp"
#include "noisereg/experiment.hpp"

using namespace noisereg;

TEST(Config, ParsesKeyValueLines) {
  std::istringstream in(
      "# comment\n"
      "experiment = E5\n"
      "H = 0.15   # trailing comment\n"
      "epsilons = 0.5, 0.25,0.125\n"
      "M = 500\n");
  const auto c = ExperimentConfig::parse(in);
  EXPECT_EQ(c.experiment, "E5");
  EXPECT_DOUBLE_EQ(c.hurst, 0.15);
  EXPECT_EQ(c.epsilons, (std::vector<double>{0.5, 0.25, 0.125}));
  EXPECT_EQ(c.paths, 500u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  std::istringstream unknown("colour = blue\n");
  EXPECT_THROW(ExperimentConfig::parse(unknown), ParameterError);
  std::istringstream bad("N = many\n");
  EXPECT_THROW(ExperimentConfig::parse(bad), ParameterError);
  std::istringstream nokey("just text\n");
  EXPECT_THROW(ExperimentConfig::parse(nokey), ParameterError);
}

TEST(Config, HurstAboveAdmissibleBound) {
  ExperimentConfig c;
  c.hurst = 0.3;
  try {
    c.validate();
    FAIL() << "expected a validation error";
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("H exceeds H_max=0.25"), std::string::npos) << e.what();
  }
}

TEST(Config, CrossFieldChecks) {
  ExperimentConfig c;
  c.gamma0 = 0.95;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.gamma = 0.5;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.p = 1.0;
  EXPECT_THROW(c.validate(), HypothesisError);
  c = {};
  c.epsilons = {0.1, 0.2};
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.steps = 1000;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Config, ResolvedEchoesUnits) {
  const auto j = ExperimentConfig{}.resolved();
  EXPECT_EQ(j["H"]["value"], 0.2);
  EXPECT_EQ(j["N"]["unit"], "count");
  EXPECT_TRUE(j.contains("mollifier"));
}

TEST(Experiment, CriteriaMapping) {
  EXPECT_TRUE(criteria_for("E0").empty());
  EXPECT_EQ(criteria_for("E6"), (std::vector<int>{7, 8, 9}));
  EXPECT_EQ(criteria_for("all").size(), 10u);
  EXPECT_THROW(criteria_for("E9"), ParameterError);
}

TEST(Experiment, SmokeIsExact) {
  ExperimentConfig c;
  c.experiment = "E0";
  c.paths = 500;
  const auto out = run_experiment(c, std::nullopt);
  EXPECT_TRUE(out.pass) << out.extra.dump(2);
  EXPECT_TRUE(out.criteria.empty());
}

TEST(Experiment, CheapCriteriaAreReproducible) {
  ExperimentConfig c;
  const auto a = run_criterion(5, c);
  const auto b = run_criterion(5, c);
  EXPECT_TRUE(a.pass);
  EXPECT_EQ(a.details.dump(), b.details.dump());
  EXPECT_TRUE(run_criterion(10, c).pass);
}
