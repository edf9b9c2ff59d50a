#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisereg/fields.hpp"
#include "noisereg/solver.hpp"

namespace noisereg {

/// Parameter surface of the canned experiments. Read from `key = value`
/// lines (`#` starts a comment, lists are comma separated).
struct ExperimentConfig {
  std::string experiment = "all";  ///< E0..E6 or all
  double hurst = 0.2;
  std::size_t dim = 1;
  std::size_t brownian_dim = 1;
  double p = 2.0;
  std::string sigma = "singular";  ///< singular | identity
  double sigma_scale = 1.0;        ///< multiplier for the identity field
  double gamma = 0.4;
  double radius = 1.0;             ///< K, support radius of the singular example
  std::vector<double> x0{0.5};
  double horizon = 1.0;            ///< T
  std::size_t steps = 1024;        ///< N
  std::size_t paths = 10000;       ///< M
  std::vector<double> epsilons{0.25, 0.125, 0.0625, 0.03125, 0.015625};
  double moment = 4.0;             ///< m
  double gamma0 = 0.85;
  int window_min_level = 0;        ///< dyadic window levels of the moment sup
  int window_max_level = 6;
  double field_width = 1.0 / 1024.0;  ///< spatial bin width for mollification and local times
  std::uint64_t seed = 20240611;   ///< base seed for Brownian drivers and auxiliary draws
  std::uint64_t fbm_seed = 7;      ///< seed of the frozen fBm realisation
  unsigned threads = 1;
  std::size_t bootstrap = 100;
  // Criterion-specific sizes.
  std::size_t covariance_paths = 20000;
  std::size_t occupation_paths = 32;
  std::size_t regularity_steps = 16384;
  double regularity_width = 1.0 / 512.0;
  std::string out = "noisereg-out";

  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig from_file(const std::filesystem::path& path);
  /// Applies one `key = value` assignment; throws ParameterError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  /// Cross-field checks: H below the admissible Hurst bound, γ0 < 1 - Hd/2 and,
  /// for the singular example, γ < d/p. Throws ParameterError or HypothesisError.
  void validate() const;

  /// Every parameter with its unit, as written to config.json.
  nlohmann::json resolved() const;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string summary;      ///< one-line human readable outcome
  nlohmann::json details;   ///< numbers behind the verdict (deterministic)
  double seconds = 0.0;     ///< wall time; kept out of summary.json
};

/// Runs one acceptance criterion (1..10) with the given configuration.
CriterionResult run_criterion(int id, const ExperimentConfig& config);

/// Criteria covered by an experiment id (E0 has none: it is a smoke test).
std::vector<int> criteria_for(const std::string& experiment);

struct ExperimentOutcome {
  std::vector<CriterionResult> criteria;
  nlohmann::json extra;  ///< experiment-specific results (e.g. the E0 smoke checks)
  bool pass = false;
};

/// Runs the configured experiment, writing config.json, summary.json,
/// timing.json and result CSVs into `out_dir` when given.
ExperimentOutcome run_experiment(const ExperimentConfig& config,
                                 const std::optional<std::filesystem::path>& out_dir);

/// Constant-σ smoke test: every identity must hold with zero discretisation margin.
nlohmann::json run_smoke(const ExperimentConfig& config, bool& pass);

/// Frozen fBm, coefficient and schedule described by the config.
QuenchedScenario make_scenario(const ExperimentConfig& config);

/// σ_ε for each ε (the coefficient itself when it is already bounded and smooth).
std::vector<MatrixField> mollified_fields(const ExperimentConfig& config, const QuenchedScenario& scenario);

}  // namespace noisereg
