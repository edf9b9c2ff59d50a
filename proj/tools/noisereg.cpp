#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "noisereg/averaging.hpp"
#include "noisereg/error.hpp"
#include "noisereg/experiment.hpp"
#include "noisereg/occupation.hpp"
#include "noisereg/paths.hpp"
#include "noisereg/sewing.hpp"
#include "noisereg/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace noisereg;

namespace {

enum Exit { kOk = 0, kCriterionFailed = 1, kValidation = 2, kBlowup = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 0;
  std::string format;  // csv unless the subcommand defaults otherwise
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = c.threads;
  if (!c.out.empty()) cfg.out = c.out;
  return cfg;
}

// Writes to --out when given, stdout otherwise.
template <class F>
void emit(const Common& c, F&& write) {
  if (c.out.empty()) {
    write(std::cout);
    return;
  }
  if (c.out.find('/') != std::string::npos) fs::create_directories(fs::path(c.out).parent_path());
  std::ofstream f(c.out);
  if (!f) throw Error("cannot write " + c.out);
  write(f);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "base seed");
  app->add_option("--out", c.out, "output file (directory for run/verify)");
  app->add_option("--threads", c.threads, "worker threads");
  app->add_option("--format", c.format, "output format (csv; admissibility defaults to json)")->check(CLI::IsMember({"csv", "json"}));
}

json path_json(const Path& p) {
  json rows = json::array();
  for (std::size_t k = 0; k < p.points(); ++k) {
    json v = json::array();
    for (std::size_t c = 0; c < p.dim; ++c) v.push_back(p(k, c));
    rows.push_back({{"t", p.grid.node(k)}, {"w", v}});
  }
  return rows;
}

ScalarFunction named_field(const std::string& name) {
  if (name == "indicator") return [](std::span<const double> x) { return std::abs(x[0]) <= 0.5 ? 1.0 : 0.0; };
  if (name == "sin") return [](std::span<const double> x) { return std::sin(3.0 * x[0]); };
  if (name == "tent") return [](std::span<const double> x) { return std::max(0.0, 1.0 - std::abs(x[0])); };
  throw ParameterError("unknown field '" + name + "' (indicator, sin, tent)");
}

Germ named_germ(const std::string& name) {
  Germ g;
  if (name == "additive") {
    g.eval = [](double s, double t, std::span<double> out) { out[0] = std::sin(5.0 * t) + t * t - std::sin(5.0 * s) - s * s; };
  } else if (name == "quadratic") {
    g.eval = [](double s, double t, std::span<double> out) { out[0] = s * (t - s); };
    g.beta = 2.0;
  } else if (name == "sqrt") {
    g.eval = [](double s, double t, std::span<double> out) { out[0] = std::sqrt(t - s); };
  } else {
    throw ParameterError("unknown germ '" + name + "' (additive, quadratic, sqrt)");
  }
  return g;
}

int report(const ExperimentOutcome& outcome) {
  for (const auto& r : outcome.criteria)
    std::cout << "criterion " << r.id << " (" << r.title << "): " << (r.pass ? "PASS" : "FAIL") << "  " << r.summary
              << '\n';
  if (!outcome.extra.is_null())
    std::cout << "smoke: " << (outcome.pass ? "PASS" : "FAIL") << '\n';
  return outcome.pass ? kOk : kCriterionFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noisereg: regularization by noise toolkit"};
  app.require_subcommand(1);
  Common common;

  // gen-fbm
  double hurst = 0.25, horizon = 1.0;
  std::size_t dim = 1, steps = 1024;
  std::string method = "automatic";
  auto* gen = app.add_subcommand("gen-fbm", "sample a fractional Brownian path");
  add_common(gen, common);
  gen->add_option("--hurst", hurst)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--dim", dim);
  gen->add_option("--steps", steps);
  gen->add_option("--horizon", horizon);
  gen->add_option("--method", method)->check(CLI::IsMember({"automatic", "circulant", "cholesky"}));

  // local-time
  double s0 = 0.0, s1 = 1.0, width = 1.0 / 512.0;
  auto* lt = app.add_subcommand("local-time", "local time of a sampled fBm path on [s,t]");
  add_common(lt, common);
  lt->add_option("--hurst", hurst);
  lt->add_option("--steps", steps);
  lt->add_option("--horizon", horizon);
  lt->add_option("--s", s0);
  lt->add_option("--t", s1);
  lt->add_option("--width", width);

  // average
  std::string field = "indicator";
  auto* av = app.add_subcommand("average", "average a field along a sampled fBm path via its local time");
  add_common(av, common);
  av->add_option("--hurst", hurst);
  av->add_option("--steps", steps);
  av->add_option("--horizon", horizon);
  av->add_option("--s", s0);
  av->add_option("--t", s1);
  av->add_option("--width", width);
  av->add_option("--field", field)->check(CLI::IsMember({"indicator", "sin", "tent"}));

  // sew
  std::string germ = "quadratic";
  int levels = 12;
  auto* sw = app.add_subcommand("sew", "dyadic sewing of a canned germ on [s,t]");
  add_common(sw, common);
  sw->add_option("--germ", germ)->check(CLI::IsMember({"additive", "quadratic", "sqrt"}));
  sw->add_option("--levels", levels);
  sw->add_option("--s", s0);
  sw->add_option("--t", s1);

  // solve
  std::size_t eps_index = 0;
  auto* so = app.add_subcommand("solve", "solve the mollified SDE ensemble and tabulate window moments");
  add_common(so, common);
  so->add_option("--eps-index", eps_index, "index into the configured epsilon schedule");

  auto* ve = app.add_subcommand("verify", "identity checks along the solved ensembles (criteria 7-9)");
  add_common(ve, common);

  // admissibility
  double p = 2.0;
  std::string variant = "II";
  auto* ad = app.add_subcommand("admissibility", "regularity budget and Hurst bounds");
  add_common(ad, common);
  ad->add_option("--hurst", hurst);
  ad->add_option("--dim", dim);
  ad->add_option("--p", p);
  ad->add_option("--variant", variant)->check(CLI::IsMember({"I", "II"}));

  std::string experiment;
  auto* run = app.add_subcommand("run", "run a canned experiment (E0..E6 or all)");
  add_common(run, common);
  run->add_option("--experiment", experiment)->check(CLI::IsMember({"E0", "E1", "E2", "E3", "E4", "E5", "E6", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    const bool as_json = common.format == "json" || (common.format.empty() && *ad);
    const std::uint64_t seed = common.seed.value_or(7);
    if (*gen) {
      FbmOptions opt;
      opt.method = method == "circulant" ? FbmMethod::circulant
                   : method == "cholesky" ? FbmMethod::cholesky
                                          : FbmMethod::automatic;
      const auto w = generate_fbm(hurst, dim, TimeGrid(horizon, steps), seed, opt);
      emit(common, [&](std::ostream& o) {
        if (as_json)
          o << json{{"H", w.hurst}, {"seed", w.seed}, {"path", path_json(w.path)}}.dump(2) << '\n';
        else
          write_csv(o, w);
      });
    } else if (*lt || *av) {
      const auto w = generate_fbm(hurst, 1, TimeGrid(horizon, steps), seed).path;
      double reach = 0.0;
      for (double v : w.values) reach = std::max(reach, std::abs(v));
      const auto L = local_time(w, SpatialGrid::covering(1, reach + width, width), s0, s1);
      if (*lt) {
        emit(common, [&](std::ostream& o) {
          if (!as_json) return write_csv(o, L);
          json rows = json::array();
          std::vector<double> z(1);
          for (std::size_t i = 0; i < L.density.size(); ++i) {
            L.measure.grid.center(i, z);
            rows.push_back({{"z", z[0]}, {"L", L.density[i]}});
          }
          o << json{{"s", s0}, {"t", s1}, {"escaped", L.escaped_fraction()}, {"density", rows}}.dump(2) << '\n';
        });
      } else {
        const auto f = sample_on_grid(named_field(field), SpatialGrid::covering(1, 1.5, width));
        const auto T = average_via_local_time(f, L);
        emit(common, [&](std::ostream& o) {
          if (!as_json) return write_csv(o, T);
          json rows = json::array();
          for (std::size_t i = 0; i < T.values.size(); ++i) rows.push_back({{"x", T.lattice.node(i)}, {"value", T.values[i]}});
          o << json{{"field", field}, {"s", s0}, {"t", s1}, {"values", rows}}.dump(2) << '\n';
        });
      }
    } else if (*sw) {
      const auto r = sew(named_germ(germ), s0, s1, levels);
      emit(common, [&](std::ostream& o) {
        if (as_json) return void(o << json(r).dump(2) << '\n');
        o << "level,sum,difference\n";
        o.precision(17);
        for (std::size_t k = 0; k < r.level_sums.size(); ++k) {
          o << k << ',' << r.level_sums[k][0] << ',';
          if (k > 0) o << r.level_differences[k - 1];
          o << '\n';
        }
      });
    } else if (*so) {
      const auto cfg = load(common);
      cfg.validate();
      const auto sc = make_scenario(cfg);
      if (eps_index >= sc.epsilons.size()) throw ParameterError("--eps-index out of range");
      const auto fields = mollified_fields(cfg, sc);
      const auto e = solve_ensemble(sc, fields[eps_index]);
      const auto windows = dyadic_windows(sc.fbm.path.grid, cfg.window_min_level, cfg.window_max_level);
      const std::vector<double> ms{cfg.moment};
      const auto table = moment_table(e, ms, windows);
      emit(common, [&](std::ostream& o) {
        if (!as_json) return write_csv(o, table);
        json rows = json::array();
        for (const auto& m : table)
          rows.push_back({{"s", m.s}, {"t", m.t}, {"m", m.m}, {"moment", m.moment}, {"stderr", m.std_error}});
        o << json{{"epsilon", sc.epsilons[eps_index]}, {"blowups", e.blowup_count}, {"moments", rows}}.dump(2) << '\n';
      });
    } else if (*ad) {
      const auto v = variant == "I" ? RegularityVariant::I : RegularityVariant::II;
      json j{{"H_max", hurst_admissible_main(dim, p)}, {"budget", admissible_regularity(hurst, dim, p, v)}};
      emit(common, [&](std::ostream& o) {
        if (as_json) return void(o << j.dump(2) << '\n');
        o << "H,d,p,variant,H_max,lambda_max,gamma_max_at_lambda_0\n"
          << hurst << ',' << dim << ',' << p << ',' << variant << ',' << j["H_max"].get<double>() << ','
          << j["budget"]["lambda_max"].get<double>() << ',' << j["budget"]["gamma_max_at_lambda_0"].get<double>() << '\n';
      });
    } else if (*ve || *run) {
      auto cfg = load(common);
      if (*ve) cfg.experiment = "E6";
      if (!experiment.empty()) cfg.experiment = experiment;
      cfg.validate();
      const auto outcome = run_experiment(cfg, fs::path(cfg.out));
      return report(outcome);
    }
  } catch (const BlowupError& e) {
    std::cerr << "blow-up: " << e.what() << '\n';
    return kBlowup;
  } catch (const ParameterError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const HypothesisError& e) {
    std::cerr << "hypothesis violated: " << e.what() << '\n';
    return kValidation;
  } catch (const ResolutionError& e) {
    std::cerr << "resolution: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCriterionFailed;
  }
  return kOk;
}
