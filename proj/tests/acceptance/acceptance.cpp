#include <filesystem>
#include <iostream>

#include "noisereg/error.hpp"
#include "noisereg/experiment.hpp"

using namespace noisereg;

int main(int argc, char** argv) {
  ExperimentConfig config;
  try {
    if (argc > 1) config = ExperimentConfig::from_file(argv[1]);
    config.experiment = "all";
    std::optional<std::filesystem::path> out;
    if (argc > 2) out = std::filesystem::path(argv[2]);
    const auto outcome = run_experiment(config, out);
    int failed = 0;
    for (const auto& r : outcome.criteria) {
      std::cout << "criterion " << r.id << ": " << (r.pass ? "PASS" : "FAIL") << "  " << r.title << " -- "
                << r.summary << " [" << r.seconds << " s]\n";
      failed += r.pass ? 0 : 1;
    }
    std::cout << (outcome.criteria.size() - failed) << "/" << outcome.criteria.size() << " criteria pass\n";
    return failed == 0 ? 0 : 1;
  } catch (const BlowupError& e) {
    std::cerr << "blow-up: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
