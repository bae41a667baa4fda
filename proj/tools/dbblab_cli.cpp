// dbblab: scenario-driven front end for the de Broglie-Bohm arrival-time lab.
//
//   dbblab run --scenario file.json --out-dir dir [--seed-override N] [--threads K]
//   dbblab validate --scenario file.json
//
// Exit codes: 0 success, 2 schema error, 3 numeric failure (quadrature or
// integration), 4 precondition violation.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dbb/scenario_run.hpp"

namespace {

int run_command(const std::string& scenario, const std::string& out_dir,
                std::optional<std::uint64_t> seed_override, unsigned threads) {
  dbb::RunOptions opts;
  opts.seed_override = seed_override;
  opts.threads = threads;
  const dbb::RunResult res = dbb::run_scenario(scenario, out_dir, opts);
  std::cout << "wrote " << res.outputs.size() << " output file(s) to " << out_dir << "\n";
  for (const auto& f : res.outputs) std::cout << "  " << f << "\n";
  std::cout << "  run_manifest.json\n";
  return 0;
}

int validate_command(const std::string& scenario) {
  const dbb::ValidationReport rep = dbb::validate_scenario_file(scenario);
  std::cout << rep.to_json().dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"de Broglie-Bohm arrival-time laboratory"};
  app.require_subcommand(1);

  std::string scenario, out_dir = ".";
  std::uint64_t seed_override_value = 0;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "run a scenario file");
  run->add_option("--scenario", scenario, "scenario JSON file")->required();
  run->add_option("--out-dir", out_dir, "output directory")->required();
  auto* seed_opt =
      run->add_option("--seed-override", seed_override_value, "override the scenario seed");
  run->add_option("--threads", threads, "worker pool size (default: hardware)");

  auto* validate = app.add_subcommand("validate", "validate a scenario file");
  validate->add_option("--scenario", scenario, "scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run)) {
      std::optional<std::uint64_t> seed_override;
      if (seed_opt->count() > 0) seed_override = seed_override_value;
      return run_command(scenario, out_dir, seed_override, threads);
    }
    return validate_command(scenario);
  } catch (const dbb::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const dbb::QuadratureError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const dbb::StepFailureError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const dbb::Error& e) {
    std::cerr << "precondition violation: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
