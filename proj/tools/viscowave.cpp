#include "viscowave/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace viscowave;

int main(int argc, char** argv) {
  CLI::App app{"Viscoelastic wave equation lab: runs, hypothesis checks, sweeps"};
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<long long> seed;
  std::optional<int> threads;
  app.add_option("--config", config_path, "JSON experiment configuration");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--threads", threads, "worker threads (default: VISCOWAVE_THREADS, else all cores)");
  app.fallthrough();

  std::string kind;
  for (const char* name : {"run", "check", "sweep", "compare-memory", "perturb"})
    app.add_subcommand(name, std::string("experiment kind '") + name + "'")->callback([&kind, name] { kind = name; });
  std::string csv_path;
  auto* validate = app.add_subcommand("validate-csv", "re-check the invariants of an energy CSV");
  validate->add_option("csv", csv_path, "energy CSV to check")->required();
  app.require_subcommand(0, 1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      std::ifstream in(csv_path);
      if (!in) {
        std::cerr << "cannot open " << csv_path << '\n';
        return 1;
      }
      const CsvValidation v = validate_energy_csv(in);
      for (const auto& msg : v.violations) std::cerr << msg << '\n';
      std::cout << v.rows << " rows, " << v.violations.size() << " violations\n";
      return v.ok() ? 0 : 1;
    }
    if (config_path.empty()) {
      std::cerr << "--config is required\n";
      return 2;
    }
    ExperimentConfig cfg = load_config(config_path);
    if (seed) {
      if (*seed < 0) throw ConfigError("--seed must be non-negative");
      cfg.seed = static_cast<std::uint64_t>(*seed);
      cfg.sobolev.seed = cfg.seed;
    }
    return run_cli(cfg, kind, out_dir, resolve_threads(threads), std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalFault& e) {
    std::cerr << "numerical fault: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
