// randten: run verification gates and Monte Carlo sweeps from a YAML config.
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "randten/errors.hpp"
#include "randten/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Random tensor chaos bounds: verification gates and Monte Carlo sweeps"};
  app.set_version_flag("--version", std::string(RANDTEN_VERSION));

  std::string config_path, out_dir, cell;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  app.add_option("--config", config_path, "YAML experiment config")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out_dir, "output directory for results.csv / results.json");
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--cell", cell, "single cell, e.g. family=rank-one,d=1,k=2,N=8,p=4");
  CLI11_PARSE(app, argc, argv);

  try {
    randten::ExperimentConfig config = randten::load_config(config_path);
    if (seed) config.seed = *seed;
    if (workers) config.workers = *workers;
    if (!out_dir.empty()) config.output = out_dir;
    std::optional<randten::CellKey> only;
    if (!cell.empty()) only = randten::cell_from_string(cell);

    const randten::RunResult result = randten::run(config, only);

    if (!result.records.empty()) {
      std::cout << randten::csv_header() << '\n';
      for (const auto& r : result.records) {
        std::cout << randten::csv_row(r) << '\n';
        if (!r.ok()) std::cerr << randten::to_string(r.cell) << ": " << r.status << '\n';
      }
    }
    if (result.resumed > 0) std::cout << "resumed " << result.resumed << " cells from " << config.output << '\n';
    for (const auto& s : result.summary)
      std::cout << "k=" << s.k << "  cells=" << s.cells << "  max_ratio=" << s.max_ratio << "  slope=" << s.slope
                << " +- " << s.slope_stderr << '\n';
    for (const auto& g : result.gates)
      std::cout << (g.passed ? "PASS " : "FAIL ") << g.name << "  " << g.detail << '\n';
    return result.passed() ? 0 : 1;
  } catch (const randten::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
