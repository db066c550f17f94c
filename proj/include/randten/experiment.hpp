#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "randten/families.hpp"

namespace randten {

enum class Command { VerifyWick, VerifyMerging, BoundSweep, Decoupling, Khintchine, Replay };

std::string to_string(Command c);
Command command_from_string(const std::string& s);

struct FamilySpec {
  std::string name;
  FamilyParams params;
};

struct ExperimentConfig {
  Command command = Command::BoundSweep;
  std::uint64_t seed = 0;
  std::size_t samples = 512;
  std::vector<int> N{4, 8, 16, 32};
  std::vector<int> k{1, 2, 3};
  std::vector<double> p{2, 4, 8};
  std::vector<int> d{1};
  int a_count = 1;
  int b_count = 1;
  std::vector<int> signs;  // empty: alternating +, -, +, ...
  std::vector<FamilySpec> families;
  double norm_tol = 1e-8;
  double slack_sigma = 3.0;  // decoupling gate
  double slope_sigma = 2.0;  // bound-sweep trend gate
  std::size_t trials = 1000;  // verify-merging
  std::size_t derivative_cases = 200;  // verify-wick
  std::size_t workers = 1;
  std::filesystem::path output = "results";
  std::filesystem::path source;  // replay: results.json of a previous run

  // Throws ConfigError on values outside the supported ranges.
  void validate() const;
  std::vector<int> signs_for(int k) const;
};

// YAML text or file. `seed` is mandatory.
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Everything that determines the numbers; excludes output path and workers.
nlohmann::json config_snapshot(const ExperimentConfig& config);
ExperimentConfig config_from_snapshot(const nlohmann::json& snapshot);
// 16 hex digits of FNV-1a over the canonical snapshot.
std::string config_hash(const ExperimentConfig& config);

struct CellKey {
  std::string family;
  int d = 1;
  int k = 1;
  int N = 4;
  double p = 2.0;

  auto operator<=>(const CellKey&) const = default;
};

// "family=dense-gaussian,d=1,k=2,N=8,p=4"; parse accepts any field order.
std::string to_string(const CellKey& key);
CellKey cell_from_string(const std::string& s);

struct ResultRecord {
  std::string config_hash;
  CellKey cell;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double lhs = 0.0;
  double stderr_lhs = 0.0;
  double rhs_max = 0.0;
  std::string best_partition;
  double ratio = 0.0;
  double runtime_ms = 0.0;
  std::string version;
  std::string status = "ok";
  std::map<std::string, double> extras;

  bool ok() const { return status == "ok"; }
};

nlohmann::json to_json(const ResultRecord& r);
ResultRecord record_from_json(const nlohmann::json& j);

struct Gate {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct TrendSummary {
  int k = 0;
  std::size_t cells = 0;
  double max_ratio = 0.0;
  double slope = 0.0;  // d ratio / d log log N, within (family, p, d) groups
  double slope_stderr = 0.0;
};

struct RunResult {
  std::vector<ResultRecord> records;  // canonical cell order
  std::vector<Gate> gates;
  std::vector<TrendSummary> summary;
  std::size_t resumed = 0;  // cells taken from an existing output

  bool passed() const;
};

// Cells of the grid, in canonical order. Commands without a grid return none.
std::vector<CellKey> grid_cells(const ExperimentConfig& config);

// Seed shared by all p of one (family, d, k, N) cell.
std::uint64_t cell_seed(std::uint64_t seed, const CellKey& key);

// Computes one group of cells that differ only in p (all keys must agree on
// family, d, k, N). Failures are recorded in the status field.
std::vector<ResultRecord> run_cells(const ExperimentConfig& config, const std::vector<CellKey>& keys,
                                    std::size_t sample_workers = 1);

std::vector<TrendSummary> trend_summary(const std::vector<ResultRecord>& records);

// Executes the configured command. When config.output is non-empty, writes
// results.csv and results.json there (temp file + rename) after every
// completed cell and reuses records of matching cells already present.
// `only` restricts a grid command to one cell.
RunResult run(const ExperimentConfig& config, const std::optional<CellKey>& only = std::nullopt);

// Recomputes records from a results.json document and compares lhs bit for bit.
RunResult replay(const nlohmann::json& results, const std::optional<CellKey>& only, std::size_t workers);

void write_results(const std::filesystem::path& dir, const ExperimentConfig& config, const RunResult& result);
std::string csv_header();
std::string csv_row(const ResultRecord& r);

}  // namespace randten
