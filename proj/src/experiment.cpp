#include "randten/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "randten/errors.hpp"
#include "randten/estimator.hpp"
#include "randten/parallel.hpp"
#include "randten/verify.hpp"

namespace randten {

namespace {

const std::vector<std::pair<Command, std::string>>& command_names() {
  static const std::vector<std::pair<Command, std::string>> names{
      {Command::VerifyWick, "verify-wick"}, {Command::VerifyMerging, "verify-merging"},
      {Command::BoundSweep, "bound-sweep"}, {Command::Decoupling, "decoupling"},
      {Command::Khintchine, "khintchine"},  {Command::Replay, "replay"},
  };
  return names;
}

bool has_grid(Command c) {
  return c == Command::BoundSweep || c == Command::Decoupling || c == Command::Khintchine;
}

template <class T>
std::vector<T> as_list(const YAML::Node& node, const std::string& key) {
  try {
    if (node.IsSequence()) return node.as<std::vector<T>>();
    return {node.as<T>()};
  } catch (const YAML::Exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

template <class T>
T as_scalar(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t string_word(const std::string& s) { return fnv1a(s); }

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// JSON cannot hold NaN or infinity; failed cells store null.
nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << content;
    if (!out.flush()) throw Error("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Gate report_gate(const VerificationReport& r) {
  std::ostringstream os;
  os << r.cases << " cases, " << r.failures << " failures";
  if (r.worst != 0.0) os << ", worst " << r.worst;
  for (const auto& m : r.messages) os << "; " << m;
  return {r.name, r.ok() && r.cases > 0, os.str()};
}

}  // namespace

std::string to_string(Command c) {
  for (const auto& [cmd, name] : command_names())
    if (cmd == c) return name;
  return "unknown";
}

Command command_from_string(const std::string& s) {
  for (const auto& [cmd, name] : command_names())
    if (name == s) return cmd;
  throw ConfigError("unknown command '" + s + "'");
}

std::vector<int> ExperimentConfig::signs_for(int order) const {
  if (!signs.empty()) {
    if (static_cast<int>(signs.size()) < order) throw ConfigError("shape.signs shorter than chaos order");
    return {signs.begin(), signs.begin() + order};
  }
  std::vector<int> out;
  for (int j = 0; j < order; ++j) out.push_back(j % 2 == 0 ? 1 : -1);
  return out;
}

void ExperimentConfig::validate() const {
  if (command == Command::Replay) {
    if (source.empty()) throw ConfigError("replay needs 'source' (a results.json path)");
    return;
  }
  if (samples < 2) throw ConfigError("samples must be >= 2");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!(norm_tol > 0.0)) throw ConfigError("tolerances.norm must be positive");
  if (!has_grid(command)) return;
  if (N.empty() || k.empty() || p.empty() || d.empty() || families.empty())
    throw ConfigError("grid and families must be non-empty");
  for (int n : N)
    if (n < 2 || n > 4096) throw ConfigError("grid N must lie in [2, 4096]");
  for (int kk : k)
    if (kk < 1 || kk > 4) throw ConfigError("grid k must lie in [1, 4]");
  for (int dd : d)
    if (dd < 1 || dd > 3) throw ConfigError("grid d must lie in [1, 3]");
  for (double pp : p)
    if (!(pp >= 1.0) || !std::isfinite(pp)) throw ConfigError("grid p must be >= 1");
  if (a_count < 0 || b_count < 0 || a_count + b_count > 4) throw ConfigError("shape A, B must be small non-negative");
  for (int s : signs)
    if (s != 1 && s != -1) throw ConfigError("shape.signs entries must be +1 or -1");
  if (command == Command::Khintchine)
    for (int kk : k)
      if (kk != 1) throw ConfigError("khintchine requires k = 1");
  for (int kk : k) signs_for(kk);
  const std::set<std::string> known{"dense-gaussian", "sparse-gaussian", "diagonal-pairing", "rank-one",
                                    "random-sign",    "diagonal-series", "identity-series"};
  for (const auto& f : families) {
    if (!known.contains(f.name)) throw ConfigError("unknown tensor family '" + f.name + "'");
    if (!(f.params.density > 0.0 && f.params.density <= 1.0)) throw ConfigError("density must lie in (0, 1]");
    if (f.params.budget < 1) throw ConfigError("budget must be >= 1");
  }
}

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping");

  ExperimentConfig c;
  if (!root["command"]) throw ConfigError("config needs 'command'");
  c.command = command_from_string(as_scalar<std::string>(root["command"], "command"));
  if (c.command == Command::Replay) {
    if (root["source"]) c.source = as_scalar<std::string>(root["source"], "source");
    if (root["workers"]) c.workers = as_scalar<std::size_t>(root["workers"], "workers");
    if (root["output"]) c.output = as_scalar<std::string>(root["output"], "output");
    c.validate();
    return c;
  }
  if (!root["seed"]) throw ConfigError("config needs an explicit 'seed'");
  c.seed = as_scalar<std::uint64_t>(root["seed"], "seed");
  if (root["samples"]) c.samples = as_scalar<std::size_t>(root["samples"], "samples");
  if (root["workers"]) c.workers = as_scalar<std::size_t>(root["workers"], "workers");
  if (root["output"]) c.output = as_scalar<std::string>(root["output"], "output");
  if (root["trials"]) c.trials = as_scalar<std::size_t>(root["trials"], "trials");
  if (root["derivative_cases"]) c.derivative_cases = as_scalar<std::size_t>(root["derivative_cases"], "derivative_cases");

  if (const auto grid = root["grid"]) {
    if (grid["N"]) c.N = as_list<int>(grid["N"], "grid.N");
    if (grid["k"]) c.k = as_list<int>(grid["k"], "grid.k");
    if (grid["p"]) c.p = as_list<double>(grid["p"], "grid.p");
    if (grid["d"]) c.d = as_list<int>(grid["d"], "grid.d");
  }
  if (c.command == Command::Khintchine && !(root["grid"] && root["grid"]["k"])) c.k = {1};
  if (const auto shape = root["shape"]) {
    if (shape["A"]) c.a_count = as_scalar<int>(shape["A"], "shape.A");
    if (shape["B"]) c.b_count = as_scalar<int>(shape["B"], "shape.B");
    if (shape["signs"] && !(shape["signs"].IsScalar() && shape["signs"].as<std::string>() == "alternating"))
      c.signs = as_list<int>(shape["signs"], "shape.signs");
  }
  if (const auto tol = root["tolerances"]) {
    if (tol["norm"]) c.norm_tol = as_scalar<double>(tol["norm"], "tolerances.norm");
    if (tol["slack_sigma"]) c.slack_sigma = as_scalar<double>(tol["slack_sigma"], "tolerances.slack_sigma");
    if (tol["slope_sigma"]) c.slope_sigma = as_scalar<double>(tol["slope_sigma"], "tolerances.slope_sigma");
  }
  if (const auto fams = root["families"]) {
    if (!fams.IsSequence()) throw ConfigError("'families' must be a list");
    for (const auto& f : fams) {
      FamilySpec spec;
      if (f.IsScalar()) {
        spec.name = f.as<std::string>();
      } else {
        if (!f["name"]) throw ConfigError("family entry needs 'name'");
        spec.name = as_scalar<std::string>(f["name"], "families.name");
        if (f["budget"]) spec.params.budget = as_scalar<std::size_t>(f["budget"], "families.budget");
        if (f["density"]) spec.params.density = as_scalar<double>(f["density"], "families.density");
      }
      c.families.push_back(spec);
    }
  } else if (c.command == Command::Khintchine) {
    c.families = {{"diagonal-series", {}}};
  } else {
    for (const auto& name : sweep_family_names()) c.families.push_back({name, {}});
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

nlohmann::json config_snapshot(const ExperimentConfig& c) {
  nlohmann::json families = nlohmann::json::array();
  for (const auto& f : c.families)
    families.push_back({{"name", f.name}, {"budget", f.params.budget}, {"density", f.params.density}});
  return {
      {"command", to_string(c.command)},
      {"seed", c.seed},
      {"samples", c.samples},
      {"grid", {{"N", c.N}, {"k", c.k}, {"p", c.p}, {"d", c.d}}},
      {"shape", {{"A", c.a_count}, {"B", c.b_count}, {"signs", c.signs}}},
      {"families", families},
      {"tolerances", {{"norm", c.norm_tol}, {"slack_sigma", c.slack_sigma}, {"slope_sigma", c.slope_sigma}}},
      {"trials", c.trials},
      {"derivative_cases", c.derivative_cases},
  };
}

ExperimentConfig config_from_snapshot(const nlohmann::json& s) {
  try {
    ExperimentConfig c;
    c.command = command_from_string(s.at("command").get<std::string>());
    c.seed = s.at("seed").get<std::uint64_t>();
    c.samples = s.at("samples").get<std::size_t>();
    const auto& g = s.at("grid");
    c.N = g.at("N").get<std::vector<int>>();
    c.k = g.at("k").get<std::vector<int>>();
    c.p = g.at("p").get<std::vector<double>>();
    c.d = g.at("d").get<std::vector<int>>();
    c.a_count = s.at("shape").at("A").get<int>();
    c.b_count = s.at("shape").at("B").get<int>();
    c.signs = s.at("shape").at("signs").get<std::vector<int>>();
    c.families.clear();
    for (const auto& f : s.at("families"))
      c.families.push_back(
          {f.at("name").get<std::string>(), {f.at("budget").get<std::size_t>(), f.at("density").get<double>()}});
    const auto& t = s.at("tolerances");
    c.norm_tol = t.at("norm").get<double>();
    c.slack_sigma = t.at("slack_sigma").get<double>();
    c.slope_sigma = t.at("slope_sigma").get<double>();
    c.trials = s.at("trials").get<std::size_t>();
    c.derivative_cases = s.at("derivative_cases").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config snapshot: ") + e.what());
  }
}

std::string config_hash(const ExperimentConfig& config) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(config_snapshot(config).dump());
  return os.str();
}

std::string to_string(const CellKey& key) {
  std::ostringstream os;
  os << "family=" << key.family << ",d=" << key.d << ",k=" << key.k << ",N=" << key.N << ",p=" << key.p;
  return os.str();
}

CellKey cell_from_string(const std::string& s) {
  CellKey key;
  std::set<std::string> seen;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("cell coordinate '" + item + "' is not key=value");
    const std::string name = item.substr(0, eq), value = item.substr(eq + 1);
    try {
      if (name == "family") key.family = value;
      else if (name == "d") key.d = std::stoi(value);
      else if (name == "k") key.k = std::stoi(value);
      else if (name == "N") key.N = std::stoi(value);
      else if (name == "p") key.p = std::stod(value);
      else throw ConfigError("unknown cell coordinate '" + name + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("bad number in cell coordinate '" + item + "'");
    }
    seen.insert(name);
  }
  if (seen.size() != 5) throw ConfigError("cell needs family, d, k, N and p");
  return key;
}

nlohmann::json to_json(const ResultRecord& r) {
  nlohmann::json extras = nlohmann::json::object();
  for (const auto& [k, v] : r.extras) extras[k] = json_number(v);
  return {
      {"config_hash", r.config_hash}, {"family", r.cell.family}, {"d", r.cell.d},
      {"k", r.cell.k},                {"N", r.cell.N},           {"p", r.cell.p},
      {"samples", r.samples},         {"seed", r.seed},          {"lhs", json_number(r.lhs)},
      {"stderr", json_number(r.stderr_lhs)}, {"rhs_max", json_number(r.rhs_max)},
      {"best_partition", r.best_partition},  {"ratio", json_number(r.ratio)},
      {"runtime_ms", r.runtime_ms},   {"version", r.version},    {"status", r.status},
      {"extras", extras},
  };
}

ResultRecord record_from_json(const nlohmann::json& j) {
  try {
    ResultRecord r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.cell = {j.at("family").get<std::string>(), j.at("d").get<int>(), j.at("k").get<int>(), j.at("N").get<int>(),
              j.at("p").get<double>()};
    r.samples = j.at("samples").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.lhs = number_or_nan(j.at("lhs"));
    r.stderr_lhs = number_or_nan(j.at("stderr"));
    r.rhs_max = number_or_nan(j.at("rhs_max"));
    r.best_partition = j.at("best_partition").get<std::string>();
    r.ratio = number_or_nan(j.at("ratio"));
    r.runtime_ms = j.at("runtime_ms").get<double>();
    r.version = j.at("version").get<std::string>();
    r.status = j.at("status").get<std::string>();
    for (const auto& [k, v] : j.at("extras").items()) r.extras[k] = number_or_nan(v);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed result record: ") + e.what());
  }
}

bool RunResult::passed() const {
  return !gates.empty() && std::all_of(gates.begin(), gates.end(), [](const Gate& g) { return g.passed; });
}

std::vector<CellKey> grid_cells(const ExperimentConfig& config) {
  std::vector<CellKey> cells;
  if (!has_grid(config.command)) return cells;
  for (const auto& f : config.families)
    for (int d : config.d)
      for (int k : config.k)
        for (int N : config.N)
          for (double p : config.p) cells.push_back({f.name, d, k, N, p});
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

std::uint64_t cell_seed(std::uint64_t seed, const CellKey& key) {
  return hash_words(seed, {0xce11ULL, string_word(key.family), static_cast<std::uint64_t>(key.d),
                           static_cast<std::uint64_t>(key.k), static_cast<std::uint64_t>(key.N)});
}

std::vector<ResultRecord> run_cells(const ExperimentConfig& config, const std::vector<CellKey>& keys,
                                    std::size_t sample_workers) {
  if (keys.empty()) return {};
  const CellKey& first = keys.front();
  for (const auto& key : keys)
    if (key.family != first.family || key.d != first.d || key.k != first.k || key.N != first.N)
      throw Error("run_cells: keys must differ only in p");

  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = cell_seed(config.seed, first);
  const std::string hash = config_hash(config);
  std::vector<ResultRecord> records;
  for (const auto& key : keys) {
    ResultRecord r;
    r.config_hash = hash;
    r.cell = key;
    r.samples = config.samples;
    r.seed = seed;
    r.version = RANDTEN_VERSION;
    records.push_back(std::move(r));
  }

  try {
    FamilyParams params;
    bool found = false;
    for (const auto& f : config.families)
      if (f.name == first.family) {
        params = f.params;
        found = true;
        break;
      }
    if (!found) throw ConfigError("family '" + first.family + "' is not part of the config");
    const FamilyShape shape{first.k, config.a_count, config.b_count, first.d, first.N};
    const RandomTensorSpec spec{generate_family(first.family, shape, params, seed), config.signs_for(first.k)};
    spec.validate();

    MonteCarloOptions options;
    options.norm.tol = config.norm_tol;
    options.workers = sample_workers;
    const std::uint64_t sample_seed = hash_words(seed, {0x5a3fULL});

    if (config.command == Command::Decoupling) {
      const auto norms = decoupling_norms(spec, config.samples, sample_seed, options);
      for (auto& r : records) {
        const DecouplingReport rep = decoupling_from_norms(norms, r.cell.p, sample_seed, options);
        r.lhs = rep.lhs.mean_p_norm;
        r.stderr_lhs = rep.lhs.std_error;
        r.rhs_max = rep.rhs;
        r.best_partition = "decoupled";
        r.ratio = rep.ratio;
        r.extras = {{"slack", rep.slack}, {"slack_stderr", rep.slack_stderr}, {"ratio_stderr", rep.ratio_stderr}};
      }
    } else {
      std::vector<std::size_t> flagged;
      const auto norms = sample_norms(ChaosAssembler(spec), config.samples, sample_seed, options, &flagged);
      const RhsBound rhs = rhs_bound(spec, options.norm);
      for (auto& r : records) {
        const BoundReport rep =
            bound_from_norms(norms, rhs, spec.order(), spec.h.truncation(), r.cell.p, sample_seed, options);
        r.lhs = rep.lhs.mean_p_norm;
        r.stderr_lhs = rep.lhs.std_error;
        r.rhs_max = rep.rhs_max;
        r.best_partition = to_string(rep.best_partition);
        r.ratio = rep.ratio;
        r.extras = {{"flagged", static_cast<double>(flagged.size())}, {"nnz", static_cast<double>(spec.h.nnz())}};
      }
    }
  } catch (const std::exception& e) {
    for (auto& r : records) {
      r.status = std::string("error: ") + e.what();
      r.lhs = r.stderr_lhs = r.rhs_max = r.ratio = std::numeric_limits<double>::quiet_NaN();
    }
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  for (auto& r : records) r.runtime_ms = ms;
  return records;
}

std::vector<TrendSummary> trend_summary(const std::vector<ResultRecord>& records) {
  std::map<int, std::vector<const ResultRecord*>> by_k;
  for (const auto& r : records)
    if (r.ok()) by_k[r.cell.k].push_back(&r);

  std::vector<TrendSummary> out;
  for (const auto& [k, rows] : by_k) {
    TrendSummary s;
    s.k = k;
    s.cells = rows.size();
    // Fixed effects per (family, p, d): regress within-group deviations.
    std::map<std::tuple<std::string, double, int>, std::vector<std::pair<double, double>>> groups;
    for (const auto* r : rows) {
      s.max_ratio = std::max(s.max_ratio, r->ratio);
      groups[{r->cell.family, r->cell.p, r->cell.d}].push_back(
          {std::log(std::log(static_cast<double>(r->cell.N))), r->ratio});
    }
    double sxx = 0.0, sxy = 0.0;
    std::vector<std::pair<double, double>> centered;
    for (const auto& [g, pts] : groups) {
      double mx = 0.0, my = 0.0;
      for (auto [x, y] : pts) mx += x, my += y;
      mx /= static_cast<double>(pts.size());
      my /= static_cast<double>(pts.size());
      for (auto [x, y] : pts) {
        centered.push_back({x - mx, y - my});
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
      }
    }
    const double dof = static_cast<double>(rows.size()) - static_cast<double>(groups.size()) - 1.0;
    if (sxx > 0.0 && dof > 0.0) {
      s.slope = sxy / sxx;
      double rss = 0.0;
      for (auto [x, y] : centered) rss += (y - s.slope * x) * (y - s.slope * x);
      s.slope_stderr = std::sqrt(rss / dof / sxx);
    } else {
      s.slope = s.slope_stderr = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(s);
  }
  return out;
}

namespace {

std::vector<Gate> grid_gates(const ExperimentConfig& config, const RunResult& result) {
  std::vector<Gate> gates;
  std::size_t errors = 0;
  for (const auto& r : result.records) errors += r.ok() ? 0 : 1;
  gates.push_back({"cells-completed", errors == 0 && !result.records.empty(),
                   std::to_string(result.records.size() - errors) + "/" + std::to_string(result.records.size())});

  if (config.command == Command::Decoupling) {
    std::size_t violations = 0, k1_bad = 0, k1 = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& r : result.records) {
      if (!r.ok()) continue;
      const double slack = r.extras.at("slack"), se = r.extras.at("slack_stderr");
      const double z = se > 0.0 ? slack / se : (slack >= 0.0 ? 0.0 : -std::numeric_limits<double>::infinity());
      worst = std::min(worst, z);
      if (slack < -config.slack_sigma * se) ++violations;
      if (r.cell.k == 1) {
        ++k1;
        if (std::abs(r.ratio - std::numbers::pi / 2.0) > config.slack_sigma * r.extras.at("ratio_stderr")) ++k1_bad;
      }
    }
    std::ostringstream os;
    os << violations << " violations, min slack/stderr " << worst;
    gates.push_back({"decoupling-slack", violations == 0, os.str()});
    if (k1 > 0)
      gates.push_back({"decoupling-k1-ratio", k1_bad == 0,
                       std::to_string(k1 - k1_bad) + "/" + std::to_string(k1) + " cells at pi/2"});
    return gates;
  }

  std::size_t non_finite = 0;
  for (const auto& r : result.records)
    if (r.ok() && !std::isfinite(r.ratio)) ++non_finite;
  gates.push_back({"ratios-finite", non_finite == 0, std::to_string(non_finite) + " non-finite"});
  for (const auto& s : result.summary) {
    std::ostringstream os;
    os << "max ratio " << s.max_ratio << ", slope " << s.slope << " +- " << s.slope_stderr;
    const bool ok = std::isnan(s.slope) || s.slope <= config.slope_sigma * s.slope_stderr;
    if (std::isnan(s.slope)) os << " (too few cells for a trend)";
    gates.push_back({"trend-k" + std::to_string(s.k), ok, os.str()});
  }
  return gates;
}

std::map<CellKey, ResultRecord> load_existing(const std::filesystem::path& dir, const std::string& hash) {
  std::map<CellKey, ResultRecord> out;
  const auto path = dir / "results.json";
  if (!std::filesystem::exists(path)) return out;
  try {
    std::ifstream in(path);
    const auto doc = nlohmann::json::parse(in);
    if (doc.value("config_hash", "") != hash) return out;
    for (const auto& j : doc.at("records")) {
      ResultRecord r = record_from_json(j);
      if (r.ok()) out[r.cell] = std::move(r);
    }
  } catch (const std::exception&) {
    out.clear();  // unreadable partial output: start over
  }
  return out;
}

// Cells grouped by everything except p, in canonical order.
std::vector<std::vector<CellKey>> group_cells(const std::vector<CellKey>& cells) {
  std::vector<std::vector<CellKey>> groups;
  for (const auto& c : cells) {
    if (groups.empty()) {
      groups.push_back({c});
      continue;
    }
    const CellKey& last = groups.back().front();
    if (last.family == c.family && last.d == c.d && last.k == c.k && last.N == c.N)
      groups.back().push_back(c);
    else
      groups.push_back({c});
  }
  return groups;
}

void finish_grid(const ExperimentConfig& config, RunResult& result) {
  std::sort(result.records.begin(), result.records.end(),
            [](const ResultRecord& a, const ResultRecord& b) { return a.cell < b.cell; });
  if (config.command != Command::Decoupling) result.summary = trend_summary(result.records);
  result.gates = grid_gates(config, result);
}

}  // namespace

RunResult run(const ExperimentConfig& config, const std::optional<CellKey>& only) {
  if (config.command == Command::Replay) {
    std::ifstream in(config.source);
    if (!in) throw ConfigError("cannot read replay source " + config.source.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("replay source is not JSON: ") + e.what());
    }
    RunResult result = replay(doc, only, config.workers);
    return result;
  }
  config.validate();
  RunResult result;

  if (config.command == Command::VerifyWick) {
    const std::uint64_t seed = hash_words(config.seed, {0xd1ffULL});
    for (const auto& r : {verify_renorm_table(), verify_zero_mean(), verify_polynomial_identities(),
                          verify_phi_derivative(config.derivative_cases, seed)})
      result.gates.push_back(report_gate(r));
  } else if (config.command == Command::VerifyMerging) {
    result.gates.push_back(report_gate(verify_merging(config.trials, hash_words(config.seed, {0x3e26ULL}))));
    result.gates.push_back(report_gate(verify_duality(config.trials, hash_words(config.seed, {0xd0a1ULL}))));
  } else {
    std::vector<CellKey> cells = grid_cells(config);
    if (only) {
      if (std::find(cells.begin(), cells.end(), *only) == cells.end())
        throw ConfigError("cell " + to_string(*only) + " is not in the configured grid");
      cells = {*only};
    }
    const std::string hash = config_hash(config);
    std::map<CellKey, ResultRecord> existing;
    if (!config.output.empty() && !only) existing = load_existing(config.output, hash);

    std::vector<CellKey> todo;
    for (const auto& c : cells) {
      if (auto it = existing.find(c); it != existing.end()) {
        result.records.push_back(it->second);
        ++result.resumed;
      } else {
        todo.push_back(c);
      }
    }
    const auto groups = group_cells(todo);
    const std::size_t group_workers = std::max<std::size_t>(1, std::min(config.workers, groups.size()));
    const std::size_t sample_workers = std::max<std::size_t>(1, config.workers / group_workers);
    std::mutex mutex;
    parallel_for(groups.size(), group_workers, [&](std::size_t g) {
      auto records = run_cells(config, groups[g], sample_workers);
      std::lock_guard lock(mutex);
      for (auto& r : records) result.records.push_back(std::move(r));
      if (!config.output.empty() && !only) {
        RunResult partial = result;
        finish_grid(config, partial);
        write_results(config.output, config, partial);
      }
    });
    finish_grid(config, result);
  }
  if (!config.output.empty()) write_results(config.output, config, result);
  return result;
}

RunResult replay(const nlohmann::json& results, const std::optional<CellKey>& only, std::size_t workers) {
  ExperimentConfig config;
  try {
    config = config_from_snapshot(results.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("replay source lacks a config snapshot: ") + e.what());
  }
  config.workers = std::max<std::size_t>(1, workers);
  config.output.clear();

  std::vector<ResultRecord> stored;
  for (const auto& j : results.at("records")) {
    ResultRecord r = record_from_json(j);
    if (!only || r.cell == *only) stored.push_back(std::move(r));
  }
  if (only && stored.empty()) throw ConfigError("cell " + to_string(*only) + " has no stored record");
  std::sort(stored.begin(), stored.end(),
            [](const ResultRecord& a, const ResultRecord& b) { return a.cell < b.cell; });

  std::vector<CellKey> keys;
  for (const auto& r : stored) keys.push_back(r.cell);
  const auto groups = group_cells(keys);
  std::vector<std::vector<ResultRecord>> fresh(groups.size());
  const std::size_t group_workers = std::max<std::size_t>(1, std::min(config.workers, groups.size()));
  parallel_for(groups.size(), group_workers, [&](std::size_t g) {
    fresh[g] = run_cells(config, groups[g], std::max<std::size_t>(1, config.workers / group_workers));
  });

  RunResult result;
  std::size_t i = 0, mismatches = 0;
  std::string first_mismatch;
  for (auto& group : fresh)
    for (auto& r : group) {
      const ResultRecord& old = stored[i++];
      const bool same = r.ok() && old.ok() && std::memcmp(&r.lhs, &old.lhs, sizeof(double)) == 0 &&
                        r.config_hash == old.config_hash;
      if (!same && mismatches++ == 0)
        first_mismatch = to_string(r.cell) + ": stored " + format_double(old.lhs) + ", replayed " + format_double(r.lhs);
      result.records.push_back(std::move(r));
    }
  result.gates.push_back({"replay-bit-identical", mismatches == 0 && !result.records.empty(),
                          std::to_string(result.records.size() - mismatches) + "/" +
                              std::to_string(result.records.size()) + " identical" +
                              (first_mismatch.empty() ? "" : "; " + first_mismatch)});
  return result;
}

std::string csv_header() { return "family,d,k,N,p,samples,seed,lhs,stderr,rhs_max,best_partition,ratio,runtime_ms"; }

std::string csv_row(const ResultRecord& r) {
  std::ostringstream os;
  os << r.cell.family << ',' << r.cell.d << ',' << r.cell.k << ',' << r.cell.N << ',' << r.cell.p << ','
     << r.samples << ',' << r.seed << ',' << format_double(r.lhs) << ',' << format_double(r.stderr_lhs) << ','
     << format_double(r.rhs_max) << ',' << r.best_partition << ',' << format_double(r.ratio) << ','
     << std::fixed << std::setprecision(1) << r.runtime_ms;
  return os.str();
}

void write_results(const std::filesystem::path& dir, const ExperimentConfig& config, const RunResult& result) {
  std::filesystem::create_directories(dir);

  std::string csv = csv_header() + "\n";
  for (const auto& r : result.records) csv += csv_row(r) + "\n";

  nlohmann::json records = nlohmann::json::array(), gates = nlohmann::json::array(),
                 summary = nlohmann::json::array();
  for (const auto& r : result.records) records.push_back(to_json(r));
  for (const auto& g : result.gates) gates.push_back({{"name", g.name}, {"passed", g.passed}, {"detail", g.detail}});
  for (const auto& s : result.summary)
    summary.push_back({{"k", s.k},
                       {"cells", s.cells},
                       {"max_ratio", json_number(s.max_ratio)},
                       {"slope", json_number(s.slope)},
                       {"slope_stderr", json_number(s.slope_stderr)}});
  const nlohmann::json doc{
      {"version", RANDTEN_VERSION},
      {"config_hash", config_hash(config)},
      {"config", config_snapshot(config)},
      {"normal_transform", kNormalTransform},
      {"streams", {{"g", 0}, {"g_tilde", 1}}},
      {"passed", result.passed()},
      {"gates", gates},
      {"summary", summary},
      {"records", records},
  };
  if (has_grid(config.command) || config.command == Command::Replay) write_atomic(dir / "results.csv", csv);
  write_atomic(dir / "results.json", doc.dump(2) + "\n");
}

}  // namespace randten
