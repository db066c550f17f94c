#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "randten/errors.hpp"
#include "randten/experiment.hpp"

using namespace randten;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("randten-test-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

const char* kSmallSweep = R"(
command: bound-sweep
seed: 42
samples: 64
grid:
  N: [4, 8, 16, 32]
  k: [1]
  p: [2]
families:
  - name: dense-gaussian
    budget: 512
)";

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST(Config, RequiresSeed) {
  EXPECT_THROW(parse_config("command: bound-sweep\nsamples: 10\n"), ConfigError);
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(parse_config("command: nope\nseed: 1\n"), ConfigError);
  EXPECT_THROW(parse_config("command: bound-sweep\nseed: 1\nfamilies: [bogus]\n"), ConfigError);
  EXPECT_THROW(parse_config("command: bound-sweep\nseed: 1\ngrid: {N: [1]}\n"), ConfigError);
  EXPECT_THROW(parse_config("command: bound-sweep\nseed: 1\ngrid: {k: [9]}\n"), ConfigError);
  EXPECT_THROW(parse_config("command: bound-sweep\nseed: 1\nsamples: 1\n"), ConfigError);
  EXPECT_THROW(parse_config("command: bound-sweep\nseed: 1\nshape: {signs: [1, 2, 1]}\n"), ConfigError);
  EXPECT_THROW(parse_config("command: khintchine\nseed: 1\ngrid: {k: [2]}\n"), ConfigError);
  EXPECT_THROW(parse_config("command: bound-sweep\nseed: x\n"), ConfigError);
  EXPECT_THROW(parse_config("[1, 2"), ConfigError);
  EXPECT_THROW(parse_config("command: replay\n"), ConfigError);
}

TEST(Config, Defaults) {
  const auto c = parse_config("command: bound-sweep\nseed: 18446744073709551615\n");
  EXPECT_EQ(c.seed, 18446744073709551615ULL);
  EXPECT_EQ(c.families.size(), 5u);
  EXPECT_EQ(c.signs_for(3), (std::vector<int>{1, -1, 1}));
  EXPECT_EQ(grid_cells(c).size(), 5u * 4u * 3u * 3u);

  const auto k = parse_config("command: khintchine\nseed: 3\n");
  EXPECT_EQ(k.k, std::vector<int>{1});
  ASSERT_EQ(k.families.size(), 1u);
  EXPECT_EQ(k.families[0].name, "diagonal-series");
}

TEST(Config, SnapshotRoundTripAndHash) {
  const auto c = parse_config(kSmallSweep);
  const auto back = config_from_snapshot(config_snapshot(c));
  EXPECT_EQ(config_snapshot(back), config_snapshot(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);

  auto other = c;
  other.workers = 7;
  other.output = "elsewhere";
  EXPECT_EQ(config_hash(other), config_hash(c));
  other.seed += 1;
  EXPECT_NE(config_hash(other), config_hash(c));
}

TEST(Cells, StringRoundTrip) {
  const CellKey key{"rank-one", 1, 2, 16, 4};
  EXPECT_EQ(to_string(key), "family=rank-one,d=1,k=2,N=16,p=4");
  EXPECT_EQ(cell_from_string(to_string(key)), key);
  EXPECT_EQ(cell_from_string("p=4,N=16,k=2,d=1,family=rank-one"), key);
  EXPECT_THROW(cell_from_string("family=rank-one,d=1"), ConfigError);
  EXPECT_THROW(cell_from_string("family=rank-one,d=x,k=2,N=16,p=4"), ConfigError);
}

TEST(Cells, SeedIgnoresP) {
  EXPECT_EQ(cell_seed(1, {"rank-one", 1, 2, 8, 2}), cell_seed(1, {"rank-one", 1, 2, 8, 8}));
  EXPECT_NE(cell_seed(1, {"rank-one", 1, 2, 8, 2}), cell_seed(1, {"rank-one", 1, 2, 16, 2}));
  EXPECT_NE(cell_seed(1, {"rank-one", 1, 2, 8, 2}), cell_seed(1, {"dense-gaussian", 1, 2, 8, 2}));
}

TEST(Run, VerifyWickGates) {
  auto c = parse_config("command: verify-wick\nseed: 1\nderivative_cases: 100\n");
  c.output.clear();
  const auto r = run(c);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.gates.size(), 4u);
}

TEST(Run, VerifyMergingGates) {
  auto c = parse_config("command: verify-merging\nseed: 1\ntrials: 50\n");
  c.output.clear();
  EXPECT_TRUE(run(c).passed());
}

TEST(Run, SmallSweepWritesRecords) {
  TempDir dir;
  auto c = parse_config(kSmallSweep);
  c.output = dir.path();
  const auto r = run(c);
  ASSERT_EQ(r.records.size(), 4u);
  EXPECT_TRUE(r.passed());
  for (std::size_t i = 0; i + 1 < r.records.size(); ++i) EXPECT_LT(r.records[i].cell.N, r.records[i + 1].cell.N);
  for (const auto& rec : r.records) {
    EXPECT_TRUE(rec.ok());
    EXPECT_TRUE(std::isfinite(rec.ratio));
    EXPECT_EQ(rec.config_hash, config_hash(c));
    EXPECT_EQ(rec.version, RANDTEN_VERSION);
  }
  ASSERT_EQ(r.summary.size(), 1u);
  EXPECT_EQ(r.summary[0].cells, 4u);

  std::ifstream csv(dir.path() / "results.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "family,d,k,N,p,samples,seed,lhs,stderr,rhs_max,best_partition,ratio,runtime_ms");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  EXPECT_EQ(rows, 4);

  const auto doc = read_json(dir.path() / "results.json");
  EXPECT_EQ(doc["records"].size(), 4u);
  EXPECT_EQ(doc["normal_transform"], "box-muller");
  EXPECT_EQ(doc["config_hash"], config_hash(c));
  EXPECT_FALSE(fs::exists(dir.path() / "results.json.tmp"));
}

TEST(Run, ResumesCompletedCells) {
  TempDir dir;
  auto c = parse_config(kSmallSweep);
  c.output = dir.path();
  const auto first = run(c);
  const auto second = run(c);
  EXPECT_EQ(second.resumed, 4u);
  ASSERT_EQ(second.records.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(second.records[i].lhs, first.records[i].lhs);

  c.seed += 1;  // a different config must not reuse the records
  EXPECT_EQ(run(c).resumed, 0u);
}

TEST(Run, SingleCell) {
  auto c = parse_config(kSmallSweep);
  c.output.clear();
  const CellKey key{"dense-gaussian", 1, 1, 16, 2};
  const auto one = run(c, key);
  ASSERT_EQ(one.records.size(), 1u);
  const auto all = run(c);
  EXPECT_EQ(one.records[0].lhs, all.records[2].lhs);
  EXPECT_THROW(run(c, CellKey{"dense-gaussian", 1, 1, 5, 2}), ConfigError);
}

TEST(Run, WorkerCountDoesNotChangeResults) {
  auto c = parse_config(kSmallSweep);
  c.output.clear();
  c.workers = 1;
  const auto a = run(c);
  c.workers = 3;
  const auto b = run(c);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].lhs, b.records[i].lhs);
    EXPECT_EQ(a.records[i].stderr_lhs, b.records[i].stderr_lhs);
  }
}

TEST(Run, CellFailureIsRecorded) {
  auto c = parse_config(R"(
command: bound-sweep
seed: 5
samples: 16
grid: {N: [4], k: [1], p: [2]}
shape: {A: 0, B: 0}
families: [diagonal-pairing, dense-gaussian]
)");
  c.output.clear();
  const auto r = run(c);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_TRUE(r.records[0].ok());
  EXPECT_FALSE(r.records[1].ok());  // diagonal-pairing needs two axes
  EXPECT_TRUE(std::isnan(r.records[1].lhs));
  EXPECT_FALSE(r.passed());
}

TEST(Run, DecouplingGates) {
  auto c = parse_config(R"(
command: decoupling
seed: 9
samples: 200
grid: {N: [4], k: [1, 2], p: [2]}
families: [diagonal-pairing]
)");
  c.output.clear();
  const auto r = run(c);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_TRUE(r.passed());
  EXPECT_TRUE(r.records[0].extras.contains("slack"));
}

TEST(Replay, BitIdentical) {
  TempDir dir;
  auto c = parse_config(kSmallSweep);
  c.output = dir.path();
  run(c);
  auto doc = read_json(dir.path() / "results.json");
  EXPECT_TRUE(replay(doc, std::nullopt, 1).passed());
  EXPECT_TRUE(replay(doc, std::nullopt, 3).passed());
  EXPECT_TRUE(replay(doc, CellKey{"dense-gaussian", 1, 1, 8, 2}, 2).passed());

  doc["records"][1]["lhs"] = doc["records"][1]["lhs"].get<double>() * (1.0 + 1e-15);
  EXPECT_FALSE(replay(doc, std::nullopt, 1).passed());

  ExperimentConfig rc;
  rc.command = Command::Replay;
  rc.source = dir.path() / "results.json";
  EXPECT_TRUE(run(rc).passed());
}

TEST(Records, JsonRoundTrip) {
  ResultRecord r;
  r.config_hash = "0123456789abcdef";
  r.cell = {"rank-one", 1, 2, 8, 4};
  r.samples = 10;
  r.seed = 123;
  r.lhs = 1.25;
  r.ratio = std::numeric_limits<double>::quiet_NaN();
  r.extras = {{"slack", 0.5}};
  const auto back = record_from_json(to_json(r));
  EXPECT_EQ(back.cell, r.cell);
  EXPECT_EQ(back.lhs, r.lhs);
  EXPECT_TRUE(std::isnan(back.ratio));
  EXPECT_EQ(back.extras.at("slack"), 0.5);
}

TEST(Summary, FixedEffectsSlope) {
  std::vector<ResultRecord> rs;
  for (const char* family : {"a", "b"})
    for (int N : {4, 8, 16, 32}) {
      ResultRecord r;
      r.cell = {family, 1, 2, N, 2};
      const double x = std::log(std::log(static_cast<double>(N)));
      r.ratio = (family[0] == 'a' ? 1.0 : 5.0) - 0.5 * x + (N == 8 ? 0.01 : 0.0);
      rs.push_back(r);
    }
  const auto s = trend_summary(rs);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].k, 2);
  EXPECT_NEAR(s[0].slope, -0.5, 0.02);
  EXPECT_GT(s[0].slope_stderr, 0.0);
  EXPECT_NEAR(s[0].max_ratio, 5.0 - 0.5 * std::log(std::log(4.0)), 1e-12);
}
