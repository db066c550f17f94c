#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include <Eigen/SVD>

#include "randten/errors.hpp"
#include "randten/estimator.hpp"
#include "randten/families.hpp"

using namespace randten;

namespace {

// h_{n a} = [n = a] over the l1 box of radius N (M = 2N + 1 sites).
RandomTensorSpec delta_spec(int N) {
  std::vector<TensorEntry> entries;
  for (int n = -N; n <= N; ++n) entries.push_back({{n, n}, 1.0});
  return {make_tensor({j_label(1), a_label(1)}, 1, N, entries), {1}};
}

// h_{abcd}: J = (a, b) with signs (+, -), A = c, B = d.
RandomTensorSpec pairing_spec(std::uint64_t seed, int N = 2) {
  return {random_sparse_tensor({j_label(1), j_label(2), a_label(1), b_label(1)}, 1, N, 0.3, seed), {1, -1}};
}

MonteCarloOptions fast_options(std::size_t workers = 1) {
  MonteCarloOptions o;
  o.workers = workers;
  o.bootstrap_resamples = 300;
  return o;
}

}  // namespace

TEST(RandomTensorSpecTest, Validate) {
  auto spec = delta_spec(1);
  EXPECT_NO_THROW(spec.validate());
  spec.signs = {1, 1};
  EXPECT_THROW(spec.validate(), Error);
  spec.signs = {0};
  EXPECT_THROW(spec.validate(), Error);
}

TEST(Realize, DeltaGivesField) {
  const auto spec = delta_spec(3);
  const GaussianField g{5, 0};
  const Tensor G = realize(spec, g);
  ASSERT_EQ(G.labels(), (std::vector<IndexLabel>{a_label(1)}));
  for (int a = -3; a <= 3; ++a) EXPECT_EQ(G.at({a}), g.sample({a}));
}

TEST(Realize, PairingExampleMatchesDirectFormula) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto spec = pairing_spec(seed);
    const GaussianField g{seed + 100, 0};
    const Tensor G = realize(spec, g);
    for (int c = -2; c <= 2; ++c)
      for (int d = -2; d <= 2; ++d) {
        Complex direct = 0.0;
        for (int a = -2; a <= 2; ++a)
          for (int b = -2; b <= 2; ++b)
            direct += spec.h.at({a, b, c, d}) *
                      (g.sample({a}) * std::conj(g.sample({b})) - (a == b ? 1.0 : 0.0));
        EXPECT_LE(std::abs(G.at({c, d}) - direct), 1e-12 * std::max(1.0, std::abs(direct)));
      }
  }
}

TEST(Realize, EntriesHaveZeroMean) {
  const auto spec = pairing_spec(3, 1);
  const int n = 10000;
  std::map<FlatIndex, std::vector<Complex>> values;
  for (int s = 0; s < n; ++s) {
    const Tensor G = realize(spec, GaussianField{derive_seed(1, static_cast<std::uint64_t>(s)), 0});
    for (const auto& [index, v] : G.entries()) values[index].push_back(v);
  }
  for (const auto& [index, xs] : values) {
    Complex mean = 0.0;
    for (auto x : xs) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (auto x : xs) var += std::norm(x - mean);
    const double se = std::sqrt(var / n / n);
    EXPECT_LE(std::abs(mean), 4.0 * se + 1e-12);
  }
}

TEST(Realize, ScaleEquivariance) {
  const auto spec = pairing_spec(4);
  const GaussianField g{8, 0};
  const RandomTensorSpec doubled{spec.h.scaled(2.0), spec.signs};
  EXPECT_EQ(realize(doubled, g), realize(spec, g).scaled(2.0));
}

TEST(ChaosAssembler, AgreesWithRealize) {
  for (int k = 1; k <= 3; ++k) {
    const FamilyShape shape{k, 1, 1, 1, 3};
    const RandomTensorSpec spec{generate_family("diagonal-pairing", shape, {}, 21), std::vector<int>(k, 1)};
    RandomTensorSpec alt = spec;
    for (std::size_t j = 1; j < alt.signs.size(); j += 2) alt.signs[j] = -1;
    for (const RandomTensorSpec* s : {&spec, static_cast<const RandomTensorSpec*>(&alt)}) {
      const ChaosAssembler assembler(*s);
      const GaussianField g{17, 0}, gt{17, 1};
      const Tensor G = realize(*s, g);
      const auto m = matricize(G, ab_partition(G)).matrix;
      const auto a = assembler.assemble(g, gt);
      EXPECT_NEAR(operator_norm(a).value, operator_norm(m).value, 1e-10 * std::max(1.0, operator_norm(m).value));
      EXPECT_NEAR(a.cwiseAbs2().sum(), m.cwiseAbs2().sum(), 1e-9 * std::max(1.0, m.cwiseAbs2().sum()));
    }
  }
}

TEST(ChaosAssembler, DecoupledOrderOneIsPlainCopy) {
  const auto spec = delta_spec(2);
  const ChaosAssembler assembler(spec, 0);
  const GaussianField g{3, 0}, gt{3, 1};
  const auto m = assembler.assemble(g, gt);
  Complex total = 0.0, expected = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) total += m(i);
  for (int n = -2; n <= 2; ++n) expected += gt.sample({n});
  EXPECT_NEAR(std::abs(total - expected), 0.0, 1e-12);
}

TEST(MomentNorm, ZeroTensor) {
  const RandomTensorSpec spec{make_tensor({j_label(1), a_label(1)}, 1, 2, {}), {1}};
  const auto est = moment_norm(spec, 2.0, 16, 1, fast_options());
  EXPECT_EQ(est.mean_p_norm, 0.0);
  EXPECT_EQ(est.std_error, 0.0);
}

// G = (g_a)_a, so ||G||^2 = sum of M unit-mean moduli and E||G||^2 = M.
TEST(MomentNorm, DeltaSecondMomentIsSqrtM) {
  const int N = 6, M = 2 * N + 1;
  const auto est = moment_norm(delta_spec(N), 2.0, 4000, 99, fast_options());
  EXPECT_NEAR(est.mean_p_norm, std::sqrt(M), 3.0 * est.std_error);
  EXPECT_GT(est.std_error, 0.0);
}

TEST(MomentNorm, ReplayAndWorkerIndependence) {
  const auto spec = pairing_spec(5);
  const auto a = moment_norm(spec, 4.0, 300, 77, fast_options(1));
  const auto b = moment_norm(spec, 4.0, 300, 77, fast_options(1));
  const auto c = moment_norm(spec, 4.0, 300, 77, fast_options(3));
  EXPECT_EQ(a.mean_p_norm, b.mean_p_norm);
  EXPECT_EQ(a.mean_p_norm, c.mean_p_norm);
  EXPECT_EQ(a.std_error, c.std_error);
  EXPECT_NE(a.mean_p_norm, moment_norm(spec, 4.0, 300, 78, fast_options()).mean_p_norm);
}

TEST(MomentNorm, Preconditions) {
  EXPECT_THROW(moment_norm(delta_spec(1), 0.5, 10, 1), Error);
  EXPECT_THROW(moment_norm(delta_spec(1), 2.0, 1, 1), Error);
}

TEST(Bootstrap, StandardErrorOfMean) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> columns(1);
  for (int i = 0; i < 2000; ++i) columns[0].push_back(normal(rng));
  const double se =
      bootstrap_stderr(columns, [](std::span<const double> m) { return m[0]; }, 3, 1000);
  EXPECT_NEAR(se, 1.0 / std::sqrt(2000.0), 0.15 / std::sqrt(2000.0));
}

// With B empty, n_1 a -> {} is a 1 x M row of ones (norm sqrt(M)) while
// a -> n_1 is the M x M identity.
TEST(RhsBound, Delta) {
  const auto rhs = rhs_bound(delta_spec(3));
  ASSERT_EQ(rhs.partitions.size(), 2u);
  EXPECT_EQ(to_string(rhs.partitions[0]), "[a1 j1]->[]");
  EXPECT_NEAR(rhs.norms[0], std::sqrt(7.0), 1e-14);
  EXPECT_EQ(to_string(rhs.partitions[1]), "[a1]->[j1]");
  EXPECT_NEAR(rhs.norms[1], 1.0, 1e-14);
  EXPECT_NEAR(rhs.rhs_max, std::sqrt(7.0), 1e-14);
}

// The identity-coefficient case with a B axis: h_{n a b} = [n = a = b].
TEST(RhsBound, DiagonalSeriesBothFlatteningsOne) {
  const RandomTensorSpec spec{generate_family("diagonal-series", FamilyShape{1, 1, 1, 1, 3}, {}, 0), {1}};
  const auto rhs = rhs_bound(spec);
  for (double n : rhs.norms) EXPECT_NEAR(n, 1.0, 1e-14);
  EXPECT_NEAR(rhs.rhs_max, 1.0, 1e-14);
}

TEST(RhsBound, RankOne) {
  const Complex v(0.6, -0.8);
  const RandomTensorSpec spec{make_tensor({j_label(1), j_label(2), a_label(1), b_label(1)}, 1, 2, {{{1, -1, 0, 2}, 3.0 * v}}),
                              {1, -1}};
  const auto rhs = rhs_bound(spec);
  for (double n : rhs.norms) EXPECT_NEAR(n, 3.0, 1e-14);
}

// Each partition norm recomputed from an independently built dense matrix.
TEST(RhsBound, MatchesIndependentFlattenings) {
  const auto spec = pairing_spec(6);
  const auto rhs = rhs_bound(spec);
  ASSERT_EQ(rhs.partitions.size(), 4u);
  double best = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& p = rhs.partitions[i];
    std::vector<std::size_t> xs, ys;
    for (const auto& l : p.x_side) xs.push_back(spec.h.label_position(l.name));
    for (const auto& l : p.y_side) ys.push_back(spec.h.label_position(l.name));
    auto code = [](const FlatIndex& idx, const std::vector<std::size_t>& pos) {
      int c = 0;
      for (std::size_t q : pos) c = 5 * c + (idx[q] + 2);
      return c;
    };
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(std::pow(5, ys.size())),
                                                static_cast<Eigen::Index>(std::pow(5, xs.size())));
    for (const auto& [idx, v] : spec.h.entries()) m(code(idx, ys), code(idx, xs)) += v;
    const double oracle = Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues()(0);
    EXPECT_NEAR(rhs.norms[i], oracle, 1e-10 * oracle) << to_string(p);
    best = std::max(best, oracle);
  }
  EXPECT_NEAR(rhs.rhs_max, best, 1e-10 * best);
}

TEST(BoundExperiment, ScaleInvariantRatio) {
  const auto spec = pairing_spec(7, 4);
  const RandomTensorSpec scaled{spec.h.scaled(0.37), spec.signs};
  const auto a = bound_experiment(spec, 2.0, 200, 5, fast_options());
  const auto b = bound_experiment(scaled, 2.0, 200, 5, fast_options());
  EXPECT_NEAR(b.lhs.mean_p_norm, 0.37 * a.lhs.mean_p_norm, 1e-12 * a.lhs.mean_p_norm);
  EXPECT_NEAR(b.ratio, a.ratio, 1e-12 * a.ratio);
  EXPECT_TRUE(std::isfinite(a.ratio));
  EXPECT_GT(a.ratio, 0.0);
}

TEST(BoundExperiment, NeedsTruncationAtLeastTwo) {
  EXPECT_THROW(bound_experiment(delta_spec(1), 2.0, 10, 1), Error);
}

TEST(BoundExperiment, PairingHeavyStaysBounded) {
  for (int N : {4, 8}) {
    const FamilyShape shape{2, 1, 1, 1, N};
    const RandomTensorSpec spec{generate_family("diagonal-pairing", shape, {}, 3), {1, -1}};
    const auto r = bound_experiment(spec, 2.0, 300, 9, fast_options());
    EXPECT_TRUE(std::isfinite(r.ratio));
    EXPECT_LT(r.ratio, 2.0);
  }
}

TEST(KhintchineExperiment, SingleIdentityMatrix) {
  const FamilyShape shape{1, 1, 1, 1, 8};
  const RandomTensorSpec spec{generate_family("identity-series", shape, {}, 0), {1}};
  for (double p : {2.0, 4.0, 6.0}) {
    const auto r = khintchine_experiment(spec, p, 4000, 13, fast_options());
    // ||X|| = |g_0| and E|g|^p = Gamma(1 + p/2).
    EXPECT_NEAR(r.lhs.mean_p_norm, std::pow(std::tgamma(1.0 + p / 2.0), 1.0 / p), 3.0 * r.lhs.std_error);
    EXPECT_NEAR(r.rhs_max, 1.0, 1e-14);
    EXPECT_LE(r.lhs.mean_p_norm, std::sqrt(p));
  }
}

TEST(KhintchineExperiment, RankOneFlatteningsAgree) {
  const FamilyShape shape{1, 1, 1, 1, 4};
  const RandomTensorSpec spec{generate_family("rank-one", shape, {}, 4), {1}};
  const auto rhs = rhs_bound(spec);
  EXPECT_NEAR(rhs.norms[0], rhs.norms[1], 1e-12);
  EXPECT_THROW(khintchine_experiment(pairing_spec(1, 2), 2.0, 10, 1), Error);
}

TEST(Decoupling, OrderOneIsHalfPi) {
  const auto r = decoupling_experiment(delta_spec(4), 2.0, 3000, 21, fast_options());
  EXPECT_NEAR(r.ratio, std::numbers::pi / 2.0, 3.0 * r.ratio_stderr);
  EXPECT_NEAR(r.slack, (std::numbers::pi / 2.0 - 1.0) * r.lhs.mean_p_norm, 3.0 * r.slack_stderr);
}

TEST(Decoupling, PairingOrderTwo) {
  const FamilyShape shape{2, 1, 1, 1, 4};
  const RandomTensorSpec spec{generate_family("diagonal-pairing", shape, {}, 5), {1, -1}};
  for (double p : {2.0, 4.0}) {
    const auto r = decoupling_experiment(spec, p, 500, 31, fast_options());
    EXPECT_EQ(r.terms.size(), 2u);
    EXPECT_GE(r.slack, -3.0 * r.slack_stderr);
  }
}

TEST(Decoupling, RandomOrderThree) {
  const FamilyShape shape{3, 1, 1, 1, 3};
  const RandomTensorSpec spec{generate_family("sparse-gaussian", shape, {4096, 0.3}, 6), {1, -1, 1}};
  const auto r = decoupling_experiment(spec, 2.0, 400, 41, fast_options());
  EXPECT_GE(r.slack, -3.0 * r.slack_stderr);
}

TEST(Khintchine, TraceConstant) {
  EXPECT_DOUBLE_EQ(khintchine_trace_constant(2.0, 1.0), 1.0);
  // q = 1 gives sqrt(dim); larger q wins for large dim.
  EXPECT_LT(khintchine_trace_constant(2.0, 1e6), std::sqrt(1e6));
  EXPECT_GE(khintchine_trace_constant(8.0, 10.0), std::sqrt(7.0));
  EXPECT_THROW(khintchine_trace_constant(0.5, 2.0), Error);
}

TEST(PartialTensor, OrderOneIsH) {
  const auto spec = delta_spec(2);
  EXPECT_EQ(partial_tensor(spec, 0, GaussianField{1, 0}), spec.h);
}

TEST(Induction, DecoupledTermsBelowKhintchineBound) {
  const FamilyShape shape{2, 1, 1, 1, 4};
  for (const char* family : {"diagonal-pairing", "dense-gaussian"}) {
    const RandomTensorSpec spec{generate_family(family, shape, {}, 8), {1, -1}};
    const auto r = induction_check(spec, 2.0, 300, 51, fast_options());
    ASSERT_EQ(r.decoupled.size(), 2u);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_LE(r.decoupled[j].mean_p_norm, r.bounds[j].mean_p_norm);
    EXPECT_LE(r.decoupled_rhs, r.bound_rhs + 3.0 * r.combined_stderr) << family;
  }
}
