#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "randten/norms.hpp"
#include "randten/sampler.hpp"
#include "randten/tensor.hpp"
#include "randten/wick.hpp"

namespace randten {

// Deterministic tensor h over labels J u A u B together with the signs of the
// chaos. J labels, taken in h's label order, are the chaos variables.
struct RandomTensorSpec {
  Tensor h;
  std::vector<int> signs;

  std::size_t order() const { return signs.size(); }
  // Throws Error unless h has exactly order() J-labelled axes and signs are +-1.
  void validate() const;

  std::vector<IndexLabel> labels_in(LabelGroup group) const;
};

// G_{n_A n_B} = sum_{n_J} h_{n_J n_A n_B} L(g_{n_J}^{signs}). Reference path
// through renorm_evaluate; the result carries h's A and B labels.
template <SiteField F>
Tensor realize(const RandomTensorSpec& spec, const F& field);

// Input side A, output side B.
Partition ab_partition(const Tensor& g_tensor);

// Precompiled assembly of the G matricization (rows: n_B, cols: n_A) for
// repeated sampling. With `decoupled = j` factor j is replaced by the plain
// independent copy g_tilde_{n_j}^{s_j} and the remaining factors are
// renormalized in g, as in the decoupled random tensor.
class ChaosAssembler {
 public:
  explicit ChaosAssembler(const RandomTensorSpec& spec, std::optional<std::size_t> decoupled = std::nullopt);

  Eigen::MatrixXcd assemble(const GaussianField& g, const GaussianField& g_tilde) const;

  Eigen::Index rows() const { return static_cast<Eigen::Index>(row_count_); }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(col_count_); }

 private:
  struct Factor {
    std::uint32_t site;
    int sigma;
    int mu;
  };
  struct Term {
    std::vector<Factor> factors;
    std::uint32_t plain_site = 0;
    int plain_sign = 0;  // 0: no decoupled factor
  };
  struct Entry {
    Eigen::Index row;
    Eigen::Index col;
    std::uint32_t term;
    Complex value;
  };

  std::vector<LatticePoint> sites_;
  std::vector<Term> terms_;
  std::vector<Entry> entries_;
  std::size_t row_count_ = 0;
  std::size_t col_count_ = 0;
};

struct MonteCarloOptions {
  NormOptions norm{.tol = 1e-8};
  std::size_t workers = 1;
  std::size_t bootstrap_resamples = 1000;
};

struct MomentEstimate {
  double p = 2.0;
  double mean_p_norm = 0.0;  // (mean ||G||^p)^{1/p}
  double std_error = 0.0;    // bootstrap standard error of mean_p_norm
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> flagged;  // samples whose norm did not converge
};

// ||G_i|| for samples i = 0..n-1, where sample i uses
// GaussianField{derive_seed(seed, i), stream 0} for g and stream 1 for g_tilde.
// Results are in sample order regardless of worker count.
std::vector<double> sample_norms(const ChaosAssembler& assembler, std::size_t n_samples, std::uint64_t seed,
                                 const MonteCarloOptions& options, std::vector<std::size_t>* flagged = nullptr);

// (mean x^p)^{1/p} from per-sample norms x, with pairwise reduction.
double moment_from_norms(std::span<const double> norms, double p);

// Standard deviation over bootstrap resamples of statistic(means), where
// means[c] is the resampled mean of columns[c]. All columns share the
// resampled indices.
double bootstrap_stderr(std::span<const std::vector<double>> columns,
                        const std::function<double(std::span<const double>)>& statistic, std::uint64_t seed,
                        std::size_t resamples);

// Moment estimate from precomputed per-sample norms; bootstrap seeded by `seed`.
MomentEstimate moment_estimate(std::span<const double> norms, double p, std::uint64_t seed,
                               const MonteCarloOptions& options = {});

MomentEstimate moment_norm(const RandomTensorSpec& spec, double p, std::size_t n_samples, std::uint64_t seed,
                           const MonteCarloOptions& options = {});

struct RhsBound {
  double rhs_max = 0.0;
  Partition best_partition;                  // over all labels of h
  std::vector<Partition> partitions;         // in enumeration order
  std::vector<double> norms;
};

// max over X u Y = J of ||h||_{n_A n_X -> n_B n_Y}. Ties keep the first
// partition in enumeration order.
RhsBound rhs_bound(const RandomTensorSpec& spec, const NormOptions& options = {});

struct BoundReport {
  MomentEstimate lhs;
  double rhs_max = 0.0;
  Partition best_partition;
  double ratio = 0.0;  // lhs / (p^{k/2} (log N)^{k/2} rhs_max)
};

// Requires N >= 2. A zero tensor reports ratio 0.
BoundReport bound_experiment(const RandomTensorSpec& spec, double p, std::size_t n_samples, std::uint64_t seed,
                             const MonteCarloOptions& options = {});

// Same report from precomputed norms and rhs, so several p share one sample set.
BoundReport bound_from_norms(std::span<const double> norms, const RhsBound& rhs, std::size_t k, int N, double p,
                             std::uint64_t seed, const MonteCarloOptions& options = {});

// k = 1 special case; ratio is lhs / (sqrt(p log N) max of the two flattenings).
BoundReport khintchine_experiment(const RandomTensorSpec& spec, double p, std::size_t n_samples,
                                  std::uint64_t seed, const MonteCarloOptions& options = {});

struct DecouplingReport {
  MomentEstimate lhs;
  std::vector<MomentEstimate> terms;  // one per j, decoupled in factor j
  double rhs = 0.0;                   // (pi/2) sum_j terms[j]
  double slack = 0.0;                 // rhs - lhs
  double slack_stderr = 0.0;          // joint bootstrap
  double ratio = 0.0;                 // rhs / lhs
  double ratio_stderr = 0.0;
};

// Column 0: ||G_i||; column 1 + j: norms of the tensor decoupled in factor j.
std::vector<std::vector<double>> decoupling_norms(const RandomTensorSpec& spec, std::size_t n_samples,
                                                  std::uint64_t seed, const MonteCarloOptions& options = {});
DecouplingReport decoupling_from_norms(const std::vector<std::vector<double>>& norms, double p, std::uint64_t seed,
                                       const MonteCarloOptions& options = {});

DecouplingReport decoupling_experiment(const RandomTensorSpec& spec, double p, std::size_t n_samples,
                                       std::uint64_t seed, const MonteCarloOptions& options = {});

// Trace-method Khintchine factor: min over integers q >= max(1, p/2) of
// sqrt(2q - 1) dim^{1/(2q)}, so E[||sum g_n T_n||^p]^{1/p} <= factor * sigma
// for operators acting between spaces of total dimension dim.
double khintchine_trace_constant(double p, double dim);

struct InductionReport {
  std::vector<MomentEstimate> decoupled;   // E[||sum h g~_{n_j} L(g_{J\j})||^p]^{1/p}
  std::vector<MomentEstimate> bounds;      // K * E_g[sigma_j(g)^p]^{1/p}
  std::vector<double> constants;           // K per j
  double decoupled_rhs = 0.0;              // (pi/2) sum_j decoupled
  double bound_rhs = 0.0;                  // (pi/2) sum_j bounds
  double combined_stderr = 0.0;
};

// One step of the induction: each decoupled term is a Gaussian series in
// g_tilde with tensor h'_j(g) = sum_{n_{J\j}} h L(g_{J\j}); conditional
// Khintchine bounds it by K times the larger flattening of h'_j(g).
InductionReport induction_check(const RandomTensorSpec& spec, double p, std::size_t n_samples,
                                std::uint64_t seed, const MonteCarloOptions& options = {});

// Partial tensor h'_j(g) with labels (J label j, A, B).
Tensor partial_tensor(const RandomTensorSpec& spec, std::size_t j, const GaussianField& g);

// ---- implementation of templates ----

namespace detail {
struct SplitPositions {
  std::vector<std::size_t> j, ab;
};
SplitPositions split_positions(const RandomTensorSpec& spec);
}  // namespace detail

template <SiteField F>
Tensor realize(const RandomTensorSpec& spec, const F& field) {
  spec.validate();
  const auto pos = detail::split_positions(spec);
  const Tensor& h = spec.h;
  const int d = h.dim();
  std::vector<IndexLabel> labels;
  for (std::size_t p : pos.ab) labels.push_back(h.labels()[p]);

  std::map<FlatIndex, Complex> acc;
  ChaosSpec chaos;
  chaos.signs = spec.signs;
  for (const auto& [index, value] : h.entries()) {
    chaos.points.clear();
    for (std::size_t p : pos.j) chaos.points.push_back(h.point(index, p));
    FlatIndex key;
    for (std::size_t p : pos.ab) {
      auto first = index.begin() + static_cast<std::ptrdiff_t>(p * static_cast<std::size_t>(d));
      key.insert(key.end(), first, first + d);
    }
    acc[key] += value * renorm_evaluate(chaos, field);
  }
  std::vector<TensorEntry> entries;
  for (auto& [key, value] : acc) entries.push_back({key, value});
  return make_tensor(std::move(labels), d, h.truncation(), entries);
}

}  // namespace randten
