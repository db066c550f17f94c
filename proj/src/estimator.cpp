#include "randten/estimator.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <map>
#include <numbers>

#include "randten/errors.hpp"
#include "randten/parallel.hpp"

namespace randten {

void RandomTensorSpec::validate() const {
  std::size_t j_axes = 0;
  for (const auto& l : h.labels()) j_axes += l.group == LabelGroup::J;
  if (j_axes != signs.size())
    throw Error("tensor has " + std::to_string(j_axes) + " J axes but " + std::to_string(signs.size()) + " signs");
  for (int s : signs)
    if (s != 1 && s != -1) throw Error("chaos signs must be +1 or -1");
}

std::vector<IndexLabel> RandomTensorSpec::labels_in(LabelGroup group) const {
  std::vector<IndexLabel> out;
  for (const auto& l : h.labels())
    if (l.group == group) out.push_back(l);
  return out;
}

namespace detail {

SplitPositions split_positions(const RandomTensorSpec& spec) {
  SplitPositions pos;
  for (std::size_t i = 0; i < spec.h.rank(); ++i)
    (spec.h.labels()[i].group == LabelGroup::J ? pos.j : pos.ab).push_back(i);
  return pos;
}

}  // namespace detail

Partition ab_partition(const Tensor& g_tensor) {
  Partition p;
  for (const auto& l : g_tensor.labels()) {
    if (l.group == LabelGroup::J) throw LabelError("realized tensor must not carry J labels");
    (l.group == LabelGroup::A ? p.x_side : p.y_side).push_back(l);
  }
  return p;
}

namespace {

FlatIndex gather(const FlatIndex& index, std::span<const std::size_t> positions, int d) {
  FlatIndex key;
  key.reserve(positions.size() * static_cast<std::size_t>(d));
  for (std::size_t p : positions) {
    auto first = index.begin() + static_cast<std::ptrdiff_t>(p * static_cast<std::size_t>(d));
    key.insert(key.end(), first, first + d);
  }
  return key;
}

}  // namespace

ChaosAssembler::ChaosAssembler(const RandomTensorSpec& spec, std::optional<std::size_t> decoupled) {
  spec.validate();
  if (decoupled && *decoupled >= spec.order()) throw Error("decoupled factor index out of range");
  const Tensor& h = spec.h;
  const int d = h.dim();
  std::vector<std::size_t> j_pos, a_pos, b_pos;
  for (std::size_t i = 0; i < h.rank(); ++i) {
    switch (h.labels()[i].group) {
      case LabelGroup::J: j_pos.push_back(i); break;
      case LabelGroup::A: a_pos.push_back(i); break;
      case LabelGroup::B: b_pos.push_back(i); break;
    }
  }

  std::map<FlatIndex, Eigen::Index> row_of, col_of;
  for (const auto& [index, value] : h.entries()) {
    row_of.emplace(gather(index, b_pos, d), 0);
    col_of.emplace(gather(index, a_pos, d), 0);
  }
  Eigen::Index next = 0;
  for (auto& [key, i] : row_of) i = next++;
  next = 0;
  for (auto& [key, i] : col_of) i = next++;
  row_count_ = row_of.size();
  col_count_ = col_of.size();

  std::map<LatticePoint, std::uint32_t> site_id;
  auto intern = [&](const LatticePoint& n) {
    auto [it, inserted] = site_id.emplace(n, static_cast<std::uint32_t>(sites_.size()));
    if (inserted) sites_.push_back(n);
    return it->second;
  };

  std::map<std::vector<std::uint32_t>, std::uint32_t> term_of;
  for (const auto& [index, value] : h.entries()) {
    ChaosSpec chaos{{}, spec.signs};
    std::vector<std::uint32_t> key;
    for (std::size_t p : j_pos) {
      chaos.points.push_back(h.point(index, p));
      key.push_back(intern(chaos.points.back()));
    }
    auto [it, inserted] = term_of.emplace(key, static_cast<std::uint32_t>(terms_.size()));
    if (inserted) {
      Term term;
      ChaosSpec renormalized = chaos;
      if (decoupled) {
        term.plain_site = key[*decoupled];
        term.plain_sign = spec.signs[*decoupled];
        renormalized = chaos.without(*decoupled);
      }
      for (const auto& profile : site_profiles(renormalized))
        term.factors.push_back({intern(profile.site), profile.sigma, profile.mu});
      terms_.push_back(std::move(term));
    }
    entries_.push_back({row_of.at(gather(index, b_pos, d)), col_of.at(gather(index, a_pos, d)), it->second, value});
  }
}

Eigen::MatrixXcd ChaosAssembler::assemble(const GaussianField& g, const GaussianField& g_tilde) const {
  std::vector<Complex> g_at(sites_.size());
  for (std::size_t s = 0; s < sites_.size(); ++s) g_at[s] = g.sample(sites_[s]);
  std::vector<Complex> g_tilde_at;
  const bool needs_copy = std::any_of(terms_.begin(), terms_.end(), [](const Term& t) { return t.plain_sign != 0; });
  if (needs_copy) {
    g_tilde_at.resize(sites_.size());
    for (std::size_t s = 0; s < sites_.size(); ++s) g_tilde_at[s] = g_tilde.sample(sites_[s]);
  }

  std::vector<Complex> term_value(terms_.size());
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    const Term& term = terms_[t];
    Complex v = 1.0;
    for (const auto& f : term.factors) v *= renorm_factor(f.sigma, f.mu, g_at[f.site]);
    if (term.plain_sign > 0) v *= g_tilde_at[term.plain_site];
    if (term.plain_sign < 0) v *= std::conj(g_tilde_at[term.plain_site]);
    term_value[t] = v;
  }

  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(rows(), cols());
  for (const auto& e : entries_) m(e.row, e.col) += e.value * term_value[e.term];
  return m;
}

std::vector<double> sample_norms(const ChaosAssembler& assembler, std::size_t n_samples, std::uint64_t seed,
                                 const MonteCarloOptions& options, std::vector<std::size_t>* flagged) {
  std::vector<double> norms(n_samples, 0.0);
  std::vector<char> failed(n_samples, 0);
  parallel_for(n_samples, options.workers, [&](std::size_t i) {
    const std::uint64_t master = derive_seed(seed, i);
    const GaussianField g{master, 0, FieldKind::Complex};
    const GaussianField g_tilde{master, 1, FieldKind::Complex};
    NormOptions norm_options = options.norm;
    norm_options.throw_on_nonconvergence = false;
    const NormResult r = operator_norm(assembler.assemble(g, g_tilde), norm_options);
    norms[i] = r.value;
    failed[i] = !r.converged;
  });
  if (flagged)
    for (std::size_t i = 0; i < n_samples; ++i)
      if (failed[i]) flagged->push_back(i);
  return norms;
}

double moment_from_norms(std::span<const double> norms, double p) {
  if (norms.empty()) return 0.0;
  std::vector<double> powered(norms.size());
  std::transform(norms.begin(), norms.end(), powered.begin(), [p](double x) { return std::pow(x, p); });
  return std::pow(pairwise_sum(powered) / static_cast<double>(norms.size()), 1.0 / p);
}

double bootstrap_stderr(std::span<const std::vector<double>> columns,
                        const std::function<double(std::span<const double>)>& statistic, std::uint64_t seed,
                        std::size_t resamples) {
  if (columns.empty() || resamples < 2) return 0.0;
  const std::size_t n = columns.front().size();
  if (n == 0) return 0.0;
  std::vector<double> stats(resamples);
  std::vector<double> means(columns.size());
  std::vector<std::size_t> picks(n);
  for (std::size_t b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < n; ++i) picks[i] = hash_words(seed, {0xb007ULL, b, i}) % n;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      double s = 0.0;
      for (std::size_t i : picks) s += columns[c][i];
      means[c] = s / static_cast<double>(n);
    }
    stats[b] = statistic(means);
  }
  const double mean = pairwise_sum(stats) / static_cast<double>(resamples);
  double ss = 0.0;
  for (double s : stats) ss += (s - mean) * (s - mean);
  return std::sqrt(ss / static_cast<double>(resamples - 1));
}

namespace {

std::vector<double> powered(std::span<const double> norms, double p) {
  std::vector<double> out(norms.size());
  std::transform(norms.begin(), norms.end(), out.begin(), [p](double x) { return std::pow(x, p); });
  return out;
}

}  // namespace

MomentEstimate moment_estimate(std::span<const double> norms, double p, std::uint64_t seed,
                             const MonteCarloOptions& options) {
  if (!(p >= 1.0)) throw Error("moment order p must be >= 1");
  MomentEstimate est;
  est.p = p;
  est.samples = norms.size();
  est.seed = seed;
  est.mean_p_norm = moment_from_norms(norms, p);
  const std::vector<std::vector<double>> columns{powered(norms, p)};
  est.std_error = bootstrap_stderr(
      columns, [p](std::span<const double> m) { return std::pow(m[0], 1.0 / p); }, seed, options.bootstrap_resamples);
  return est;
}

MomentEstimate moment_norm(const RandomTensorSpec& spec, double p, std::size_t n_samples, std::uint64_t seed,
                           const MonteCarloOptions& options) {
  if (n_samples < 2) throw Error("moment_norm needs at least 2 samples");
  if (!(p >= 1.0)) throw Error("moment order p must be >= 1");
  const ChaosAssembler assembler(spec);
  std::vector<std::size_t> flagged;
  const auto norms = sample_norms(assembler, n_samples, seed, options, &flagged);
  MomentEstimate est = moment_estimate(norms, p, seed, options);
  est.flagged = std::move(flagged);
  return est;
}

RhsBound rhs_bound(const RandomTensorSpec& spec, const NormOptions& options) {
  spec.validate();
  const auto j_labels = spec.labels_in(LabelGroup::J);
  const auto a_labels = spec.labels_in(LabelGroup::A);
  const auto b_labels = spec.labels_in(LabelGroup::B);
  RhsBound out;
  bool first = true;
  for (const auto& pj : enumerate_partitions(j_labels)) {
    Partition full{a_labels, b_labels};
    full.x_side.insert(full.x_side.end(), pj.x_side.begin(), pj.x_side.end());
    full.y_side.insert(full.y_side.end(), pj.y_side.begin(), pj.y_side.end());
    const double norm = tensor_norm(spec.h, full, options).value;
    if (first || norm > out.rhs_max) {
      out.rhs_max = norm;
      out.best_partition = full;
      first = false;
    }
    out.partitions.push_back(std::move(full));
    out.norms.push_back(norm);
  }
  return out;
}

BoundReport bound_from_norms(std::span<const double> norms, const RhsBound& rhs, std::size_t k, int N, double p,
                             std::uint64_t seed, const MonteCarloOptions& options) {
  if (N < 2) throw Error("bound_experiment needs truncation N >= 2");
  BoundReport report;
  report.lhs = moment_estimate(norms, p, seed, options);
  report.rhs_max = rhs.rhs_max;
  report.best_partition = rhs.best_partition;
  const double kk = static_cast<double>(k);
  const double scale = std::pow(p, kk / 2.0) * std::pow(std::log(static_cast<double>(N)), kk / 2.0) * rhs.rhs_max;
  report.ratio = scale > 0.0 ? report.lhs.mean_p_norm / scale : 0.0;
  return report;
}

BoundReport bound_experiment(const RandomTensorSpec& spec, double p, std::size_t n_samples, std::uint64_t seed,
                             const MonteCarloOptions& options) {
  if (spec.h.truncation() < 2) throw Error("bound_experiment needs truncation N >= 2");
  if (n_samples < 2) throw Error("moment_norm needs at least 2 samples");
  std::vector<std::size_t> flagged;
  const auto norms = sample_norms(ChaosAssembler(spec), n_samples, seed, options, &flagged);
  BoundReport report =
      bound_from_norms(norms, rhs_bound(spec, options.norm), spec.order(), spec.h.truncation(), p, seed, options);
  report.lhs.flagged = std::move(flagged);
  return report;
}

BoundReport khintchine_experiment(const RandomTensorSpec& spec, double p, std::size_t n_samples,
                                  std::uint64_t seed, const MonteCarloOptions& options) {
  if (spec.order() != 1) throw Error("khintchine_experiment requires chaos order 1");
  return bound_experiment(spec, p, n_samples, seed, options);
}

std::vector<std::vector<double>> decoupling_norms(const RandomTensorSpec& spec, std::size_t n_samples,
                                                  std::uint64_t seed, const MonteCarloOptions& options) {
  const std::size_t k = spec.order();
  if (k < 1) throw Error("decoupling needs chaos order >= 1");
  if (n_samples < 2) throw Error("decoupling needs at least 2 samples");
  std::vector<std::vector<double>> norms;
  norms.push_back(sample_norms(ChaosAssembler(spec), n_samples, seed, options));
  for (std::size_t j = 0; j < k; ++j) norms.push_back(sample_norms(ChaosAssembler(spec, j), n_samples, seed, options));
  return norms;
}

DecouplingReport decoupling_from_norms(const std::vector<std::vector<double>>& norms, double p, std::uint64_t seed,
                                       const MonteCarloOptions& options) {
  if (norms.size() < 2) throw Error("decoupling needs the plain and at least one decoupled column");
  const std::size_t k = norms.size() - 1;
  DecouplingReport report;
  report.lhs = moment_estimate(norms[0], p, seed, options);
  for (std::size_t j = 0; j < k; ++j) {
    report.terms.push_back(moment_estimate(norms[j + 1], p, seed, options));
    report.rhs += report.terms.back().mean_p_norm;
  }
  const double half_pi = std::numbers::pi / 2.0;
  report.rhs *= half_pi;
  report.slack = report.rhs - report.lhs.mean_p_norm;
  report.ratio = report.lhs.mean_p_norm > 0.0 ? report.rhs / report.lhs.mean_p_norm : 0.0;

  std::vector<std::vector<double>> columns;
  for (const auto& n : norms) columns.push_back(powered(n, p));
  auto sides = [p, half_pi](std::span<const double> m) {
    double rhs = 0.0;
    for (std::size_t c = 1; c < m.size(); ++c) rhs += std::pow(m[c], 1.0 / p);
    return std::pair{std::pow(m[0], 1.0 / p), half_pi * rhs};
  };
  report.slack_stderr = bootstrap_stderr(
      columns, [&](std::span<const double> m) { auto [l, r] = sides(m); return r - l; }, seed,
      options.bootstrap_resamples);
  report.ratio_stderr = bootstrap_stderr(
      columns, [&](std::span<const double> m) { auto [l, r] = sides(m); return l > 0.0 ? r / l : 0.0; }, seed,
      options.bootstrap_resamples);
  return report;
}

DecouplingReport decoupling_experiment(const RandomTensorSpec& spec, double p, std::size_t n_samples,
                                       std::uint64_t seed, const MonteCarloOptions& options) {
  return decoupling_from_norms(decoupling_norms(spec, n_samples, seed, options), p, seed, options);
}

double khintchine_trace_constant(double p, double dim) {
  if (!(p >= 1.0) || !(dim >= 1.0)) throw Error("khintchine_trace_constant needs p >= 1 and dim >= 1");
  const int q0 = std::max(1, static_cast<int>(std::ceil(p / 2.0)));
  double best = std::numeric_limits<double>::infinity();
  for (int q = q0; q <= q0 + 200; ++q)
    best = std::min(best, std::sqrt(2.0 * q - 1.0) * std::pow(dim, 1.0 / (2.0 * q)));
  return best;
}

Tensor partial_tensor(const RandomTensorSpec& spec, std::size_t j, const GaussianField& g) {
  spec.validate();
  if (j >= spec.order()) throw Error("partial_tensor factor index out of range");
  const Tensor& h = spec.h;
  const int d = h.dim();
  const auto pos = detail::split_positions(spec);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < h.rank(); ++i)
    if (h.labels()[i].group != LabelGroup::J || i == pos.j[j]) kept.push_back(i);
  std::vector<IndexLabel> labels;
  for (std::size_t i : kept) labels.push_back(h.labels()[i]);

  std::map<FlatIndex, Complex> acc;
  for (const auto& [index, value] : h.entries()) {
    ChaosSpec rest{{}, spec.signs};
    for (std::size_t p : pos.j) rest.points.push_back(h.point(index, p));
    rest = rest.without(j);
    acc[gather(index, kept, d)] += value * renorm_evaluate(rest, g);
  }
  std::vector<TensorEntry> entries;
  for (auto& [key, value] : acc) entries.push_back({key, value});
  return make_tensor(std::move(labels), d, h.truncation(), entries);
}

InductionReport induction_check(const RandomTensorSpec& spec, double p, std::size_t n_samples,
                                std::uint64_t seed, const MonteCarloOptions& options) {
  const std::size_t k = spec.order();
  if (k < 1) throw Error("induction_check needs chaos order >= 1");
  const double half_pi = std::numbers::pi / 2.0;
  const auto j_labels = spec.labels_in(LabelGroup::J);
  InductionReport report;
  double var = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const ChaosAssembler assembler(spec, j);
    const auto decoupled = sample_norms(assembler, n_samples, seed, options);
    report.decoupled.push_back(moment_estimate(decoupled, p, seed, options));

    std::vector<double> sigma(n_samples);
    parallel_for(n_samples, options.workers, [&](std::size_t i) {
      const GaussianField g{derive_seed(seed, i), 0, FieldKind::Complex};
      const Tensor partial = partial_tensor(spec, j, g);
      if (partial.empty()) return;
      std::vector<std::string> with_j{j_labels[j].name}, without_j;
      for (const auto& l : partial.labels())
        if (l.group == LabelGroup::A) {
          with_j.push_back(l.name);
          without_j.push_back(l.name);
        }
      sigma[i] = std::max(tensor_norm(partial, split_labels(partial, with_j), options.norm).value,
                          tensor_norm(partial, split_labels(partial, without_j), options.norm).value);
    });
    const double dim = static_cast<double>(std::max<Eigen::Index>(1, assembler.rows() + assembler.cols()));
    const double K = khintchine_trace_constant(p, dim);
    MomentEstimate bound = moment_estimate(sigma, p, seed, options);
    bound.mean_p_norm *= K;
    bound.std_error *= K;
    report.constants.push_back(K);
    report.decoupled_rhs += half_pi * report.decoupled.back().mean_p_norm;
    report.bound_rhs += half_pi * bound.mean_p_norm;
    var += std::pow(half_pi * report.decoupled.back().std_error, 2) + std::pow(half_pi * bound.std_error, 2);
    report.bounds.push_back(std::move(bound));
  }
  report.combined_stderr = std::sqrt(var);
  return report;
}

}  // namespace randten
