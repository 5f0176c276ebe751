#pragma once

// Likelihood-weighted sampling over OSDDs, an independent (rejection)
// sampler over the concrete evaluator, and ratio estimators.

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "osdd/engine.hpp"
#include "osdd/inference.hpp"
#include "osdd/oracle.hpp"

namespace osdd {

using Rng = std::mt19937_64;

/// Independent stream number `chain` of a run seeded with `seed`.
inline Rng chain_rng(std::uint64_t seed, std::uint64_t chain = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(chain >> 32)};
  return Rng(seq);
}

enum class SampleStatus { consistent, rejected };

struct WeightedSample {
  World assignment;
  double weight = 1;
  SampleStatus status = SampleStatus::rejected;
};

namespace detail {

inline GroundTerm draw(const SwitchDecl& d, Rng& rng) {
  const auto& vs = d.domain->values();
  if (d.dist.is_uniform()) return vs[std::uniform_int_distribution<std::size_t>(0, vs.size() - 1)(rng)];
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    u -= d.dist.prob_double(i);
    if (u < 0) return vs[i];
  }
  for (std::size_t i = vs.size(); i-- > 0;)
    if (d.dist.prob_double(i) > 0) return vs[i];
  return vs.back();
}

/// A label with every variable but `y` replaced by its value: false, or
/// y = eq (when set) and y differs from each value in `ne`.
struct ReducedLabel {
  bool never = false;
  std::optional<GroundTerm> eq;
  std::vector<GroundTerm> ne;

  bool accepts(const GroundTerm& v) const {
    if (never || (eq && *eq != v)) return false;
    return std::find(ne.begin(), ne.end(), v) == ne.end();
  }
};

inline ReducedLabel reduce(const ConstraintFormula& label, const Var& y, const Assignment& sigma) {
  ReducedLabel r;
  auto value = [&](const Var& v) -> const GroundTerm* {
    if (v == y) return nullptr;
    auto it = sigma.find(v);
    if (it == sigma.end()) throw Error("label " + label.str() + " mentions a variable not bound above it");
    return &it->second;
  };
  for (const auto& a : label.atoms()) {
    const GroundTerm* l = value(a.lhs());
    const GroundTerm* rv = is_var(a.rhs()) ? value(as_var(a.rhs())) : &as_ground(a.rhs());
    if (l && rv) {
      r.never = r.never || ((*l == *rv) != a.is_eq());
    } else if (!l && !rv) {
      r.never = r.never || !a.is_eq();
    } else {
      const GroundTerm& c = l ? *l : *rv;
      if (!a.is_eq()) r.ne.push_back(c);
      else if (r.eq && *r.eq != c) r.never = true;
      else r.eq = c;
    }
  }
  return r;
}

/// Values of the node's output variable whose edge leads away from the 0
/// leaf, with the index of that edge.
inline void allowed_values(const Osdd& n, const Assignment& sigma, std::vector<GroundTerm>& allowed,
                           std::vector<std::size_t>& via) {
  allowed.clear();
  via.clear();
  const Var y = n.out();
  std::vector<ReducedLabel> labels;
  labels.reserve(n.edge_count());
  for (std::size_t i = 0; i < n.edge_count(); ++i) labels.push_back(reduce(n.label(i), y, sigma));
  for (const auto& v : y.domain()->values()) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!labels[i].accepts(v)) continue;
      if (!n.child(i).is_zero()) {
        allowed.push_back(v);
        via.push_back(i);
      }
      break;
    }
  }
}

}  // namespace detail

/// Top-down sampler over a proper diagram. At each node the values whose
/// edge leads to the 0-leaf are excluded; if any are, the value is drawn
/// uniformly from the rest and the weight is multiplied by P(Y = y) times
/// the number of remaining values.
class LwSampler {
 public:
  LwSampler(Osdd diagram, DeclFn decl) : d_(std::move(diagram)), decl_(std::move(decl)) {}

  WeightedSample sample(Rng& rng) const {
    WeightedSample s;
    Assignment sigma;
    Osdd n = d_;
    std::vector<GroundTerm> allowed;
    std::vector<std::size_t> via;
    while (!n.is_leaf()) {
      const SwitchDecl& sd = decl_(n.si());
      const Var y = n.out();
      detail::allowed_values(n, sigma, allowed, via);
      if (allowed.empty()) return s;
      std::size_t k;
      if (allowed.size() == y.domain()->size()) {
        k = *y.domain()->index_of(detail::draw(sd, rng));
      } else {
        k = std::uniform_int_distribution<std::size_t>(0, allowed.size() - 1)(rng);
        s.weight *= sd.prob_double(allowed[k]) * static_cast<double>(allowed.size());
      }
      sigma[y] = allowed[k];
      s.assignment[n.si()] = allowed[k];
      n = n.child(via[k]);
    }
    if (n.is_one()) s.status = SampleStatus::consistent;
    return s;
  }

  /// Product of P(Y = y) times the allowed count over nodes where some
  /// value was excluded, recomputed from a finished sample.
  double replay_weight(const World& w) const {
    double weight = 1;
    Assignment sigma;
    Osdd n = d_;
    std::vector<GroundTerm> allowed;
    std::vector<std::size_t> via;
    while (!n.is_leaf()) {
      const Var y = n.out();
      detail::allowed_values(n, sigma, allowed, via);
      const GroundTerm& v = w.at(n.si());
      auto it = std::find(allowed.begin(), allowed.end(), v);
      if (it == allowed.end()) return 0;
      if (allowed.size() != y.domain()->size())
        weight *= decl_(n.si()).prob_double(v) * static_cast<double>(allowed.size());
      sigma[y] = v;
      n = n.child(via[static_cast<std::size_t>(it - allowed.begin())]);
    }
    return n.is_one() ? weight : 0;
  }

  const Osdd& diagram() const { return d_; }

 private:
  Osdd d_;
  DeclFn decl_;
};

/// Runs goals in a world whose instances are drawn lazily from their
/// declared distributions; assigned instances stay fixed.
class WorldSampler {
 public:
  explicit WorldSampler(const Program& p, MachineOptions options = {}) : ev_(p, options) {}

  bool holds(const Ast& goal, World& w, Rng& rng) {
    const WorldFn fn = [&w, &rng](const SwitchInstance& si, const SwitchDecl& d) -> GroundTerm {
      auto it = w.find(si);
      if (it != w.end()) return it->second;
      return w.emplace(si, detail::draw(d, rng)).first->second;
    };
    return ev_.holds(goal, fn);
  }

 private:
  ConcreteEvaluator ev_;
};

/// Ratio estimator sum(a) / sum(b). Unconditional runs use b = 1 per
/// sample; conditional runs use the sample weight for samples consistent
/// with the evidence. The variance is the delta-method estimate
/// sum((a - R b)^2) / sum(b)^2, computed from centred co-moments that are
/// updated one sample at a time and merged pairwise.
struct EstimatorState {
  std::uint64_t n_total = 0;
  std::uint64_t n_consistent = 0;
  std::uint64_t n_rejected = 0;
  double numerator = 0;
  double denominator = 0;
  double mean_a = 0;
  double mean_b = 0;
  double c_aa = 0;
  double c_ab = 0;
  double c_bb = 0;

  void add(double a, double b, bool consistent, bool rejected) {
    ++n_total;
    n_consistent += consistent;
    n_rejected += rejected;
    numerator += a;
    denominator += b;
    const double n = static_cast<double>(n_total);
    const double da = a - mean_a;
    const double db = b - mean_b;
    mean_a += da / n;
    mean_b += db / n;
    c_aa += da * (a - mean_a);
    c_ab += da * (b - mean_b);
    c_bb += db * (b - mean_b);
  }

  void merge(const EstimatorState& o) {
    if (o.n_total == 0) return;
    if (n_total == 0) {
      *this = o;
      return;
    }
    const double n1 = static_cast<double>(n_total);
    const double n2 = static_cast<double>(o.n_total);
    const double n = n1 + n2;
    const double da = o.mean_a - mean_a;
    const double db = o.mean_b - mean_b;
    c_aa += o.c_aa + da * da * n1 * n2 / n;
    c_ab += o.c_ab + da * db * n1 * n2 / n;
    c_bb += o.c_bb + db * db * n1 * n2 / n;
    mean_a += da * n2 / n;
    mean_b += db * n2 / n;
    n_total += o.n_total;
    n_consistent += o.n_consistent;
    n_rejected += o.n_rejected;
    numerator += o.numerator;
    denominator += o.denominator;
  }

  std::optional<double> estimate() const {
    if (denominator <= 0) return std::nullopt;
    return numerator / denominator;
  }

  std::optional<double> variance() const {
    auto r = estimate();
    if (!r) return std::nullopt;
    const double s = c_aa - 2 * *r * c_ab + *r * *r * c_bb;
    return std::max(0.0, s) / (denominator * denominator);
  }

  std::optional<double> std_error() const {
    auto v = variance();
    if (!v) return std::nullopt;
    return std::sqrt(*v);
  }

  friend bool operator==(const EstimatorState&, const EstimatorState&) = default;
};

enum class SamplingMode { lw, independent };

inline const char* mode_name(SamplingMode m) { return m == SamplingMode::lw ? "lw" : "independent"; }

inline SamplingMode parse_mode(const std::string& s) {
  if (s == "lw") return SamplingMode::lw;
  if (s == "independent") return SamplingMode::independent;
  throw Error("unknown sampling mode '" + s + "' (expected lw or independent)");
}

struct SamplingOptions {
  SamplingMode mode = SamplingMode::lw;
  std::uint64_t samples = 10000;
  std::uint64_t seed = 0;
  std::uint64_t stride = 0;  // 0: only the final row
  EngineOptions engine{};
};

struct ConvergenceRow {
  std::uint64_t samples;
  std::uint64_t consistent;
  std::optional<double> estimate;
  std::optional<double> variance;
};

/// Estimates P(query) or P(query | evidence). In lw mode the diagram of the
/// evidence (or of the query, when there is none) drives sampling; evidence
/// samples are extended to the query by running it in the sampled world,
/// drawing instances the evidence did not assign.
class Estimator {
 public:
  Estimator(const Program& program, Ast query, std::optional<Ast> evidence, SamplingOptions options)
      : program_(program), query_(std::move(query)), evidence_(std::move(evidence)), opts_(options) {
    if (opts_.samples < 1) throw Error("sample budget must be at least 1");
    if (opts_.mode == SamplingMode::lw) {
      Engine engine(program_, opts_.engine);
      lw_.emplace(engine.evaluate(evidence_ ? *evidence_ : query_), decls_of(program_));
    }
  }

  EstimatorState run(const std::function<void(const ConvergenceRow&)>& on_row = {}) {
    Rng rng = chain_rng(opts_.seed);
    WorldSampler world(program_);
    EstimatorState st;
    for (std::uint64_t i = 1; i <= opts_.samples; ++i) {
      if (opts_.mode == SamplingMode::lw) step_lw(st, world, rng);
      else step_independent(st, world, rng);
      const bool emit = (opts_.stride > 0 && i % opts_.stride == 0) || i == opts_.samples;
      if (emit && on_row) on_row({i, st.n_consistent, st.estimate(), st.variance()});
    }
    return st;
  }

  /// Lw mode with an already built diagram for the evidence (or the query).
  Estimator(const Program& program, Ast query, std::optional<Ast> evidence, SamplingOptions options, Osdd diagram)
      : program_(program), query_(std::move(query)), evidence_(std::move(evidence)), opts_(options) {
    if (opts_.samples < 1) throw Error("sample budget must be at least 1");
    if (opts_.mode == SamplingMode::lw) lw_.emplace(std::move(diagram), decls_of(program_));
  }

  const std::optional<LwSampler>& lw_sampler() const { return lw_; }

 private:
  void step_lw(EstimatorState& st, WorldSampler& world, Rng& rng) {
    WeightedSample s = lw_->sample(rng);
    const bool ok = s.status == SampleStatus::consistent;
    if (!evidence_) {
      st.add(ok ? s.weight : 0.0, 1.0, ok, !ok);
      return;
    }
    if (!ok) {
      st.add(0, 0, false, true);
      return;
    }
    const bool q = world.holds(query_, s.assignment, rng);
    st.add(q ? s.weight : 0.0, s.weight, true, false);
  }

  void step_independent(EstimatorState& st, WorldSampler& world, Rng& rng) {
    World w;
    if (!evidence_) {
      const bool q = world.holds(query_, w, rng);
      st.add(q ? 1.0 : 0.0, 1.0, q, false);
      return;
    }
    const bool e = world.holds(*evidence_, w, rng);
    if (!e) {
      st.add(0, 0, false, false);
      return;
    }
    const bool q = world.holds(query_, w, rng);
    st.add(q ? 1.0 : 0.0, 1.0, true, false);
  }

  const Program& program_;
  Ast query_;
  std::optional<Ast> evidence_;
  SamplingOptions opts_;
  std::optional<LwSampler> lw_;
};

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_csv_header(std::ostream& os) { os << "samples,consistent,estimate,variance,mode,seed\n"; }

/// An undefined estimate (no sample consistent with the evidence) is
/// written as "undefined".
inline void write_csv_row(std::ostream& os, const ConvergenceRow& r, SamplingMode mode, std::uint64_t seed) {
  os << r.samples << ',' << r.consistent << ',' << (r.estimate ? format_double(*r.estimate) : "undefined") << ','
     << (r.variance ? format_double(*r.variance) : "undefined") << ',' << mode_name(mode) << ',' << seed << '\n';
}

}  // namespace osdd
