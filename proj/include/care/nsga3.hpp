#pragma once

// NSGA-III over mixed numerical / categorical genotypes.
//
// All objectives are minimized. Survival follows the reference-point scheme:
// whole non-dominated fronts are kept while they fit, and the last partial
// front is filled by niching over Das-Dennis reference directions after
// ideal-point translation and intercept normalization.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "care/error.hpp"

namespace care::moo {

using Objectives = std::vector<double>;
using Genotype = std::vector<double>;
using Rng = std::mt19937_64;

struct GeneSpec {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t categories = 0;  // > 0: categorical gene holding codes 0..categories-1

  bool categorical() const { return categories > 0; }
  bool valid(double v) const {
    if (!std::isfinite(v)) return false;
    if (categorical()) return v == std::floor(v) && v >= 0.0 && v < static_cast<double>(categories);
    return v >= lower && v <= upper;
  }
};

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Divisions per objective count, keeping H = C(M + p - 1, p) roughly within [50, 126].
inline std::size_t default_divisions(std::size_t objectives) {
  switch (objectives) {
    case 1: return 1;
    case 2: return 49;
    case 3: return 12;
    case 4: return 7;
    case 5: return 5;
    case 6: return 4;
    case 7: return 3;
    default: break;
  }
  std::size_t p = 1;
  while (binomial(objectives + p, p + 1) <= 126) ++p;
  return p;
}

// Smallest multiple of 4 that is >= the number of reference points.
inline std::size_t population_size(std::size_t objectives, std::size_t divisions) {
  const auto h = static_cast<std::size_t>(binomial(objectives + divisions - 1, divisions));
  return (h + 3) / 4 * 4;
}

namespace detail {

inline void das_dennis_fill(std::vector<std::vector<double>>& out, std::vector<double>& point, std::size_t axis,
                            std::size_t left, std::size_t total) {
  if (axis + 1 == point.size()) {
    point[axis] = static_cast<double>(left) / static_cast<double>(total);
    out.push_back(point);
    return;
  }
  for (std::size_t i = 0; i <= left; ++i) {
    point[axis] = static_cast<double>(i) / static_cast<double>(total);
    das_dennis_fill(out, point, axis + 1, left - i, total);
  }
}

}  // namespace detail

// Lattice points with p divisions on the unit simplex in M dimensions.
inline std::vector<std::vector<double>> das_dennis_points(std::size_t objectives, std::size_t divisions) {
  if (objectives < 1 || divisions < 1) throw ArgumentError("das_dennis_points: need M >= 1 and p >= 1");
  std::vector<std::vector<double>> out;
  std::vector<double> point(objectives, 0.0);
  detail::das_dennis_fill(out, point, 0, divisions, divisions);
  return out;
}

inline bool dominates(std::span<const double> a, std::span<const double> b) {
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strict = true;
  }
  return strict;
}

// Fronts of indices; front 0 is the non-dominated set.
inline std::vector<std::vector<std::size_t>> fast_nondominated_sort(std::span<const Objectives> objs) {
  const std::size_t n = objs.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      if (dominates(objs[p], objs[q])) {
        dominated[p].push_back(q);
        ++count[q];
      } else if (dominates(objs[q], objs[p])) {
        dominated[q].push_back(p);
        ++count[p];
      }
    }
  }
  for (std::size_t p = 0; p < n; ++p)
    if (count[p] == 0) current.push_back(p);
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (auto p : current)
      for (auto q : dominated[p])
        if (--count[q] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

inline double perpendicular_distance(std::span<const double> direction, std::span<const double> point) {
  double dot = 0.0, norm2 = 0.0;
  for (std::size_t i = 0; i < direction.size(); ++i) {
    dot += direction[i] * point[i];
    norm2 += direction[i] * direction[i];
  }
  if (norm2 <= 0.0) return std::numeric_limits<double>::infinity();
  const double k = dot / norm2;
  double d = 0.0;
  for (std::size_t i = 0; i < direction.size(); ++i) d += (point[i] - k * direction[i]) * (point[i] - k * direction[i]);
  return std::sqrt(d);
}

namespace detail {

// Intercepts of the hyperplane through the extreme points of the translated
// objectives; falls back to per-objective maxima when degenerate.
inline std::vector<double> intercepts(const std::vector<Objectives>& translated, std::span<const std::size_t> members,
                                      std::size_t m) {
  std::vector<double> maxima(m, 0.0);
  for (auto s : members)
    for (std::size_t i = 0; i < m; ++i) maxima[i] = std::max(maxima[i], translated[s][i]);
  auto fallback = [&] {
    std::vector<double> a = maxima;
    for (auto& v : a)
      if (!(v > 1e-10)) v = 1.0;
    return a;
  };
  if (m < 2) return fallback();

  std::vector<std::size_t> extremes(m);
  for (std::size_t axis = 0; axis < m; ++axis) {
    double best = std::numeric_limits<double>::infinity();
    for (auto s : members) {
      double asf = 0.0;
      for (std::size_t i = 0; i < m; ++i) asf = std::max(asf, translated[s][i] / (i == axis ? 1.0 : 1e-6));
      if (asf < best) {
        best = asf;
        extremes[axis] = s;
      }
    }
  }
  Eigen::MatrixXd e(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < m; ++c)
      e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = translated[extremes[r]][c];
  Eigen::FullPivLU<Eigen::MatrixXd> lu(e);
  if (lu.rank() < static_cast<Eigen::Index>(m)) return fallback();
  const Eigen::VectorXd b = lu.solve(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m)));
  std::vector<double> a(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double bi = b(static_cast<Eigen::Index>(i));
    if (!(bi > 0.0) || !std::isfinite(1.0 / bi)) return fallback();
    a[i] = 1.0 / bi;
    if (!(a[i] > 1e-10)) return fallback();
  }
  return a;
}

}  // namespace detail

// NSGA-III environmental selection of `n` indices out of `objs`.
inline std::vector<std::size_t> nsga3_select(const std::vector<Objectives>& objs,
                                             const std::vector<std::vector<double>>& refs, std::size_t n, Rng& rng) {
  if (n > objs.size()) throw ArgumentError("nsga3_select: asked for more survivors than candidates");
  std::vector<std::size_t> chosen;
  if (n == 0) return chosen;
  const auto fronts = fast_nondominated_sort(objs);
  std::size_t last = 0;
  for (; last < fronts.size(); ++last) {
    if (chosen.size() + fronts[last].size() > n) break;
    chosen.insert(chosen.end(), fronts[last].begin(), fronts[last].end());
  }
  if (chosen.size() == n) return chosen;

  const auto& partial = fronts[last];
  const std::size_t m = objs.front().size();
  std::vector<std::size_t> members = chosen;
  members.insert(members.end(), partial.begin(), partial.end());

  std::vector<double> ideal(m, std::numeric_limits<double>::infinity());
  for (auto s : members)
    for (std::size_t i = 0; i < m; ++i) ideal[i] = std::min(ideal[i], objs[s][i]);
  std::vector<Objectives> translated(objs.size());
  for (auto s : members) {
    translated[s].resize(m);
    for (std::size_t i = 0; i < m; ++i) translated[s][i] = objs[s][i] - ideal[i];
  }
  const auto a = detail::intercepts(translated, members, m);
  std::vector<std::size_t> niche_of(objs.size(), 0);
  std::vector<double> dist_of(objs.size(), 0.0);
  for (auto s : members) {
    Objectives norm(m);
    for (std::size_t i = 0; i < m; ++i) norm[i] = translated[s][i] / a[i];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const double d = perpendicular_distance(refs[r], norm);
      if (d < best) {
        best = d;
        niche_of[s] = r;
      }
    }
    dist_of[s] = best;
  }
  std::vector<std::size_t> niche_count(refs.size(), 0);
  for (auto s : chosen) ++niche_count[niche_of[s]];

  std::vector<std::size_t> pool = partial;
  std::vector<bool> excluded(refs.size(), false);
  while (chosen.size() < n) {
    std::size_t min_count = std::numeric_limits<std::size_t>::max();
    for (std::size_t r = 0; r < refs.size(); ++r)
      if (!excluded[r]) min_count = std::min(min_count, niche_count[r]);
    std::vector<std::size_t> candidates;
    for (std::size_t r = 0; r < refs.size(); ++r)
      if (!excluded[r] && niche_count[r] == min_count) candidates.push_back(r);
    const auto ref = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];

    std::vector<std::size_t> in_niche;  // positions within pool
    for (std::size_t k = 0; k < pool.size(); ++k)
      if (niche_of[pool[k]] == ref) in_niche.push_back(k);
    if (in_niche.empty()) {
      excluded[ref] = true;
      continue;
    }
    std::size_t pick = in_niche.front();
    if (niche_count[ref] == 0) {
      for (auto k : in_niche)
        if (dist_of[pool[k]] < dist_of[pool[pick]]) pick = k;
    } else {
      pick = in_niche[std::uniform_int_distribution<std::size_t>(0, in_niche.size() - 1)(rng)];
    }
    chosen.push_back(pool[pick]);
    ++niche_count[ref];
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return chosen;
}

// Swaps genes in [cut1, cut2) between the parents.
inline std::pair<Genotype, Genotype> two_point_crossover_at(const Genotype& a, const Genotype& b, std::size_t cut1,
                                                            std::size_t cut2) {
  if (a.size() != b.size()) throw ArgumentError("crossover: parents differ in arity");
  if (cut1 > cut2 || cut2 > a.size()) throw ArgumentError("crossover: invalid cut points");
  Genotype c1 = a, c2 = b;
  for (std::size_t i = cut1; i < cut2; ++i) std::swap(c1[i], c2[i]);
  return {std::move(c1), std::move(c2)};
}

inline std::pair<Genotype, Genotype> two_point_crossover(const Genotype& a, const Genotype& b, double pc, Rng& rng) {
  if (a.size() != b.size()) throw ArgumentError("crossover: parents differ in arity");
  if (!(std::uniform_real_distribution<double>(0.0, 1.0)(rng) < pc) || a.size() < 2) return {a, b};
  const std::size_t size = a.size();
  std::size_t cut1 = std::uniform_int_distribution<std::size_t>(1, size)(rng);
  std::size_t cut2 = std::uniform_int_distribution<std::size_t>(1, size - 1)(rng);
  if (cut2 >= cut1)
    ++cut2;
  else
    std::swap(cut1, cut2);
  return two_point_crossover_at(a, b, cut1, cut2);
}

// Bounded polynomial mutation of one real gene.
inline double polynomial_mutate_gene(double x, double lower, double upper, double eta, Rng& rng) {
  if (!(upper > lower)) return std::clamp(x, lower, upper);
  x = std::clamp(x, lower, upper);
  const double span = upper - lower;
  const double d1 = (x - lower) / span;
  const double d2 = (upper - x) / span;
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double power = 1.0 / (eta + 1.0);
  double dq = 0.0;
  if (u < 0.5) {
    const double v = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta + 1.0);
    dq = std::pow(v, power) - 1.0;
  } else {
    const double v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta + 1.0);
    dq = 1.0 - std::pow(v, power);
  }
  return std::clamp(x + dq * span, lower, upper);
}

// With probability pm the individual mutates: each gene with probability 1/m,
// numerical genes by polynomial mutation, categorical genes to a different category.
inline Genotype polynomial_mutation_mixed(Genotype g, double pm, double eta, std::span<const GeneSpec> genes,
                                          Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (!(unit(rng) < pm) || g.empty()) return g;
  const double per_gene = 1.0 / static_cast<double>(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (!(unit(rng) < per_gene)) continue;
    const auto& spec = genes[j];
    if (spec.categorical()) {
      if (spec.categories < 2) continue;
      auto code = std::uniform_int_distribution<std::size_t>(0, spec.categories - 2)(rng);
      if (code >= static_cast<std::size_t>(g[j])) ++code;
      g[j] = static_cast<double>(code);
    } else {
      g[j] = polynomial_mutate_gene(g[j], spec.lower, spec.upper, eta, rng);
    }
  }
  return g;
}

struct MooConfig {
  std::size_t objectives = 3;
  std::size_t generations = 10;
  double pc = 0.6;
  double pm = 0.3;
  double eta_m = 20.0;
  std::size_t divisions = 0;  // 0: default_divisions(objectives)
  std::uint64_t seed = 0;

  std::size_t effective_divisions() const { return divisions > 0 ? divisions : default_divisions(objectives); }
  std::size_t population() const { return population_size(objectives, effective_divisions()); }
};

struct Population {
  std::vector<Genotype> genotypes;
  std::vector<Objectives> objectives;
};

using Evaluator = std::function<std::vector<Objectives>(std::span<const Genotype>)>;
using Observer = std::function<void(std::size_t generation, const Population&)>;

namespace detail {

inline std::vector<Objectives> evaluate(const Evaluator& eval, std::span<const Genotype> genotypes,
                                        std::size_t objectives, std::size_t generation) {
  std::vector<Objectives> out;
  try {
    out = eval(genotypes);
  } catch (const std::exception& e) {
    throw EvaluationError("generation " + std::to_string(generation) + ": evaluator failed: " + e.what(), generation,
                          0);
  }
  if (out.size() != genotypes.size())
    throw EvaluationError("generation " + std::to_string(generation) + ": evaluator returned " +
                              std::to_string(out.size()) + " vectors for " + std::to_string(genotypes.size()) +
                              " individuals",
                          generation, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    bool ok = out[i].size() == objectives;
    for (double v : out[i]) ok = ok && std::isfinite(v);
    if (!ok)
      throw EvaluationError("generation " + std::to_string(generation) + ", individual " + std::to_string(i) +
                                ": invalid objective vector",
                            generation, i);
  }
  return out;
}

inline Population take(const Population& pop, std::span<const std::size_t> idx) {
  Population out;
  for (auto i : idx) {
    out.genotypes.push_back(pop.genotypes[i]);
    out.objectives.push_back(pop.objectives[i]);
  }
  return out;
}

}  // namespace detail

// Runs `cfg.generations` rounds of variation and survival from `init`. The
// evaluator receives whole populations. Every random draw comes from one
// generator seeded with cfg.seed.
inline Population evolve(const Evaluator& eval, std::vector<Genotype> init, std::span<const GeneSpec> genes,
                         const MooConfig& cfg, const Observer& observer = {}) {
  if (init.empty()) throw ArgumentError("evolve: empty initial population");
  for (const auto& g : init)
    if (g.size() != genes.size()) throw ArgumentError("evolve: genotype arity does not match gene specs");
  Rng rng(cfg.seed);
  const auto refs = das_dennis_points(cfg.objectives, cfg.effective_divisions());
  const std::size_t n = init.size();

  Population pop;
  pop.objectives = detail::evaluate(eval, init, cfg.objectives, 0);
  pop.genotypes = std::move(init);
  {
    const auto idx = nsga3_select(pop.objectives, refs, n, rng);
    pop = detail::take(pop, idx);
  }
  if (observer) observer(0, pop);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t gen = 1; gen <= cfg.generations; ++gen) {
    std::vector<Genotype> offspring = pop.genotypes;
    std::shuffle(offspring.begin(), offspring.end(), rng);
    for (std::size_t i = 1; i < offspring.size(); i += 2) {
      auto [c1, c2] = two_point_crossover(offspring[i - 1], offspring[i], cfg.pc, rng);
      offspring[i - 1] = std::move(c1);
      offspring[i] = std::move(c2);
    }
    for (auto& g : offspring) g = polynomial_mutation_mixed(std::move(g), cfg.pm, cfg.eta_m, genes, rng);

    auto off_objs = detail::evaluate(eval, offspring, cfg.objectives, gen);
    Population merged = std::move(pop);
    merged.genotypes.insert(merged.genotypes.end(), std::make_move_iterator(offspring.begin()),
                            std::make_move_iterator(offspring.end()));
    merged.objectives.insert(merged.objectives.end(), std::make_move_iterator(off_objs.begin()),
                             std::make_move_iterator(off_objs.end()));
    const auto idx = nsga3_select(merged.objectives, refs, n, rng);
    pop = detail::take(merged, idx);
    if (observer) observer(gen, pop);
  }
  return pop;
}

}  // namespace care::moo
