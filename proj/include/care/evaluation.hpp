#pragma once

// Benchmark metrics: per-objective mean and std, coherency rate over declared
// feature groups, feature diversity d_F and value diversity d_V.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "care/error.hpp"
#include "care/explainer.hpp"
#include "care/stats.hpp"
#include "care/tabular.hpp"
#include "json.hpp"

namespace care {

inline double jaccard(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (auto v : a) common += b.count(v);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

// 1 - mean pairwise Jaccard similarity of changed-feature sets.
inline double feature_diversity(std::span<const std::vector<std::size_t>> changed) {
  const std::size_t n = changed.size();
  if (n < 2) throw UndefinedMetricError("feature diversity needs at least two explanations");
  std::vector<std::set<std::size_t>> sets;
  for (const auto& c : changed) sets.emplace_back(c.begin(), c.end());
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++pairs) sum += jaccard(sets[i], sets[j]);
  return 1.0 - sum / static_cast<double>(pairs);
}

// 1 - mean pairwise fraction of commonly changed features that take equal
// values. Pairs without commonly changed features contribute 0.
inline double value_diversity(std::span<const std::vector<std::size_t>> changed, std::span<const RawRow> values) {
  const std::size_t n = changed.size();
  if (n < 2) throw UndefinedMetricError("value diversity needs at least two explanations");
  if (values.size() != n) throw ArgumentError("value diversity: changed sets and rows differ in length");
  std::vector<std::set<std::size_t>> sets;
  for (const auto& c : changed) sets.emplace_back(c.begin(), c.end());
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++pairs) {
      std::size_t common = 0, equal = 0;
      for (auto k : sets[i]) {
        if (!sets[j].count(k)) continue;
        ++common;
        if (raw_equal(values[i][k], values[j][k])) ++equal;
      }
      if (common > 0) sum += static_cast<double>(equal) / static_cast<double>(common);
    }
  return 1.0 - sum / static_cast<double>(pairs);
}

inline double feature_diversity(const CounterfactualSet& set) {
  std::vector<std::vector<std::size_t>> changed;
  for (const auto& cf : set.items) changed.push_back(cf.changed);
  return feature_diversity(changed);
}

inline double value_diversity(const CounterfactualSet& set) {
  std::vector<std::vector<std::size_t>> changed;
  std::vector<RawRow> values;
  for (const auto& cf : set.items) {
    changed.push_back(cf.changed);
    values.push_back(cf.raw);
  }
  return value_diversity(changed, values);
}

// A declared consistency relation between features, in raw units.
//   linear:   features[1] == slope * features[0] + intercept (within tolerance)
//   observed: the tuple of member values occurs in the training data
struct CoherencyGroup {
  enum class Kind { linear, observed };
  std::string name;
  Kind kind = Kind::observed;
  std::vector<std::size_t> features;
  double slope = 1.0;
  double intercept = 0.0;
  double tolerance = 1e-6;
  std::vector<RawRow> observed;

  bool consistent(const RawRow& row) const {
    if (kind == Kind::linear) {
      const double a = std::get<double>(row[features[0]]);
      const double b = std::get<double>(row[features[1]]);
      return std::abs(b - (slope * a + intercept)) <= tolerance;
    }
    for (const auto& t : observed) {
      bool match = true;
      for (std::size_t k = 0; k < features.size() && match; ++k)
        match = raw_equal(t[k], row[features[k]], tolerance);
      if (match) return true;
    }
    return false;
  }
};

// Group document: [{"name", "kind": "linear"|"observed", "features": [...],
//                   "slope", "intercept", "tolerance"}]. Observed tuples are
// collected from `train`.
inline std::vector<CoherencyGroup> parse_coherency_groups(const nlohmann::json& doc, const Dataset& train) {
  if (!doc.is_array()) throw ConfigError("coherency groups must be a list", "groups");
  std::vector<CoherencyGroup> groups;
  for (std::size_t gi = 0; gi < doc.size(); ++gi) {
    const auto& g = doc[gi];
    const std::string field = "groups[" + std::to_string(gi) + "]";
    CoherencyGroup out;
    out.name = g.value("name", field);
    const auto kind = g.value("kind", std::string());
    if (kind == "linear")
      out.kind = CoherencyGroup::Kind::linear;
    else if (kind == "observed")
      out.kind = CoherencyGroup::Kind::observed;
    else
      throw ConfigError("unknown coherency group kind '" + kind + "'", field + ".kind");
    if (!g.contains("features") || !g["features"].is_array() || g["features"].size() < 2)
      throw ConfigError("coherency group needs at least two features", field + ".features");
    for (const auto& f : g["features"]) {
      const auto name = f.get<std::string>();
      const auto j = train.schema.index_of(name);
      if (!j) throw ConfigError("coherency group refers to unknown feature '" + name + "'", field + ".features");
      out.features.push_back(*j);
    }
    out.tolerance = g.value("tolerance", 1e-6);
    if (out.kind == CoherencyGroup::Kind::linear) {
      if (out.features.size() != 2) throw ConfigError("linear group relates exactly two features", field + ".features");
      for (auto j : out.features)
        if (!train.schema.features[j].numerical())
          throw ConfigError("linear group members must be numerical", field + ".features");
      out.slope = g.value("slope", 1.0);
      out.intercept = g.value("intercept", 0.0);
    } else {
      for (const auto& raw : train.raw) {
        RawRow t;
        for (auto j : out.features) t.push_back(raw[j]);
        bool seen = false;
        for (const auto& o : out.observed) {
          bool same = true;
          for (std::size_t k = 0; k < t.size() && same; ++k) same = raw_equal(o[k], t[k], out.tolerance);
          if (same) {
            seen = true;
            break;
          }
        }
        if (!seen) out.observed.push_back(std::move(t));
      }
    }
    groups.push_back(std::move(out));
  }
  return groups;
}

// Fraction of counterfactuals that keep every touched group consistent.
inline double coherency_rate(std::span<const CounterfactualSet> sets, std::span<const CoherencyGroup> groups) {
  std::size_t total = 0, coherent = 0;
  for (const auto& set : sets)
    for (const auto& cf : set.items) {
      ++total;
      const std::set<std::size_t> changed(cf.changed.begin(), cf.changed.end());
      bool ok = true;
      for (const auto& g : groups) {
        bool touched = false;
        for (auto j : g.features) touched = touched || changed.count(j) > 0;
        if (touched && !g.consistent(cf.raw)) {
          ok = false;
          break;
        }
      }
      coherent += ok ? 1 : 0;
    }
  return total == 0 ? 1.0 : static_cast<double>(coherent) / static_cast<double>(total);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

// Population standard deviation.
inline MeanStd aggregate(std::span<const double> values) {
  MeanStd out;
  out.count = values.size();
  if (values.empty()) return out;
  out.mean = stats::mean(values);
  out.std = stats::stddev(values);
  return out;
}

inline nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}, {"count", m.count}}; }

struct InputRecord {
  std::size_t index = 0;  // row of the test split
  std::optional<std::string> error;
  CounterfactualSet set;
  std::optional<double> d_f;
  std::optional<double> d_v;
  double seconds = 0.0;
};

struct ConfigReport {
  ModuleSet modules;
  std::array<std::optional<MeanStd>, 7> objectives;
  double coherency_rate = 1.0;
  MeanStd d_f;
  MeanStd d_v;
  std::size_t counterfactuals = 0;
  std::size_t best_effort_sets = 0;
  double mean_seconds = 0.0;
  std::vector<InputRecord> records;
};

struct BenchmarkOptions {
  std::vector<ModuleSet> configs{ModuleSet::parse("1"), ModuleSet::parse("1,2"), ModuleSet::parse("1,2,3"),
                                 ModuleSet::parse("1,2,3,4")};
  std::size_t n_inputs = 50;
  std::size_t n = 10;
  std::uint64_t seed = 0;
  std::optional<Preference> preferences;
  std::vector<CoherencyGroup> groups;
};

struct BenchmarkReport {
  std::vector<ConfigReport> configs;
  std::size_t n_inputs = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

// Explains the first n_inputs rows of `test` under every configuration. The
// explainer must have every module used by any configuration fitted; each run
// restricts the active objective set, and all seven objectives are scored by
// the same fitted sub-models so configurations are directly comparable.
inline BenchmarkReport run_benchmark(const Explainer& explainer, const Dataset& test, const BenchmarkOptions& opts) {
  if (test.size() == 0) throw InputError("benchmark needs a non-empty test split");
  BenchmarkReport report;
  report.n_inputs = std::min(opts.n_inputs, test.size());
  report.n = opts.n;
  report.seed = opts.seed;
  const Preference* prefs = opts.preferences ? &*opts.preferences : nullptr;

  for (const auto& cfg : opts.configs) {
    ConfigReport cr;
    cr.modules = cfg;
    std::array<std::vector<double>, 7> columns;
    std::vector<double> dfs, dvs, secs;
    std::vector<CounterfactualSet> sets;
    for (std::size_t i = 0; i < report.n_inputs; ++i) {
      InputRecord rec;
      rec.index = i;
      const auto start = std::chrono::steady_clock::now();
      try {
        const auto& x = test.rows[i];
        const auto desired = explainer.desired_outcome_for(x);
        rec.set = explainer.explain(x, desired, prefs, {opts.n, opts.seed + i, cfg});
        if (rec.set.items.size() >= 2) {
          rec.d_f = feature_diversity(rec.set);
          rec.d_v = value_diversity(rec.set);
          dfs.push_back(*rec.d_f);
          dvs.push_back(*rec.d_v);
        }
        for (const auto& cf : rec.set.items) {
          const auto vals = cf.breakdown.values();
          for (std::size_t k = 0; k < vals.size(); ++k)
            if (vals[k]) columns[k].push_back(*vals[k]);
        }
        cr.counterfactuals += rec.set.items.size();
        cr.best_effort_sets += rec.set.valid ? 0 : 1;
        sets.push_back(rec.set);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        rec.error = e.what();
      }
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      secs.push_back(rec.seconds);
      cr.records.push_back(std::move(rec));
    }
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (!columns[k].empty()) cr.objectives[k] = aggregate(columns[k]);
    cr.coherency_rate = coherency_rate(sets, opts.groups);
    cr.d_f = aggregate(dfs);
    cr.d_v = aggregate(dvs);
    cr.mean_seconds = secs.empty() ? 0.0 : stats::mean(secs);
    report.configs.push_back(std::move(cr));
  }
  return report;
}

// Deterministic report body; timings are emitted separately.
inline nlohmann::json to_json(const BenchmarkReport& r, const Schema& schema, const Dataset& test) {
  nlohmann::json configs = nlohmann::json::array();
  for (const auto& c : r.configs) {
    nlohmann::json objectives = nlohmann::json::object();
    for (std::size_t k = 0; k < c.objectives.size(); ++k)
      objectives[kObjectiveNames[k]] = c.objectives[k] ? to_json(*c.objectives[k]) : nlohmann::json(nullptr);
    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : c.records) {
      nlohmann::json e{{"index", rec.index}};
      if (rec.error) {
        e["error"] = *rec.error;
      } else {
        e["result"] = to_json(rec.set, schema, test.rows[rec.index]);
        e["d_f"] = rec.d_f ? nlohmann::json(*rec.d_f) : nlohmann::json(nullptr);
        e["d_v"] = rec.d_v ? nlohmann::json(*rec.d_v) : nlohmann::json(nullptr);
      }
      records.push_back(std::move(e));
    }
    configs.push_back({{"modules", c.modules.list()},
                       {"objectives", objectives},
                       {"coherency_rate", c.coherency_rate},
                       {"d_f", to_json(c.d_f)},
                       {"d_v", to_json(c.d_v)},
                       {"counterfactuals", c.counterfactuals},
                       {"best_effort_sets", c.best_effort_sets},
                       {"records", records}});
  }
  return {{"format", "care-benchmark"},
          {"version", 1},
          {"n_inputs", r.n_inputs},
          {"n", r.n},
          {"seed", r.seed},
          {"configs", configs}};
}

inline nlohmann::json timing_json(const BenchmarkReport& r) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : r.configs) {
    std::vector<double> secs;
    for (const auto& rec : c.records) secs.push_back(rec.seconds);
    out.push_back({{"modules", c.modules.list()}, {"mean_seconds", c.mean_seconds}, {"per_input_seconds", secs}});
  }
  return {{"configs", out}};
}

namespace detail {

inline std::string format_mean_std(const std::optional<MeanStd>& m) {
  if (!m) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f \xC2\xB1 %.2f", m->mean, m->std);
  return buf;
}

// Display width ignoring UTF-8 continuation bytes.
inline std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) w += (c & 0xC0) != 0x80 ? 1 : 0;
  return w;
}

inline std::string pad(const std::string& s, std::size_t width) {
  const auto w = display_width(s);
  return s + std::string(width > w ? width - w : 0, ' ');
}

inline std::string render_table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> widths;
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (widths.size() <= c) widths.push_back(0);
      widths[c] = std::max(widths[c], display_width(row[c]));
    }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) line += (c ? "  " : "") + pad(row[c], widths[c]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace detail

// Aligned table: one row per configuration, the seven objectives followed by
// the coherency rate and the diversity metrics.
inline std::string render_benchmark_table(const BenchmarkReport& r) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"config"};
  for (auto n : kObjectiveNames) header.emplace_back(n);
  for (auto n : {"coherency_rate", "d_F", "d_V"}) header.emplace_back(n);
  cells.push_back(header);
  for (const auto& c : r.configs) {
    std::vector<std::string> row{"{" + c.modules.str() + "}"};
    for (const auto& o : c.objectives) row.push_back(detail::format_mean_std(o));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", c.coherency_rate);
    row.emplace_back(buf);
    row.push_back(detail::format_mean_std(c.d_f.count ? std::optional<MeanStd>(c.d_f) : std::nullopt));
    row.push_back(detail::format_mean_std(c.d_v.count ? std::optional<MeanStd>(c.d_v) : std::nullopt));
    cells.push_back(std::move(row));
  }
  return detail::render_table(cells);
}

// Diff-style rendering of one counterfactual set: the input row followed by one
// row per counterfactual where unchanged cells show an en dash.
inline std::string render_counterfactual_table(const CounterfactualSet& set, const Schema& schema,
                                               std::span<const double> x) {
  auto cell = [](const RawValue& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", std::get<double>(v));
    return std::string(buf);
  };
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{""};
  for (const auto& f : schema.features) header.push_back(f.name);
  for (auto n : kObjectiveNames) header.emplace_back(n);
  cells.push_back(header);
  const auto input = schema.decode(x);
  std::vector<std::string> first{"x"};
  for (const auto& v : input) first.push_back(cell(v));
  cells.push_back(first);
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    const auto& cf = set.items[i];
    const std::set<std::size_t> changed(cf.changed.begin(), cf.changed.end());
    std::vector<std::string> row{"cf" + std::to_string(i + 1)};
    for (std::size_t j = 0; j < schema.size(); ++j) row.push_back(changed.count(j) ? cell(cf.raw[j]) : "\xE2\x80\x93");
    for (const auto& v : cf.breakdown.values()) {
      char buf[32];
      if (v)
        std::snprintf(buf, sizeof buf, "%.3f", *v);
      else
        std::snprintf(buf, sizeof buf, "n/a");
      row.emplace_back(buf);
    }
    cells.push_back(std::move(row));
  }
  std::string out = detail::render_table(cells);
  if (!set.valid) out += "no valid counterfactual found (best-effort set)\n";
  return out;
}

}  // namespace care
