#pragma once

// Constraint language and the importance-weighted actionability cost.
//
//   fix          new == old                      numerical, categorical
//   l / g        new <  old / new >  old         numerical
//   le / ge      new <= old / new >= old         numerical
//   range        lb <= new <= ub                 numerical
//   set          new in {v1, ..., vn}            categorical
//
// Values are raw: numbers in original units, categories as ordinal codes.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "care/error.hpp"
#include "care/tabular.hpp"
#include "json.hpp"

namespace care {

enum class ConstraintKind { fix, l, g, le, ge, range, set };

inline const char* to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::fix: return "fix";
    case ConstraintKind::l: return "l";
    case ConstraintKind::g: return "g";
    case ConstraintKind::le: return "le";
    case ConstraintKind::ge: return "ge";
    case ConstraintKind::range: return "range";
    case ConstraintKind::set: return "set";
  }
  return "?";
}

inline std::optional<ConstraintKind> parse_constraint_kind(const std::string& s) {
  for (auto k : {ConstraintKind::fix, ConstraintKind::l, ConstraintKind::g, ConstraintKind::le, ConstraintKind::ge,
                 ConstraintKind::range, ConstraintKind::set})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

inline bool kind_applies(ConstraintKind c, FeatureKind f) {
  if (c == ConstraintKind::fix) return true;
  if (c == ConstraintKind::set) return f == FeatureKind::categorical;
  return f == FeatureKind::numerical;
}

// Constraint kinds applicable to a feature kind, in table order.
inline std::vector<ConstraintKind> applicable_kinds(FeatureKind f) {
  if (f == FeatureKind::categorical) return {ConstraintKind::fix, ConstraintKind::set};
  return {ConstraintKind::fix, ConstraintKind::l,  ConstraintKind::g,
          ConstraintKind::le,  ConstraintKind::ge, ConstraintKind::range};
}

struct Constraint {
  ConstraintKind kind = ConstraintKind::fix;
  double lb = 0.0;
  double ub = 0.0;
  std::set<std::size_t> values;  // category codes for `set`

  static Constraint fix() { return {ConstraintKind::fix, 0, 0, {}}; }
  static Constraint of(ConstraintKind k) { return {k, 0, 0, {}}; }
  static Constraint range(double lb, double ub) {
    if (!(lb <= ub)) throw ConfigError("range constraint requires lb <= ub", "range");
    return {ConstraintKind::range, lb, ub, {}};
  }
  static Constraint one_of(std::set<std::size_t> codes) {
    if (codes.empty()) throw ConfigError("set constraint requires at least one value", "values");
    return {ConstraintKind::set, 0, 0, std::move(codes)};
  }
};

inline constexpr double kFixTolerance = 1e-9;

inline bool check_satisfiability(const Constraint& c, FeatureKind feature, double old_value, double new_value) {
  if (!kind_applies(c.kind, feature))
    throw ConfigError(std::string("constraint '") + to_string(c.kind) + "' does not apply to a " +
                          to_string(feature) + " feature",
                      "op", true);
  switch (c.kind) {
    case ConstraintKind::fix: return std::abs(new_value - old_value) <= kFixTolerance;
    case ConstraintKind::l: return new_value < old_value;
    case ConstraintKind::g: return new_value > old_value;
    case ConstraintKind::le: return new_value <= old_value;
    case ConstraintKind::ge: return new_value >= old_value;
    case ConstraintKind::range: return c.lb <= new_value && new_value <= c.ub;
    case ConstraintKind::set: return c.values.count(static_cast<std::size_t>(std::lround(new_value))) > 0;
  }
  return false;
}

struct PreferenceTriple {
  std::size_t feature = 0;
  Constraint constraint;
  double importance = 1.0;
};

struct Preference {
  std::vector<PreferenceTriple> triples;

  bool empty() const { return triples.empty(); }

  void add(std::size_t feature, Constraint c, double importance, const Schema& schema) {
    if (feature >= schema.size()) throw ConfigError("preference refers to an unknown feature", "feature");
    const auto& meta = schema.features[feature];
    if (!(importance > 0.0) || !std::isfinite(importance))
      throw ConfigError("importance of '" + meta.name + "' must be finite and positive", meta.name + ".importance");
    if (!kind_applies(c.kind, meta.kind))
      throw ConfigError(std::string("constraint '") + to_string(c.kind) + "' is not applicable to " +
                            to_string(meta.kind) + " feature '" + meta.name + "'",
                        meta.name + ".op", true);
    for (const auto& t : triples)
      if (t.feature == feature) throw ConfigError("duplicate preference for '" + meta.name + "'", meta.name);
    triples.push_back({feature, std::move(c), importance});
  }
};

// x and x' are encoded rows; constraints are checked on raw values.
inline double actionability_cost(std::span<const double> x, std::span<const double> x_prime, const Preference& prefs,
                                 const Schema& schema) {
  double eta = 0.0;
  for (const auto& t : prefs.triples) {
    const auto& meta = schema.features[t.feature];
    const double old_v = meta.decode_scalar(x[t.feature]);
    const double new_v = meta.decode_scalar(x_prime[t.feature]);
    if (!check_satisfiability(t.constraint, meta.kind, old_v, new_v)) eta += t.importance;
  }
  return eta;
}

// Preference document: a JSON object mapping feature name to
//   {"op": "fix"|"l"|"g"|"le"|"ge"|"range"|"set", "lb": n, "ub": n, "values": [...], "importance": n}
// `lb`/`ub` apply to range, `values` to set; importance defaults to 1.0.
inline Preference parse_preferences(const nlohmann::json& doc, const Schema& schema) {
  if (!doc.is_object()) throw ConfigError("preference document must be an object", "preferences");
  Preference prefs;
  for (const auto& [name, spec] : doc.items()) {
    const auto j = schema.index_of(name);
    if (!j) throw ConfigError("preference refers to unknown feature '" + name + "'", name);
    const auto& meta = schema.features[*j];
    if (!spec.is_object() || !spec.contains("op") || !spec["op"].is_string())
      throw ConfigError("preference for '" + name + "' needs a string 'op'", name + ".op");
    const auto op = spec["op"].get<std::string>();
    const auto kind = parse_constraint_kind(op);
    if (!kind) throw ConfigError("unknown constraint kind '" + op + "' for '" + name + "'", name + ".op");
    if (!kind_applies(*kind, meta.kind))
      throw ConfigError("constraint '" + op + "' is not applicable to " + to_string(meta.kind) + " feature '" + name +
                            "'",
                        name + ".op", true);
    double importance = 1.0;
    if (spec.contains("importance")) {
      if (!spec["importance"].is_number())
        throw ConfigError("importance of '" + name + "' must be a number", name + ".importance");
      importance = spec["importance"].get<double>();
    }
    Constraint c = Constraint::of(*kind);
    if (*kind == ConstraintKind::range) {
      if (!spec.contains("lb") || !spec.contains("ub") || !spec["lb"].is_number() || !spec["ub"].is_number())
        throw ConfigError("range constraint on '" + name + "' needs numeric lb and ub", name + ".lb");
      const double lb = spec["lb"].get<double>(), ub = spec["ub"].get<double>();
      if (!(lb <= ub)) throw ConfigError("range constraint on '" + name + "' has lb > ub", name + ".lb");
      c = Constraint::range(lb, ub);
    } else if (*kind == ConstraintKind::set) {
      if (!spec.contains("values") || !spec["values"].is_array() || spec["values"].empty())
        throw ConfigError("set constraint on '" + name + "' needs a non-empty 'values' list", name + ".values");
      std::set<std::size_t> codes;
      for (const auto& v : spec["values"]) {
        if (!v.is_string()) throw ConfigError("set values of '" + name + "' must be labels", name + ".values");
        const auto label = v.get<std::string>();
        if (std::find(meta.categories.begin(), meta.categories.end(), label) == meta.categories.end())
          throw ConfigError("unknown category '" + label + "' for '" + name + "'", name + ".values");
        codes.insert(meta.code_of(label));
      }
      c = Constraint::one_of(std::move(codes));
    }
    prefs.add(*j, std::move(c), importance, schema);
  }
  return prefs;
}

namespace detail {

// Parses JSON text and rejects any object that repeats a key.
inline nlohmann::json parse_json_strict(const std::string& text, const std::string& field) {
  std::vector<std::set<std::string>> open;
  return nlohmann::json::parse(text, [&](int, nlohmann::json::parse_event_t ev, nlohmann::json& parsed) {
    using E = nlohmann::json::parse_event_t;
    if (ev == E::object_start) {
      open.emplace_back();
    } else if (ev == E::object_end) {
      open.pop_back();
    } else if (ev == E::key) {
      const auto key = parsed.get<std::string>();
      if (!open.back().insert(key).second) throw ConfigError("duplicate key '" + key + "'", field.empty() ? key : field + "." + key);
    }
    return true;
  });
}

}  // namespace detail

// Parses text, rejecting documents that repeat a feature key.
inline Preference parse_preferences_text(const std::string& text, const Schema& schema) {
  nlohmann::json doc;
  try {
    doc = detail::parse_json_strict(text, "");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed preference document: ") + e.what(), "preferences");
  }
  return parse_preferences(doc, schema);
}

inline nlohmann::json to_json(const Preference& p, const Schema& schema) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& t : p.triples) {
    const auto& meta = schema.features[t.feature];
    nlohmann::json e{{"op", to_string(t.constraint.kind)}, {"importance", t.importance}};
    if (t.constraint.kind == ConstraintKind::range) {
      e["lb"] = t.constraint.lb;
      e["ub"] = t.constraint.ub;
    } else if (t.constraint.kind == ConstraintKind::set) {
      nlohmann::json vals = nlohmann::json::array();
      for (auto c : t.constraint.values) vals.push_back(meta.categories[c]);
      e["values"] = vals;
    }
    doc[meta.name] = std::move(e);
  }
  return doc;
}

}  // namespace care
