#pragma once

// Seeded synthetic datasets shared by the unit and acceptance tests.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "care/tabular.hpp"
#include "json.hpp"

namespace care::fixtures {

inline FeatureDecl num(std::string name) { return {std::move(name), FeatureKind::numerical, {}}; }
inline FeatureDecl cat(std::string name, std::vector<std::string> values) {
  return {std::move(name), FeatureKind::categorical, std::move(values)};
}

// Two Gaussian blobs around (-2,-2) and (2,2) plus an uninformative colour.
inline Dataset two_blobs(std::size_t n = 500, std::uint64_t seed = 1) {
  DatasetMeta meta{{num("x1"), num("x2"), cat("colour", {"red", "green", "blue"})}, "label", Task::classification,
                   {"neg", "pos"}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> colour(0, 2);
  std::vector<RawRow> raw;
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 2);
    const double cx = c ? 2.0 : -2.0;
    raw.push_back({cx + noise(rng), cx + noise(rng), meta.features[2].values[static_cast<std::size_t>(colour(rng))]});
    y.push_back(c);
  }
  return build_dataset(meta, std::move(raw), std::move(y));
}

// Interleaving half circles.
inline Dataset half_moons(std::size_t n = 500, std::uint64_t seed = 2, double sigma = 0.1) {
  DatasetMeta meta{{num("x1"), num("x2")}, "label", Task::classification, {"upper", "lower"}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::vector<RawRow> raw;
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 2);
    const double t = angle(rng);
    const double x1 = c ? 1.0 - std::cos(t) : std::cos(t);
    const double x2 = c ? 0.5 - std::sin(t) : std::sin(t);
    raw.push_back({x1 + noise(rng), x2 + noise(rng)});
    y.push_back(c);
  }
  return build_dataset(meta, std::move(raw), std::move(y));
}

inline const std::vector<std::string> kGrades{"a", "b", "c", "d"};
inline const std::vector<std::string> kCodes{"w", "x", "y", "z"};

// f2 = 2 * f1 exactly; code is a bijective copy of grade. The label depends on
// f1 and grade, so recourse is tempted to change one member of each pair.
// c1..c4 form a noisy chain whose weaker correlation models pull the median
// score threshold below the exact pairs.
inline Dataset correlated(std::size_t n = 500, std::uint64_t seed = 3) {
  DatasetMeta meta{{num("f1"), num("f2"), cat("grade", kGrades), cat("code", kCodes), num("noise"), num("c1"),
                    num("c2"), num("c3"), num("c4")},
                   "label",
                   Task::classification,
                   {"deny", "grant"}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::uniform_int_distribution<std::size_t> g(0, 3);
  std::normal_distribution<double> e(0.0, 1.0);
  std::vector<RawRow> raw;
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    const double f1 = u(rng);
    const std::size_t grade = g(rng);
    const double score = f1 + 2.0 * static_cast<double>(grade);
    RawRow r{f1, 2.0 * f1, kGrades[grade], kCodes[grade], e(rng)};
    double c = e(rng);
    for (int j = 0; j < 4; ++j) {
      r.push_back(c);
      c += e(rng);
    }
    raw.push_back(std::move(r));
    y.push_back(score > 8.0 ? 1.0 : 0.0);
  }
  return build_dataset(meta, std::move(raw), std::move(y));
}

inline nlohmann::json correlated_groups() {
  return nlohmann::json::parse(R"([
    {"name": "f-pair", "kind": "linear", "features": ["f1", "f2"], "slope": 2.0, "intercept": 0.0},
    {"name": "grade-code", "kind": "observed", "features": ["grade", "code"]}
  ])");
}

// Mirrors a fix-sex / ge-age preference: `fixed` is a binary group, `rising`
// an age-like numeric, and four free features carry most of the signal.
inline Dataset actionable(std::size_t n = 500, std::uint64_t seed = 4) {
  DatasetMeta meta{{cat("fixed", {"p", "q"}), num("rising"), num("free1"), num("free2"), num("free3"), num("free4")},
                   "label",
                   Task::classification,
                   {"low", "high"}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<RawRow> raw;
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    const bool q = coin(rng);
    const double rising = 40.0 + 10.0 * z(rng);
    RawRow r{std::string(q ? "q" : "p"), rising};
    double score = 0.5 * (q ? 1.0 : -1.0) + 0.05 * (rising - 40.0);
    for (int j = 0; j < 4; ++j) {
      const double v = z(rng);
      score += v;
      r.push_back(v);
    }
    raw.push_back(std::move(r));
    y.push_back(score + 0.3 * z(rng) > 0.0 ? 1.0 : 0.0);
  }
  return build_dataset(meta, std::move(raw), std::move(y));
}

inline nlohmann::json actionable_preferences() {
  return nlohmann::json::parse(R"({"fixed": {"op": "fix", "importance": 10}, "rising": {"op": "ge", "importance": 4}})");
}

// Noisy linear response for regression paths.
inline Dataset linear_response(std::size_t n = 300, std::uint64_t seed = 5) {
  DatasetMeta meta{{num("a"), num("b"), cat("kind", {"p", "q"})}, "y", Task::regression, {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> e(0.0, 0.05);
  std::vector<RawRow> raw;
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    const bool q = (i % 3) == 0;
    raw.push_back({a, b, std::string(q ? "q" : "p")});
    y.push_back(3.0 * a - b + (q ? 0.5 : 0.0) + e(rng));
  }
  return build_dataset(meta, std::move(raw), std::move(y));
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv(const Dataset& ds, bool with_target = true) {
  std::string out;
  for (std::size_t j = 0; j < ds.schema.size(); ++j) out += (j ? "," : "") + ds.schema.features[j].name;
  if (with_target) out += "," + ds.schema.target;
  out += "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.schema.size(); ++j) {
      if (j) out += ",";
      const auto& v = ds.raw[i][j];
      out += std::holds_alternative<double>(v) ? format_number(std::get<double>(v)) : std::get<std::string>(v);
    }
    if (with_target)
      out += "," + (ds.task() == Task::classification ? ds.schema.classes[static_cast<std::size_t>(ds.targets[i])]
                                                      : format_number(ds.targets[i]));
    out += "\n";
  }
  return out;
}

}  // namespace care::fixtures
