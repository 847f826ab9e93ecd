#pragma once

// Validity costs: desired outcome (hinge on the class probability, or distance
// to the desired response interval), Gower feature distance and sparsity.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "care/error.hpp"
#include "care/tabular.hpp"

namespace care {

// Numerical values closer than this (encoded units) count as unchanged.
inline constexpr double kChangeTolerance = 1e-9;

struct DesiredOutcome {
  Task task = Task::classification;
  std::size_t target_class = 0;
  double threshold = 0.5;
  double lb = 0.0;
  double ub = 0.0;

  static DesiredOutcome classification(std::size_t c, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw ArgumentError("probability threshold must lie in (0, 1]");
    return {Task::classification, c, p, 0.0, 0.0};
  }
  static DesiredOutcome regression(double lb, double ub) {
    if (!(lb <= ub)) throw ArgumentError("desired range requires lb <= ub");
    return {Task::regression, 0, 0.0, lb, ub};
  }
};

inline double outcome_cost_classification(std::span<const double> probabilities, std::size_t c, double p) {
  if (c >= probabilities.size()) throw ArgumentError("desired class index out of range");
  if (!(p > 0.0 && p <= 1.0)) throw ArgumentError("probability threshold must lie in (0, 1]");
  return std::max(0.0, p - probabilities[c]);
}

inline double outcome_cost_regression(double prediction, double lb, double ub) {
  if (!(lb <= ub)) throw ArgumentError("desired range requires lb <= ub");
  if (prediction < lb) return lb - prediction;
  if (prediction > ub) return prediction - ub;
  return 0.0;
}

// `prediction` is the predictor's output for one row (probabilities or a single response).
inline double outcome_cost(std::span<const double> prediction, const DesiredOutcome& d) {
  return d.task == Task::classification ? outcome_cost_classification(prediction, d.target_class, d.threshold)
                                        : outcome_cost_regression(prediction.front(), d.lb, d.ub);
}

// Per-feature distance on raw values (numerical raw value, or category code).
inline double feature_delta(double x, double x_prime, const FeatureMeta& meta) {
  if (!meta.numerical() || meta.range() <= 0.0) return std::abs(x - x_prime) > 0.0 ? 1.0 : 0.0;
  return std::min(1.0, std::abs(x - x_prime) / meta.range());
}

// Same on encoded values.
inline double feature_delta_encoded(double x, double x_prime, const FeatureMeta& meta) {
  if (!meta.numerical()) return x != x_prime ? 1.0 : 0.0;
  if (meta.range() <= 0.0) return std::abs(x - x_prime) > kChangeTolerance ? 1.0 : 0.0;
  return feature_delta(meta.decode_scalar(x), meta.decode_scalar(x_prime), meta);
}

inline double gower_distance(std::span<const double> x, std::span<const double> x_prime,
                             std::span<const FeatureMeta> metas) {
  if (x.size() != x_prime.size() || x.size() != metas.size()) throw ArgumentError("gower_distance: arity mismatch");
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += feature_delta_encoded(x[j], x_prime[j], metas[j]);
  return s / static_cast<double>(x.size());
}

inline bool value_changed(double x, double x_prime) { return std::abs(x - x_prime) > kChangeTolerance; }

inline std::vector<std::size_t> changed_features(std::span<const double> x, std::span<const double> x_prime) {
  if (x.size() != x_prime.size()) throw ArgumentError("changed_features: arity mismatch");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (value_changed(x[j], x_prime[j])) out.push_back(j);
  return out;
}

inline std::size_t sparsity_cost(std::span<const double> x, std::span<const double> x_prime) {
  return changed_features(x, x_prime).size();
}

}  // namespace care
