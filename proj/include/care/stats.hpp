#pragma once

// Descriptive statistics and the three association measures used to build the
// feature correlation matrix: Pearson's r, the correlation ratio and Cramer's V.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "care/error.hpp"

namespace care::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) throw ArgumentError("mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Population standard deviation.
inline double stddev(std::span<const double> x) {
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

// Empirical quantile with linear interpolation between order statistics
// (h = (n - 1) q, the usual "type 7" definition).
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw ArgumentError("quantile of an empty sample");
  if (q < 0.0 || q > 1.0) throw ArgumentError("quantile level outside [0, 1]");
  std::sort(x.begin(), x.end());
  const double h = static_cast<double>(x.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

inline double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("pearson_r: length mismatch");
  if (x.size() < 2) throw ArgumentError("pearson_r: need at least two observations");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw UndefinedCorrelationError("pearson_r: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// eta = sqrt(SS_between / SS_total) of `values` grouped by `categories`.
inline double correlation_ratio(std::span<const double> categories, std::span<const double> values) {
  if (categories.size() != values.size()) throw ArgumentError("correlation_ratio: length mismatch");
  if (values.empty()) throw ArgumentError("correlation_ratio: empty sample");
  std::map<double, std::pair<double, std::size_t>> groups;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& [sum, count] = groups[categories[i]];
    sum += values[i];
    ++count;
  }
  if (groups.size() < 2) throw UndefinedCorrelationError("correlation_ratio: fewer than two groups");
  const double grand = mean(values);
  double total = 0.0;
  for (double v : values) total += (v - grand) * (v - grand);
  if (total <= 0.0) throw UndefinedCorrelationError("correlation_ratio: zero total variance");
  double between = 0.0;
  for (const auto& [_, g] : groups) {
    const double gm = g.first / static_cast<double>(g.second);
    between += static_cast<double>(g.second) * (gm - grand) * (gm - grand);
  }
  return std::clamp(std::sqrt(between / total), 0.0, 1.0);
}

// Cramer's V without bias correction: sqrt(chi2 / (n * min(r - 1, c - 1))).
inline double cramers_v(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("cramers_v: length mismatch");
  if (a.empty()) throw ArgumentError("cramers_v: empty sample");
  std::map<double, std::size_t> rows, cols;
  for (double v : a) rows.try_emplace(v, rows.size());
  for (double v : b) cols.try_emplace(v, cols.size());
  if (rows.size() < 2 || cols.size() < 2)
    throw UndefinedCorrelationError("cramers_v: a variable has a single observed category");
  std::vector<std::vector<double>> table(rows.size(), std::vector<double>(cols.size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) table[rows[a[i]]][cols[b[i]]] += 1.0;
  std::vector<double> rsum(rows.size(), 0.0), csum(cols.size(), 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) {
      rsum[r] += table[r][c];
      csum[c] += table[r][c];
    }
  const auto n = static_cast<double>(a.size());
  double chi2 = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double expected = rsum[r] * csum[c] / n;
      chi2 += (table[r][c] - expected) * (table[r][c] - expected) / expected;
    }
  const auto k = static_cast<double>(std::min(rows.size(), cols.size()) - 1);
  return std::clamp(std::sqrt(chi2 / (n * k)), 0.0, 1.0);
}

}  // namespace care::stats
