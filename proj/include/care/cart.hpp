#pragma once

// CART classification tree: greedy binary splits minimizing weighted Gini impurity.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "care/error.hpp"
#include "json.hpp"

namespace care {

struct CartNode {
  // Internal nodes route x[feature] <= threshold to `left`.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::size_t label = 0;
  std::vector<double> distribution;  // class frequencies at the node

  bool leaf() const { return feature < 0; }
};

struct CartModel {
  std::vector<CartNode> nodes;
  std::size_t class_count = 0;

  const CartNode& leaf_for(std::span<const double> x) const {
    std::size_t at = 0;
    while (!nodes[at].leaf()) {
      const auto& n = nodes[at];
      at = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[at];
  }

  std::size_t predict(std::span<const double> x) const { return leaf_for(x).label; }
  std::span<const double> predict_distribution(std::span<const double> x) const { return leaf_for(x).distribution; }

  std::size_t depth() const { return depth_of(0); }

 private:
  std::size_t depth_of(std::size_t at) const {
    const auto& n = nodes[at];
    if (n.leaf()) return 0;
    return 1 + std::max(depth_of(static_cast<std::size_t>(n.left)), depth_of(static_cast<std::size_t>(n.right)));
  }
};

namespace detail {

inline double gini(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 1.0;
  for (double c : counts) s -= (c / total) * (c / total);
  return s;
}

struct CartBuilder {
  const std::vector<std::vector<double>>& x;
  std::span<const std::size_t> y;
  std::size_t classes;
  std::size_t max_depth;
  CartModel model;

  int build(std::vector<std::size_t> idx, std::size_t depth) {
    std::vector<double> counts(classes, 0.0);
    for (auto i : idx) counts[y[i]] += 1.0;
    CartNode node;
    const double total = static_cast<double>(idx.size());
    node.distribution.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) node.distribution[c] = counts[c] / total;
    node.label = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    const int at = static_cast<int>(model.nodes.size());
    model.nodes.push_back(node);

    const double impurity = gini(counts, total);
    if (depth >= max_depth || impurity <= 0.0 || idx.size() < 2) return at;

    // Exhaustive search over features and midpoints between distinct sorted values.
    double best = impurity + 1.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    const std::size_t m = x.front().size();
    for (std::size_t f = 0; f < m; ++f) {
      std::vector<std::size_t> order = idx;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
      std::vector<double> left(classes, 0.0), right = counts;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left[y[order[k]]] += 1.0;
        right[y[order[k]]] -= 1.0;
        const double a = x[order[k]][f];
        const double b = x[order[k + 1]][f];
        if (!(a < b)) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = total - nl;
        const double score = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
        if (score < best - 1e-12) {
          best = score;
          best_feature = static_cast<int>(f);
          best_threshold = a + (b - a) / 2.0;
        }
      }
    }
    // Zero-gain splits are allowed so that parity-like targets (XOR) remain learnable.
    if (best_feature < 0 || best > impurity + 1e-12) return at;

    std::vector<std::size_t> li, ri;
    for (auto i : idx) (x[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? li : ri).push_back(i);
    const int l = build(std::move(li), depth + 1);
    const int r = build(std::move(ri), depth + 1);
    auto& n = model.nodes[static_cast<std::size_t>(at)];
    n.feature = best_feature;
    n.threshold = best_threshold;
    n.left = l;
    n.right = r;
    return at;
  }
};

}  // namespace detail

// `target` holds class codes 0..class_count-1. class_count 0 means "max code + 1".
inline CartModel train_cart(const std::vector<std::vector<double>>& inputs, std::span<const std::size_t> target,
                            std::size_t max_depth = 5, std::size_t class_count = 0) {
  if (inputs.empty()) throw FittingError("cart: no rows");
  if (inputs.size() != target.size()) throw ArgumentError("cart: row and target counts differ");
  const std::size_t classes = std::max(class_count, *std::max_element(target.begin(), target.end()) + 1);
  detail::CartBuilder b{inputs, target, classes, max_depth, {}};
  b.model.class_count = classes;
  std::vector<std::size_t> idx(inputs.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (inputs.front().empty()) {
    // No inputs: a single majority leaf.
    b.max_depth = 0;
  }
  b.build(std::move(idx), 0);
  return std::move(b.model);
}

inline nlohmann::json to_json(const CartModel& m) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : m.nodes)
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"label", n.label},
                     {"distribution", n.distribution}});
  return {{"class_count", m.class_count}, {"nodes", nodes}};
}

inline CartModel cart_from_json(const nlohmann::json& doc) {
  CartModel m;
  m.class_count = doc.at("class_count").get<std::size_t>();
  for (const auto& e : doc.at("nodes")) {
    CartNode n;
    n.feature = e.at("feature").get<int>();
    n.threshold = e.at("threshold").get<double>();
    n.left = e.at("left").get<int>();
    n.right = e.at("right").get<int>();
    n.label = e.at("label").get<std::size_t>();
    n.distribution = e.at("distribution").get<std::vector<double>>();
    m.nodes.push_back(std::move(n));
  }
  return m;
}

}  // namespace care
