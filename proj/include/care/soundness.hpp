#pragma once

// Soundness models fitted per class / response range on the correctly
// predicted training rows: a K = 1 local-outlier test for proximity and an
// epsilon-graph clustering for connectedness.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "care/error.hpp"
#include "care/predictor.hpp"
#include "care/stats.hpp"
#include "care/tabular.hpp"
#include "json.hpp"

namespace care {

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

// Edge predicate of the epsilon-graph. Coincident points are always linked,
// so duplicated rows chain even when epsilon collapses to 0.
inline bool epsilon_linked(double distance, double epsilon) { return distance < epsilon || distance == 0.0; }

struct ProximityGroup {
  std::vector<std::size_t> source;  // indices into the training rows
  std::vector<Row> rows;
  std::vector<double> nn_distance;  // distance to the nearest distinct reference row
};

inline ProximityGroup make_proximity_group(std::vector<std::size_t> source, std::vector<Row> rows) {
  ProximityGroup g{std::move(source), std::move(rows), {}};
  g.nn_distance.assign(g.rows.size(), 0.0);
  for (std::size_t i = 0; i < g.rows.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.rows.size(); ++k) {
      if (k == i) continue;
      const double d = euclidean(g.rows[i], g.rows[k]);
      if (d > 0.0) best = std::min(best, d);
    }
    g.nn_distance[i] = std::isfinite(best) ? best : 0.0;
  }
  return g;
}

class ProximityModel {
 public:
  ProximityModel() = default;
  ProximityModel(std::vector<std::optional<ProximityGroup>> groups, double threshold)
      : groups_(std::move(groups)), threshold_(threshold) {}

  std::size_t group_count() const { return groups_.size(); }
  bool available(std::size_t g) const { return g < groups_.size() && groups_[g].has_value(); }
  double threshold() const { return threshold_; }
  const std::optional<ProximityGroup>& group(std::size_t g) const { return groups_.at(g); }

  // D(x', a0) / min_{a_i != a0} D(a0, a_i), a0 the nearest reference row to x'.
  double ratio(std::span<const double> x, std::size_t g) const {
    if (!available(g)) throw UnavailableGroupError("proximity: group " + std::to_string(g) + " is unavailable");
    const auto& grp = *groups_[g];
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grp.rows.size(); ++i) {
      const double d = euclidean(x, grp.rows[i]);
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    const double denom = grp.nn_distance[nearest];
    if (denom <= 0.0) return best == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return best / denom;
  }

  // 1 when x' is an inlier of group g, 0 otherwise (including unavailable groups).
  int fitness(std::span<const double> x, std::size_t g) const {
    if (!available(g)) return 0;
    return ratio(x, g) <= threshold_ ? 1 : 0;
  }

 private:
  std::vector<std::optional<ProximityGroup>> groups_;
  double threshold_ = 1.0;
};

inline double proximity_ratio(std::span<const double> x, const ProximityModel& model, std::size_t g) {
  return model.ratio(x, g);
}

inline int o_proximity(std::span<const double> x, const ProximityModel& model, std::size_t g) {
  return model.fitness(x, g);
}

// q-th percentile of each row's nearest-neighbour distance within the group.
inline double epsilon_for_group(std::span<const Row> rows, double percentile = 90.0) {
  if (rows.size() < 2) throw UnavailableGroupError("epsilon: fewer than two rows");
  std::vector<double> nn(rows.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows.size(); ++k)
      if (k != i) nn[i] = std::min(nn[i], euclidean(rows[i], rows[k]));
  return stats::quantile(std::move(nn), percentile / 100.0);
}

struct Clustering {
  double epsilon = 0.0;
  std::vector<int> labels;  // -1 marks noise
};

// Density clusterer used by the connectedness model; swap in another
// implementation (e.g. a full HDBSCAN) by deriving from this.
class Clusterer {
 public:
  virtual ~Clusterer() = default;
  virtual Clustering cluster(std::span<const Row> rows) const = 0;
};

// Connected components of the epsilon-graph with one adaptive epsilon per group;
// components smaller than `min_cluster_size` are noise.
class EpsilonGraphClusterer final : public Clusterer {
 public:
  explicit EpsilonGraphClusterer(double percentile = 90.0, std::size_t min_cluster_size = 2)
      : percentile_(percentile), min_cluster_size_(min_cluster_size) {}

  Clustering cluster(std::span<const Row> rows) const override {
    Clustering out;
    out.epsilon = epsilon_for_group(rows, percentile_);
    const std::size_t n = rows.size();
    std::vector<int> comp(n, -1);
    int next = 0;
    for (std::size_t s = 0; s < n; ++s) {
      if (comp[s] >= 0) continue;
      std::queue<std::size_t> q;
      q.push(s);
      comp[s] = next;
      while (!q.empty()) {
        const auto u = q.front();
        q.pop();
        for (std::size_t v = 0; v < n; ++v)
          if (comp[v] < 0 && epsilon_linked(euclidean(rows[u], rows[v]), out.epsilon)) {
            comp[v] = next;
            q.push(v);
          }
      }
      ++next;
    }
    std::vector<std::size_t> sizes(static_cast<std::size_t>(next), 0);
    for (int c : comp) ++sizes[static_cast<std::size_t>(c)];
    // Relabel valid clusters densely in order of first appearance.
    std::vector<int> relabel(static_cast<std::size_t>(next), -1);
    int valid = 0;
    out.labels.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(comp[i]);
      if (sizes[c] < min_cluster_size_) continue;
      if (relabel[c] < 0) relabel[c] = valid++;
      out.labels[i] = relabel[c];
    }
    return out;
  }

 private:
  double percentile_;
  std::size_t min_cluster_size_;
};

struct ConnectednessGroup {
  std::vector<std::size_t> source;
  std::vector<Row> rows;
  Clustering clustering;
  std::vector<std::size_t> members;  // positions (into rows) of points in valid clusters

  std::size_t cluster_count() const {
    int mx = -1;
    for (int l : clustering.labels) mx = std::max(mx, l);
    return static_cast<std::size_t>(mx + 1);
  }
};

inline ConnectednessGroup make_connectedness_group(std::vector<std::size_t> source, std::vector<Row> rows,
                                                   Clustering clustering) {
  ConnectednessGroup g{std::move(source), std::move(rows), std::move(clustering), {}};
  for (std::size_t i = 0; i < g.clustering.labels.size(); ++i)
    if (g.clustering.labels[i] >= 0) g.members.push_back(i);
  return g;
}

class ConnectednessModel {
 public:
  ConnectednessModel() = default;
  explicit ConnectednessModel(std::vector<std::optional<ConnectednessGroup>> groups) : groups_(std::move(groups)) {}

  std::size_t group_count() const { return groups_.size(); }
  bool available(std::size_t g) const { return g < groups_.size() && groups_[g].has_value(); }
  const std::optional<ConnectednessGroup>& group(std::size_t g) const { return groups_.at(g); }

  // 1 iff some member of a valid cluster of group g lies within epsilon of x'. Never mutates the clusters.
  int fitness(std::span<const double> x, std::size_t g) const {
    if (!available(g)) return 0;
    const auto& grp = *groups_[g];
    for (auto i : grp.members)
      if (epsilon_linked(euclidean(x, grp.rows[i]), grp.clustering.epsilon)) return 1;
    return 0;
  }

 private:
  std::vector<std::optional<ConnectednessGroup>> groups_;
};

inline int o_connectedness(std::span<const double> x, const ConnectednessModel& model, std::size_t g) {
  return model.fitness(x, g);
}

struct SoundnessOptions {
  double proximity_threshold = 1.0;
  double epsilon_percentile = 90.0;
  std::shared_ptr<const Clusterer> clusterer;  // defaults to EpsilonGraphClusterer
};

struct SoundnessModels {
  ProximityModel proximity;
  ConnectednessModel connectedness;
};

// Target group of a prediction: the argmax class, or the response interval.
inline std::size_t prediction_group(std::span<const double> prediction, Task task, const ResponseRanges* ranges) {
  if (task == Task::classification)
    return static_cast<std::size_t>(std::max_element(prediction.begin(), prediction.end()) - prediction.begin());
  if (ranges == nullptr) throw ArgumentError("regression grouping needs response ranges");
  return ranges->interval_of(prediction.front());
}

inline SoundnessModels fit_soundness(const Dataset& train, const Predictor& f, const ResponseRanges* ranges,
                                     const SoundnessOptions& opts = {}) {
  const bool regression = train.task() == Task::regression;
  if (regression && ranges == nullptr) throw ArgumentError("fit_soundness: regression requires response ranges");
  const std::size_t groups = regression ? ranges->size() : train.schema.class_count();
  const auto preds = f.predict_batch(train.rows);

  std::vector<std::vector<std::size_t>> members(groups);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::size_t truth =
        regression ? ranges->interval_of(train.targets[i]) : static_cast<std::size_t>(train.targets[i]);
    const std::size_t predicted = prediction_group(preds[i], train.task(), ranges);
    if (truth == predicted) members[truth].push_back(i);
  }
  bool any = false;
  for (const auto& m : members) any = any || !m.empty();
  if (!any) throw FittingError("soundness: no correctly predicted training rows in any group");

  const std::shared_ptr<const Clusterer> clusterer =
      opts.clusterer ? opts.clusterer : std::make_shared<EpsilonGraphClusterer>(opts.epsilon_percentile);

  std::vector<std::optional<ProximityGroup>> prox(groups);
  std::vector<std::optional<ConnectednessGroup>> conn(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    if (members[g].size() < 2) continue;
    std::vector<Row> rows;
    for (auto i : members[g]) rows.push_back(train.rows[i]);
    auto clustering = clusterer->cluster(rows);
    prox[g] = make_proximity_group(members[g], rows);
    conn[g] = make_connectedness_group(members[g], std::move(rows), std::move(clustering));
  }
  return {ProximityModel(std::move(prox), opts.proximity_threshold), ConnectednessModel(std::move(conn))};
}

inline nlohmann::json to_json(const SoundnessModels& s) {
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t g = 0; g < s.proximity.group_count(); ++g) {
    if (!s.proximity.available(g)) {
      groups.push_back(nullptr);
      continue;
    }
    const auto& c = *s.connectedness.group(g);
    groups.push_back({{"rows", s.proximity.group(g)->source},
                      {"epsilon", c.clustering.epsilon},
                      {"labels", c.clustering.labels}});
  }
  return {{"proximity_threshold", s.proximity.threshold()}, {"groups", groups}};
}

inline SoundnessModels soundness_from_json(const nlohmann::json& doc, const Dataset& train) {
  std::vector<std::optional<ProximityGroup>> prox;
  std::vector<std::optional<ConnectednessGroup>> conn;
  for (const auto& g : doc.at("groups")) {
    if (g.is_null()) {
      prox.emplace_back();
      conn.emplace_back();
      continue;
    }
    const auto source = g.at("rows").get<std::vector<std::size_t>>();
    std::vector<Row> rows;
    for (auto i : source) {
      if (i >= train.size()) throw ParseError("soundness: reference row index out of range");
      rows.push_back(train.rows[i]);
    }
    Clustering cl{g.at("epsilon").get<double>(), g.at("labels").get<std::vector<int>>()};
    prox.emplace_back(make_proximity_group(source, rows));
    conn.emplace_back(make_connectedness_group(source, std::move(rows), std::move(cl)));
  }
  return {ProximityModel(std::move(prox), doc.at("proximity_threshold").get<double>()),
          ConnectednessModel(std::move(conn))};
}

}  // namespace care
