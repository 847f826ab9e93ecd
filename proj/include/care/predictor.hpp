#pragma once

// Black-box prediction interface plus native reference models.
//
// Every predictor consumes encoded rows. Batch prediction is the primitive;
// single-row calls are thin wrappers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "care/cart.hpp"
#include "care/error.hpp"
#include "care/ridge.hpp"
#include "care/tabular.hpp"
#include "json.hpp"

namespace care {

// Arity and per-feature category counts (0 for numerical) used to validate inputs.
struct InputSpec {
  std::vector<std::size_t> categories;

  static InputSpec from(const Schema& s) {
    InputSpec spec;
    for (const auto& f : s.features) spec.categories.push_back(f.numerical() ? 0 : f.categories.size());
    return spec;
  }

  void validate(std::span<const double> x) const {
    if (x.size() != categories.size())
      throw InputError("predictor: expected " + std::to_string(categories.size()) + " values, got " +
                       std::to_string(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!std::isfinite(x[j])) throw InputError("predictor: non-finite input at " + std::to_string(j));
      if (categories[j] > 0 &&
          (x[j] != std::floor(x[j]) || x[j] < 0.0 || x[j] >= static_cast<double>(categories[j])))
        throw InputError("predictor: invalid category code at " + std::to_string(j));
    }
  }
};

class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual Task task() const = 0;
  // Number of classes; 0 for regression.
  virtual std::size_t class_count() const = 0;
  virtual const InputSpec& input_spec() const = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json to_json() const = 0;

  // Classification: one probability vector per row. Regression: one single-element vector per row.
  std::vector<std::vector<double>> predict_batch(std::span<const Row> rows) const {
    for (const auto& r : rows) input_spec().validate(r);
    return predict_batch_unchecked(rows);
  }

  std::vector<double> predict_proba(std::span<const double> x) const {
    if (task() != Task::classification) throw ArgumentError("predict_proba on a regression predictor");
    const Row r(x.begin(), x.end());
    return predict_batch(std::span<const Row>(&r, 1)).front();
  }

  double predict(std::span<const double> x) const {
    if (task() != Task::regression) throw ArgumentError("predict on a classification predictor");
    const Row r(x.begin(), x.end());
    return predict_batch(std::span<const Row>(&r, 1)).front().front();
  }

  // Predicted class (classification) or response (regression) per row.
  std::vector<double> predict_labels(std::span<const Row> rows) const {
    const auto out = predict_batch(rows);
    std::vector<double> labels;
    labels.reserve(out.size());
    for (const auto& p : out) {
      if (task() == Task::regression)
        labels.push_back(p.front());
      else
        labels.push_back(static_cast<double>(std::max_element(p.begin(), p.end()) - p.begin()));
    }
    return labels;
  }

 protected:
  virtual std::vector<std::vector<double>> predict_batch_unchecked(std::span<const Row> rows) const = 0;
};

using PredictorPtr = std::shared_ptr<const Predictor>;

// Softmax over negative squared Euclidean distances to per-class centroids.
class NearestCentroidClassifier final : public Predictor {
 public:
  NearestCentroidClassifier(std::vector<Row> centroids, InputSpec spec)
      : centroids_(std::move(centroids)), spec_(std::move(spec)) {}

  static NearestCentroidClassifier train(std::span<const Row> rows, std::span<const double> labels,
                                         std::size_t class_count, InputSpec spec) {
    if (rows.empty()) throw FittingError("nearest-centroid: empty training set");
    const std::size_t m = rows.front().size();
    std::vector<Row> sums(class_count, Row(m, 0.0));
    std::vector<double> counts(class_count, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      for (std::size_t j = 0; j < m; ++j) sums[c][j] += rows[i][j];
      counts[c] += 1.0;
    }
    for (std::size_t c = 0; c < class_count; ++c) {
      if (counts[c] == 0.0) throw FittingError("nearest-centroid: class without training rows");
      for (auto& v : sums[c]) v /= counts[c];
    }
    return NearestCentroidClassifier(std::move(sums), std::move(spec));
  }

  Task task() const override { return Task::classification; }
  std::size_t class_count() const override { return centroids_.size(); }
  const InputSpec& input_spec() const override { return spec_; }
  std::string kind() const override { return "nearest-centroid"; }
  const std::vector<Row>& centroids() const { return centroids_; }

  nlohmann::json to_json() const override {
    return {{"kind", kind()}, {"centroids", centroids_}, {"categories", spec_.categories}};
  }

 protected:
  std::vector<std::vector<double>> predict_batch_unchecked(std::span<const Row> rows) const override {
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& x : rows) {
      std::vector<double> d2(centroids_.size(), 0.0);
      for (std::size_t c = 0; c < centroids_.size(); ++c)
        for (std::size_t j = 0; j < x.size(); ++j) d2[c] += (x[j] - centroids_[c][j]) * (x[j] - centroids_[c][j]);
      const double best = *std::min_element(d2.begin(), d2.end());
      double z = 0.0;
      for (auto& v : d2) {
        v = std::exp(best - v);
        z += v;
      }
      for (auto& v : d2) v /= z;
      out.push_back(std::move(d2));
    }
    return out;
  }

 private:
  std::vector<Row> centroids_;
  InputSpec spec_;
};

// Bootstrap-aggregated depth-limited CART trees; probabilities are the mean leaf distributions.
class BaggedStumpEnsemble final : public Predictor {
 public:
  BaggedStumpEnsemble(std::vector<CartModel> trees, std::size_t class_count, InputSpec spec)
      : trees_(std::move(trees)), classes_(class_count), spec_(std::move(spec)) {}

  static BaggedStumpEnsemble train(std::span<const Row> rows, std::span<const double> labels,
                                   std::size_t class_count, InputSpec spec, std::uint64_t seed,
                                   std::size_t n_trees = 25, std::size_t max_depth = 4) {
    if (rows.empty()) throw FittingError("bagged ensemble: empty training set");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    std::vector<CartModel> trees;
    for (std::size_t t = 0; t < n_trees; ++t) {
      std::vector<Row> x;
      std::vector<std::size_t> y;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto k = pick(rng);
        x.push_back(rows[k]);
        y.push_back(static_cast<std::size_t>(labels[k]));
      }
      trees.push_back(train_cart(x, y, max_depth, class_count));
    }
    return BaggedStumpEnsemble(std::move(trees), class_count, std::move(spec));
  }

  Task task() const override { return Task::classification; }
  std::size_t class_count() const override { return classes_; }
  const InputSpec& input_spec() const override { return spec_; }
  std::string kind() const override { return "bagged-stumps"; }

  nlohmann::json to_json() const override {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(care::to_json(t));
    return {{"kind", kind()}, {"class_count", classes_}, {"trees", trees}, {"categories", spec_.categories}};
  }

 protected:
  std::vector<std::vector<double>> predict_batch_unchecked(std::span<const Row> rows) const override {
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& x : rows) {
      std::vector<double> p(classes_, 0.0);
      for (const auto& t : trees_) {
        const auto d = t.predict_distribution(x);
        for (std::size_t c = 0; c < classes_; ++c) p[c] += d[c];
      }
      for (auto& v : p) v /= static_cast<double>(trees_.size());
      out.push_back(std::move(p));
    }
    return out;
  }

 private:
  std::vector<CartModel> trees_;
  std::size_t classes_;
  InputSpec spec_;
};

class LeastSquaresRegressor final : public Predictor {
 public:
  LeastSquaresRegressor(RidgeModel model, InputSpec spec) : model_(std::move(model)), spec_(std::move(spec)) {}

  static LeastSquaresRegressor train(std::span<const Row> rows, std::span<const double> targets, InputSpec spec) {
    if (rows.empty()) throw FittingError("least-squares: empty training set");
    const std::vector<Row> x(rows.begin(), rows.end());
    // A vanishing penalty keeps collinear fixtures solvable without visibly biasing the fit.
    return LeastSquaresRegressor(train_ridge(x, targets, 1e-9), std::move(spec));
  }

  Task task() const override { return Task::regression; }
  std::size_t class_count() const override { return 0; }
  const InputSpec& input_spec() const override { return spec_; }
  std::string kind() const override { return "least-squares"; }
  const RidgeModel& model() const { return model_; }

  nlohmann::json to_json() const override {
    return {{"kind", kind()}, {"model", care::to_json(model_)}, {"categories", spec_.categories}};
  }

 protected:
  std::vector<std::vector<double>> predict_batch_unchecked(std::span<const Row> rows) const override {
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& x : rows) out.push_back({model_.predict(x)});
    return out;
  }

 private:
  RidgeModel model_;
  InputSpec spec_;
};

enum class ReferenceKind { nearest_centroid, bagged_stumps, least_squares };

inline ReferenceKind parse_reference_kind(const std::string& s) {
  if (s == "nearest-centroid") return ReferenceKind::nearest_centroid;
  if (s == "bagged-stumps") return ReferenceKind::bagged_stumps;
  if (s == "least-squares") return ReferenceKind::least_squares;
  throw ConfigError("unknown reference predictor '" + s + "'", "predictor");
}

inline PredictorPtr train_reference(const Dataset& ds, ReferenceKind kind, std::uint64_t seed) {
  if (ds.size() == 0) throw FittingError("cannot train a predictor on an empty dataset");
  const bool regression = kind == ReferenceKind::least_squares;
  if (regression != (ds.task() == Task::regression))
    throw ConfigError("reference predictor kind does not match the dataset task", "predictor");
  auto spec = InputSpec::from(ds.schema);
  switch (kind) {
    case ReferenceKind::nearest_centroid:
      return std::make_shared<NearestCentroidClassifier>(
          NearestCentroidClassifier::train(ds.rows, ds.targets, ds.schema.class_count(), std::move(spec)));
    case ReferenceKind::bagged_stumps:
      return std::make_shared<BaggedStumpEnsemble>(
          BaggedStumpEnsemble::train(ds.rows, ds.targets, ds.schema.class_count(), std::move(spec), seed));
    case ReferenceKind::least_squares:
      return std::make_shared<LeastSquaresRegressor>(
          LeastSquaresRegressor::train(ds.rows, ds.targets, std::move(spec)));
  }
  throw ConfigError("unknown reference predictor");
}

inline InputSpec input_spec_from_json(const nlohmann::json& doc) {
  InputSpec spec;
  spec.categories = doc.at("categories").get<std::vector<std::size_t>>();
  return spec;
}

// Rebuilds a native reference predictor. Remote predictors are handled by remote_predictor.hpp.
inline PredictorPtr reference_from_json(const nlohmann::json& doc) {
  const auto kind = doc.at("kind").get<std::string>();
  auto spec = input_spec_from_json(doc);
  if (kind == "nearest-centroid")
    return std::make_shared<NearestCentroidClassifier>(doc.at("centroids").get<std::vector<Row>>(), std::move(spec));
  if (kind == "bagged-stumps") {
    std::vector<CartModel> trees;
    for (const auto& t : doc.at("trees")) trees.push_back(cart_from_json(t));
    return std::make_shared<BaggedStumpEnsemble>(std::move(trees), doc.at("class_count").get<std::size_t>(),
                                                 std::move(spec));
  }
  if (kind == "least-squares")
    return std::make_shared<LeastSquaresRegressor>(ridge_from_json(doc.at("model")), std::move(spec));
  throw ParseError("unknown predictor kind '" + kind + "'");
}

}  // namespace care
