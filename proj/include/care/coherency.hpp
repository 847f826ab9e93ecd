#pragma once

// Feature-consistency models. During fitting every feature with correlated
// partners gets a predictive model from those partners (CART for categorical
// targets, ridge for numerical ones); models scoring below tau on a held-out
// split are dropped. The coherency cost of a counterfactual sums, over changed
// modeled features, score * delta(x'_j, model(x'[inputs])).

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "care/cart.hpp"
#include "care/error.hpp"
#include "care/ridge.hpp"
#include "care/stats.hpp"
#include "care/tabular.hpp"
#include "care/validity.hpp"
#include "json.hpp"

namespace care {

struct CoherencyConfig {
  double rho = 0.1;
  std::optional<double> tau;  // nullopt: median of all candidate scores
  double train_fraction = 0.8;
  std::size_t max_depth = 5;
  double lambda = 1.0;
};

struct CorrelationModel {
  std::size_t feature = 0;
  std::vector<std::size_t> inputs;
  std::variant<RidgeModel, CartModel> model;
  double score = 0.0;

  // Predicted encoded value of `feature` from the encoded row's input features.
  double predict(std::span<const double> row) const {
    std::vector<double> sub;
    sub.reserve(inputs.size());
    for (auto k : inputs) sub.push_back(row[k]);
    if (const auto* r = std::get_if<RidgeModel>(&model)) return r->predict(sub);
    return static_cast<double>(std::get<CartModel>(model).predict(sub));
  }
};

struct CoherencyModels {
  std::vector<CorrelationModel> models;
  std::vector<std::pair<std::size_t, double>> candidate_scores;  // (feature, validation score) before filtering
  double tau = 0.0;

  const CorrelationModel* find(std::size_t feature) const {
    for (const auto& m : models)
      if (m.feature == feature) return &m;
    return nullptr;
  }
};

// Support-weighted F1 over the classes present in the truth.
inline double weighted_f1(std::span<const std::size_t> truth, std::span<const std::size_t> predicted) {
  if (truth.empty()) return 0.0;
  std::size_t classes = 0;
  for (auto c : truth) classes = std::max(classes, c + 1);
  for (auto c : predicted) classes = std::max(classes, c + 1);
  std::vector<double> tp(classes, 0.0), fp(classes, 0.0), fn(classes, 0.0), support(classes, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    support[truth[i]] += 1.0;
    if (truth[i] == predicted[i]) {
      tp[truth[i]] += 1.0;
    } else {
      fp[predicted[i]] += 1.0;
      fn[truth[i]] += 1.0;
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (support[c] == 0.0) continue;
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    total += support[c] * (denom > 0.0 ? 2.0 * tp[c] / denom : 0.0);
  }
  return total / static_cast<double>(truth.size());
}

inline double r2_score(std::span<const double> truth, std::span<const double> predicted) {
  const double m = stats::mean(truth);
  double res = 0.0, tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    res += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
    tot += (truth[i] - m) * (truth[i] - m);
  }
  if (tot <= 0.0) return res <= 0.0 ? 1.0 : 0.0;
  return 1.0 - res / tot;
}

inline CoherencyModels fit_correlation_models(const Dataset& train, const CoherencyConfig& cfg, std::uint64_t seed) {
  if (cfg.rho < 0.0 || cfg.rho > 1.0) throw ConfigError("rho must lie in [0, 1]", "rho");
  if (cfg.tau && (*cfg.tau < 0.0 || *cfg.tau > 1.0)) throw ConfigError("tau must lie in [0, 1]", "tau");
  CoherencyModels out;
  if (train.size() < 4) return out;
  const auto corr = correlation_matrix(train);
  const std::size_t m = train.feature_count();

  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_fit = static_cast<std::size_t>(std::lround(cfg.train_fraction * static_cast<double>(idx.size())));
  n_fit = std::clamp<std::size_t>(n_fit, 2, idx.size() - 1);
  const std::span<const std::size_t> fit_idx(idx.data(), n_fit);
  const std::span<const std::size_t> val_idx(idx.data() + n_fit, idx.size() - n_fit);

  std::vector<CorrelationModel> candidates;
  for (std::size_t j = 0; j < m; ++j) {
    CorrelationModel cand;
    cand.feature = j;
    for (std::size_t k = 0; k < m; ++k)
      if (k != j && corr(j, k) > cfg.rho) cand.inputs.push_back(k);
    if (cand.inputs.empty()) continue;

    auto project = [&](std::span<const std::size_t> rows) {
      std::vector<std::vector<double>> x;
      x.reserve(rows.size());
      for (auto i : rows) {
        std::vector<double> r;
        for (auto k : cand.inputs) r.push_back(train.rows[i][k]);
        x.push_back(std::move(r));
      }
      return x;
    };
    const auto x_fit = project(fit_idx);
    const auto x_val = project(val_idx);
    const auto& meta = train.schema.features[j];
    if (meta.numerical()) {
      std::vector<double> y_fit, y_val, y_hat;
      for (auto i : fit_idx) y_fit.push_back(train.rows[i][j]);
      for (auto i : val_idx) y_val.push_back(train.rows[i][j]);
      auto model = train_ridge(x_fit, y_fit, cfg.lambda);
      for (const auto& r : x_val) y_hat.push_back(model.predict(r));
      cand.score = r2_score(y_val, y_hat);
      cand.model = std::move(model);
    } else {
      std::vector<std::size_t> y_fit, y_val, y_hat;
      for (auto i : fit_idx) y_fit.push_back(static_cast<std::size_t>(train.rows[i][j]));
      for (auto i : val_idx) y_val.push_back(static_cast<std::size_t>(train.rows[i][j]));
      auto model = train_cart(x_fit, y_fit, cfg.max_depth, meta.categories.size());
      for (const auto& r : x_val) y_hat.push_back(model.predict(r));
      cand.score = weighted_f1(y_val, y_hat);
      cand.model = std::move(model);
    }
    out.candidate_scores.emplace_back(j, cand.score);
    candidates.push_back(std::move(cand));
  }
  if (candidates.empty()) {
    out.tau = cfg.tau.value_or(0.0);
    return out;
  }
  if (cfg.tau) {
    out.tau = *cfg.tau;
  } else {
    std::vector<double> scores;
    for (const auto& c : candidates) scores.push_back(c.score);
    out.tau = std::clamp(stats::median(std::move(scores)), 0.0, 1.0);
  }
  for (auto& c : candidates)
    if (c.score >= out.tau) out.models.push_back(std::move(c));
  return out;
}

// Coherency cost of x' relative to x.
inline double coherency_cost(std::span<const double> x, std::span<const double> x_prime,
                             const CoherencyModels& models, const Schema& schema) {
  double xi = 0.0;
  for (auto j : changed_features(x, x_prime)) {
    const auto* mdl = models.find(j);
    if (mdl == nullptr) continue;
    const double predicted = mdl->predict(x_prime);
    xi += mdl->score * feature_delta_encoded(x_prime[j], predicted, schema.features[j]);
  }
  return xi;
}

inline nlohmann::json to_json(const CoherencyModels& c) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : c.models) {
    nlohmann::json e{{"feature", m.feature}, {"inputs", m.inputs}, {"score", m.score}};
    if (const auto* r = std::get_if<RidgeModel>(&m.model)) {
      e["type"] = "ridge";
      e["model"] = to_json(*r);
    } else {
      e["type"] = "cart";
      e["model"] = to_json(std::get<CartModel>(m.model));
    }
    models.push_back(std::move(e));
  }
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& [f, s] : c.candidate_scores) cands.push_back({{"feature", f}, {"score", s}});
  return {{"tau", c.tau}, {"models", models}, {"candidates", cands}};
}

inline CoherencyModels coherency_from_json(const nlohmann::json& doc) {
  CoherencyModels c;
  c.tau = doc.at("tau").get<double>();
  for (const auto& e : doc.at("models")) {
    CorrelationModel m;
    m.feature = e.at("feature").get<std::size_t>();
    m.inputs = e.at("inputs").get<std::vector<std::size_t>>();
    m.score = e.at("score").get<double>();
    if (e.at("type").get<std::string>() == "ridge")
      m.model = ridge_from_json(e.at("model"));
    else
      m.model = cart_from_json(e.at("model"));
    c.models.push_back(std::move(m));
  }
  for (const auto& e : doc.at("candidates"))
    c.candidate_scores.emplace_back(e.at("feature").get<std::size_t>(), e.at("score").get<double>());
  return c;
}

}  // namespace care
