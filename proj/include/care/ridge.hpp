#pragma once

// Closed-form ridge regression with an unpenalized intercept.

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "care/error.hpp"
#include "json.hpp"

namespace care {

struct RidgeModel {
  std::vector<double> weights;
  double intercept = 0.0;

  double predict(std::span<const double> x) const {
    double y = intercept;
    for (std::size_t k = 0; k < weights.size(); ++k) y += weights[k] * x[k];
    return y;
  }
};

// Minimizes sum (y - b - w.x)^2 + lambda |w|^2 by centering and solving the normal equations.
inline RidgeModel train_ridge(const std::vector<std::vector<double>>& inputs, std::span<const double> target,
                              double lambda) {
  if (inputs.size() < 2) throw FittingError("ridge: need at least two rows");
  if (inputs.size() != target.size()) throw ArgumentError("ridge: row and target counts differ");
  if (lambda < 0.0) throw ArgumentError("ridge: negative penalty");
  const auto n = static_cast<Eigen::Index>(inputs.size());
  const auto k = static_cast<Eigen::Index>(inputs.front().size());
  Eigen::MatrixXd x(n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(inputs[i].size()) != k) throw ArgumentError("ridge: ragged input rows");
    for (Eigen::Index c = 0; c < k; ++c) x(i, c) = inputs[i][c];
    y(i) = target[i];
  }
  const Eigen::RowVectorXd xm = x.colwise().mean();
  const double ym = y.mean();
  x.rowwise() -= xm;
  y.array() -= ym;

  RidgeModel model;
  if (k > 0) {
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    const double scale = std::max(1.0, gram.diagonal().maxCoeff());
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13 || gram.diagonal().minCoeff() <= 1e-12 * scale)
      throw FittingError("ridge: singular normal equations (use a positive penalty)");
    const Eigen::VectorXd w = llt.solve(x.transpose() * y);
    model.weights.assign(w.data(), w.data() + w.size());
  }
  model.intercept = ym;
  for (Eigen::Index c = 0; c < k; ++c) model.intercept -= model.weights[static_cast<std::size_t>(c)] * xm(c);
  return model;
}

inline nlohmann::json to_json(const RidgeModel& m) { return {{"weights", m.weights}, {"intercept", m.intercept}}; }

inline RidgeModel ridge_from_json(const nlohmann::json& doc) {
  RidgeModel m;
  m.weights = doc.at("weights").get<std::vector<double>>();
  m.intercept = doc.at("intercept").get<double>();
  return m;
}

}  // namespace care
