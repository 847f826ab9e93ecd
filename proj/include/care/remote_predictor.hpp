#pragma once

// Predictor backed by an HTTP model server.
//
// Wire protocol (content type application/json):
//   POST <endpoint>/predict   {"task": "classification"|"regression", "rows": [[x11, x12, ...], ...]}
//   200                       {"predictions": [[p11, p12, ...], ...]}   classification
//                             {"predictions": [y1, y2, ...]}            regression
// Rows are encoded (standardized numerics, ordinal category codes) in schema order.

#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "care/error.hpp"
#include "care/predictor.hpp"
#include "httplib.h"
#include "json.hpp"

namespace care {

struct RemoteOptions {
  int retries = 2;              // extra attempts after a transient failure
  double timeout_seconds = 10.0;
  int backoff_ms = 50;
};

class RemotePredictor final : public Predictor {
 public:
  RemotePredictor(std::string endpoint, Task task, std::size_t class_count, InputSpec spec, RemoteOptions opts = {})
      : endpoint_(std::move(endpoint)), task_(task), classes_(class_count), spec_(std::move(spec)), opts_(opts) {
    while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
  }

  Task task() const override { return task_; }
  std::size_t class_count() const override { return classes_; }
  const InputSpec& input_spec() const override { return spec_; }
  std::string kind() const override { return "remote"; }
  const std::string& endpoint() const { return endpoint_; }

  nlohmann::json to_json() const override {
    return {{"kind", kind()},
            {"endpoint", endpoint_},
            {"task", to_string(task_)},
            {"class_count", classes_},
            {"retries", opts_.retries},
            {"timeout_seconds", opts_.timeout_seconds},
            {"categories", spec_.categories}};
  }

  std::vector<std::vector<double>> remote_predict(std::span<const Row> rows) const {
    if (rows.empty()) throw ArgumentError("remote_predict: empty batch");
    return predict_batch(rows);
  }

 protected:
  std::vector<std::vector<double>> predict_batch_unchecked(std::span<const Row> rows) const override {
    if (rows.empty()) throw ArgumentError("remote_predict: empty batch");
    const nlohmann::json req{{"task", to_string(task_)}, {"rows", rows}};
    const auto body = req.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= opts_.retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(opts_.backoff_ms * attempt));
      httplib::Client client(endpoint_);
      const auto secs = static_cast<time_t>(opts_.timeout_seconds);
      const auto usecs = static_cast<time_t>((opts_.timeout_seconds - static_cast<double>(secs)) * 1e6);
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      auto res = client.Post("/predict", body, "application/json");
      if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
          throw TimeoutError("remote predictor at " + endpoint_ + " timed out");
        }
        last_error = httplib::to_string(err);
        continue;
      }
      if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw RemotePredictorError("remote predictor returned HTTP " + std::to_string(res->status));
      return decode(res->body, rows.size());
    }
    throw RemotePredictorError("remote predictor at " + endpoint_ + " failed: " + last_error);
  }

 private:
  std::vector<std::vector<double>> decode(const std::string& body, std::size_t expected) const {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw RemotePredictorError(std::string("remote predictor: malformed response: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("predictions") || !doc["predictions"].is_array())
      throw RemotePredictorError("remote predictor: response lacks a 'predictions' array");
    const auto& preds = doc["predictions"];
    if (preds.size() != expected)
      throw RemotePredictorError("remote predictor: expected " + std::to_string(expected) + " predictions, got " +
                                 std::to_string(preds.size()));
    std::vector<std::vector<double>> out;
    out.reserve(expected);
    for (const auto& p : preds) {
      if (task_ == Task::regression) {
        if (!p.is_number()) throw RemotePredictorError("remote predictor: regression prediction must be a number");
        const double y = p.get<double>();
        if (!std::isfinite(y)) throw RemotePredictorError("remote predictor: non-finite prediction");
        out.push_back({y});
        continue;
      }
      if (!p.is_array() || p.size() != classes_)
        throw RemotePredictorError("remote predictor: probability vector of wrong length");
      std::vector<double> v;
      double sum = 0.0;
      for (const auto& e : p) {
        if (!e.is_number()) throw RemotePredictorError("remote predictor: probability must be a number");
        const double q = e.get<double>();
        if (!(q >= 0.0) || !std::isfinite(q)) throw RemotePredictorError("remote predictor: invalid probability");
        v.push_back(q);
        sum += q;
      }
      if (std::abs(sum - 1.0) > 1e-6) throw RemotePredictorError("remote predictor: probabilities do not sum to 1");
      out.push_back(std::move(v));
    }
    return out;
  }

  std::string endpoint_;
  Task task_;
  std::size_t classes_;
  InputSpec spec_;
  RemoteOptions opts_;
};

inline PredictorPtr predictor_from_json(const nlohmann::json& doc) {
  if (doc.at("kind").get<std::string>() == "remote") {
    RemoteOptions opts;
    opts.retries = doc.value("retries", opts.retries);
    opts.timeout_seconds = doc.value("timeout_seconds", opts.timeout_seconds);
    return std::make_shared<RemotePredictor>(doc.at("endpoint").get<std::string>(),
                                             parse_task(doc.at("task").get<std::string>()),
                                             doc.at("class_count").get<std::size_t>(), input_spec_from_json(doc), opts);
  }
  return reference_from_json(doc);
}

}  // namespace care
