#pragma once

// HTTP facade over a fitted explainer.
//
//   GET  /schema      feature metadata and applicable constraint kinds
//   GET  /instances   ?split=test|train&offset=0&limit=20, rows with predictions
//   POST /explain     ExplainRequest -> ExplainResponse
//   GET  /health      {"status": "ok", "artifact_hash": ...}
//
// Rows on the wire are raw values keyed by feature name. Handlers are plain
// member functions returning (status, body) so they can be exercised without
// a socket; mount() binds them to an httplib server.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>

#include "care/actionability.hpp"
#include "care/error.hpp"
#include "care/explainer.hpp"
#include "httplib.h"
#include "json.hpp"

namespace care {

inline constexpr int kApiVersion = 1;
inline constexpr std::size_t kMaxCounterfactuals = 1000;
inline constexpr std::size_t kMaxPageSize = 1000;
inline constexpr int kExplainTimeoutSeconds = 120;

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct ServiceResponse {
  int status = 200;
  std::string body;
  double elapsed_ms = 0.0;
};

// A request field failed validation.
class RequestError : public Error {
 public:
  RequestError(const std::string& what, std::string field, int status = 400)
      : Error(what), field_(std::move(field)), status_(status) {}
  const std::string& field() const { return field_; }
  int status() const { return status_; }

 private:
  std::string field_;
  int status_;
};

struct ExplainRequest {
  Row x;
  std::optional<DesiredOutcome> desired;
  std::optional<Preference> preferences;
  std::optional<ModuleSet> modules;
  std::size_t n = 10;
  std::uint64_t seed = 0;
};

namespace detail {

inline RawValue parse_wire_value(const nlohmann::json& v, const FeatureMeta& f, const std::string& field) {
  if (f.numerical()) {
    if (!v.is_number()) throw RequestError("feature '" + f.name + "' expects a number", field);
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw RequestError("feature '" + f.name + "' must be finite", field);
    return d;
  }
  if (!v.is_string()) throw RequestError("feature '" + f.name + "' expects a category label", field);
  const auto label = v.get<std::string>();
  if (std::find(f.categories.begin(), f.categories.end(), label) == f.categories.end())
    throw RequestError("unknown category '" + label + "' for feature '" + f.name + "'", field);
  return label;
}

inline RawRow parse_wire_row(const nlohmann::json& row, const Schema& schema, const std::string& field) {
  if (!row.is_object()) throw RequestError("row must be an object keyed by feature name", field);
  for (const auto& [name, _] : row.items())
    if (!schema.index_of(name)) throw RequestError("unknown feature '" + name + "'", field + "." + name);
  RawRow raw;
  for (const auto& f : schema.features) {
    if (!row.contains(f.name)) throw RequestError("missing feature '" + f.name + "'", field + "." + f.name);
    raw.push_back(parse_wire_value(row.at(f.name), f, field + "." + f.name));
  }
  return raw;
}

inline nlohmann::json wire_row(const RawRow& raw, const Schema& schema) {
  nlohmann::json row = nlohmann::json::object();
  for (std::size_t j = 0; j < schema.size(); ++j) row[schema.features[j].name] = raw_value_to_json(raw[j]);
  return row;
}

inline std::uint64_t parse_unsigned(const nlohmann::json& v, const std::string& field) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned()))
    throw RequestError(field + " must be a non-negative integer", field);
  return v.get<std::uint64_t>();
}

inline std::size_t parse_query_size(const httplib::Request& req, const std::string& key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const auto text = req.get_param_value(key);
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    if (text.empty() || text[0] == '-') throw std::invalid_argument(key);
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size()) throw RequestError(key + " must be a non-negative integer", key);
  return static_cast<std::size_t>(v);
}

}  // namespace detail

class RecourseService {
 public:
  RecourseService(std::shared_ptr<const Explainer> explainer, std::string artifact_hash)
      : explainer_(std::move(explainer)), artifact_hash_(std::move(artifact_hash)) {
    if (!explainer_) throw ArgumentError("service needs an explainer");
  }

  const Explainer& explainer() const { return *explainer_; }

  ServiceResponse health() const {
    return {200, nlohmann::json{{"status", "ok"}, {"artifact_hash", artifact_hash_}, {"api_version", kApiVersion}}
                     .dump()};
  }

  ServiceResponse schema() const {
    const auto& s = explainer_->schema();
    nlohmann::json features = nlohmann::json::array();
    for (const auto& f : s.features) {
      nlohmann::json kinds = nlohmann::json::array();
      for (auto k : applicable_kinds(f.kind)) kinds.push_back(to_string(k));
      nlohmann::json e{{"name", f.name}, {"kind", to_string(f.kind)}, {"constraints", kinds}};
      if (f.numerical()) {
        e["min"] = f.min;
        e["max"] = f.max;
      } else {
        e["categories"] = f.categories;
      }
      features.push_back(std::move(e));
    }
    nlohmann::json doc{{"api_version", kApiVersion},
                       {"task", to_string(s.task)},
                       {"target", s.target},
                       {"features", features},
                       {"modules", explainer_->modules().list()},
                       {"defaults", {{"n", 10}, {"seed", 0}, {"importance", 1.0}}}};
    if (s.task == Task::classification) {
      doc["classes"] = s.classes;
      doc["defaults"]["threshold"] = explainer_->config().probability_threshold;
    } else if (explainer_->ranges()) {
      doc["ranges"] = to_json(*explainer_->ranges());
    }
    return {200, doc.dump()};
  }

  ServiceResponse instances(const std::string& split, std::size_t offset, std::size_t limit) const {
    return guarded([&] {
      const Dataset* ds = nullptr;
      if (split == "train")
        ds = &explainer_->train();
      else if (split == "test")
        ds = explainer_->test() ? &*explainer_->test() : nullptr;
      else
        throw RequestError("split must be 'test' or 'train'", "split");
      if (ds == nullptr) throw RequestError("split 'test' is not loaded", "split", 404);
      if (limit > kMaxPageSize) throw RequestError("limit exceeds " + std::to_string(kMaxPageSize), "limit");
      nlohmann::json rows = nlohmann::json::array();
      const std::size_t end = offset >= ds->size() ? offset : std::min(ds->size(), offset + limit);
      std::vector<Row> page;
      for (std::size_t i = offset; i < end; ++i) page.push_back(ds->rows[i]);
      std::vector<std::vector<double>> preds;
      if (!page.empty()) preds = explainer_->predictor().predict_batch(page);
      const auto& s = explainer_->schema();
      for (std::size_t k = 0; k < page.size(); ++k) {
        const std::size_t i = offset + k;
        nlohmann::json e{{"index", i}, {"values", detail::wire_row(ds->raw[i], s)}};
        if (s.task == Task::classification)
          e["target"] = s.classes.at(static_cast<std::size_t>(ds->targets[i]));
        else
          e["target"] = ds->targets[i];
        e["prediction"] = prediction_json(preds[k]);
        rows.push_back(std::move(e));
      }
      return ServiceResponse{200,
                             nlohmann::json{{"split", split},
                                            {"offset", offset},
                                            {"limit", limit},
                                            {"total", ds->size()},
                                            {"rows", rows}}
                                 .dump()};
    });
  }

  ExplainRequest parse_explain_request(const std::string& body) const {
    nlohmann::json doc;
    try {
      doc = care::detail::parse_json_strict(body, "");
    } catch (const ConfigError& e) {
      throw RequestError(e.what(), e.field());
    } catch (const nlohmann::json::exception& e) {
      throw RequestError(std::string("malformed JSON: ") + e.what(), "body");
    }
    if (!doc.is_object()) throw RequestError("request body must be an object", "body");
    for (const auto& [key, _] : doc.items())
      if (key != "instance" && key != "desired" && key != "preferences" && key != "modules" && key != "n" &&
          key != "seed")
        throw RequestError("unknown request field '" + key + "'", key);

    const auto& s = explainer_->schema();
    ExplainRequest req;
    if (!doc.contains("instance") || !doc["instance"].is_object())
      throw RequestError("request needs an 'instance' object", "instance");
    const auto& inst = doc["instance"];
    if (inst.contains("index") == inst.contains("row"))
      throw RequestError("instance needs exactly one of 'index' or 'row'", "instance");
    if (inst.contains("index")) {
      const auto split = inst.value("split", std::string("test"));
      const Dataset* ds = split == "train"  ? &explainer_->train()
                          : split == "test" ? (explainer_->test() ? &*explainer_->test() : nullptr)
                                            : nullptr;
      if (ds == nullptr) throw RequestError("unknown or unloaded split '" + split + "'", "instance.split");
      const auto i = detail::parse_unsigned(inst["index"], "instance.index");
      if (i >= ds->size()) throw RequestError("instance index out of range", "instance.index");
      req.x = ds->rows[i];
    } else {
      req.x = s.encode(detail::parse_wire_row(inst["row"], s, "instance.row"));
    }

    if (doc.contains("desired") && !doc["desired"].is_null()) {
      const auto& d = doc["desired"];
      if (!d.is_object()) throw RequestError("desired must be an object", "desired");
      if (s.task == Task::classification) {
        if (!d.contains("class") || !d["class"].is_string())
          throw RequestError("desired.class must be a class label", "desired.class");
        const auto label = d["class"].get<std::string>();
        if (std::find(s.classes.begin(), s.classes.end(), label) == s.classes.end())
          throw RequestError("unknown class '" + label + "'", "desired.class");
        double p = explainer_->config().probability_threshold;
        if (d.contains("threshold")) {
          if (!d["threshold"].is_number()) throw RequestError("threshold must be a number", "desired.threshold");
          p = d["threshold"].get<double>();
          if (!(p > 0.0 && p <= 1.0)) throw RequestError("threshold must lie in (0, 1]", "desired.threshold");
        }
        req.desired = DesiredOutcome::classification(s.class_index(label), p);
      } else {
        if (!d.contains("range") || !d["range"].is_array() || d["range"].size() != 2 || !d["range"][0].is_number() ||
            !d["range"][1].is_number())
          throw RequestError("desired.range must be [lb, ub]", "desired.range");
        const double lb = d["range"][0].get<double>(), ub = d["range"][1].get<double>();
        if (!(lb <= ub)) throw RequestError("desired.range needs lb <= ub", "desired.range");
        req.desired = DesiredOutcome::regression(lb, ub);
      }
    }

    if (doc.contains("preferences") && !doc["preferences"].is_null()) {
      try {
        req.preferences = parse_preferences(doc["preferences"], s);
      } catch (const ConfigError& e) {
        throw RequestError(e.what(), "preferences." + e.field(), e.infeasible() ? 422 : 400);
      }
    }

    if (doc.contains("modules") && !doc["modules"].is_null()) {
      const auto& m = doc["modules"];
      if (!m.is_array()) throw RequestError("modules must be a list of module ids", "modules");
      std::vector<int> ids;
      for (const auto& v : m) {
        if (!v.is_number_integer()) throw RequestError("modules must be integers", "modules");
        ids.push_back(v.get<int>());
      }
      try {
        req.modules = ModuleSet::from_list(ids);
      } catch (const ConfigError& e) {
        throw RequestError(e.what(), "modules");
      }
    }
    if (doc.contains("n")) {
      req.n = detail::parse_unsigned(doc["n"], "n");
      if (req.n < 1 || req.n > kMaxCounterfactuals)
        throw RequestError("n must lie in [1, " + std::to_string(kMaxCounterfactuals) + "]", "n");
    }
    if (doc.contains("seed")) req.seed = detail::parse_unsigned(doc["seed"], "seed");
    return req;
  }

  ServiceResponse explain(const std::string& body) const {
    const auto start = std::chrono::steady_clock::now();
    auto out = guarded([&] {
      const auto req = parse_explain_request(body);
      const ModuleSet modules = req.modules.value_or(explainer_->modules());
      if (!modules.subset_of(explainer_->modules()))
        throw RequestError("modules " + modules.str() + " are not fitted in this explainer", "modules", 422);
      if (modules.actionability && !req.preferences)
        throw RequestError("module 4 requires preferences", "preferences");
      const auto desired = req.desired ? *req.desired : desired_for(req.x);
      const Preference* prefs = req.preferences ? &*req.preferences : nullptr;
      const auto set = explainer_->explain(req.x, desired, prefs, {req.n, req.seed, modules});
      auto doc = to_json(set, explainer_->schema(), req.x);
      doc["config"] = {{"modules", modules.list()},
                       {"n", req.n},
                       {"seed", req.seed},
                       {"preferences", prefs ? to_json(*prefs, explainer_->schema()) : nlohmann::json(nullptr)}};
      return ServiceResponse{200, doc.dump()};
    });
    out.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

  void mount(httplib::Server& svr) const {
    svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    // SO_REUSEADDR only: the library default SO_REUSEPORT lets a second server
    // bind a port that is already serving.
    svr.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    svr.set_read_timeout(kExplainTimeoutSeconds, 0);
    svr.set_write_timeout(kExplainTimeoutSeconds, 0);
    auto reply = [](httplib::Response& res, const ServiceResponse& r) {
      res.status = r.status;
      res.set_content(r.body, "application/json");
      if (r.elapsed_ms > 0.0) res.set_header("X-Elapsed-Ms", std::to_string(r.elapsed_ms));
    };
    svr.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    svr.Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
    svr.Get("/schema", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, schema()); });
    svr.Get("/instances", [this, reply](const httplib::Request& req, httplib::Response& res) {
      ServiceResponse r;
      try {
        const auto split = req.has_param("split") ? req.get_param_value("split") : std::string("test");
        r = instances(split, detail::parse_query_size(req, "offset", 0), detail::parse_query_size(req, "limit", 20));
      } catch (const RequestError& e) {
        r = error_response(e.status(), e.field(), e.what());
      }
      reply(res, r);
    });
    svr.Post("/explain",
             [this, reply](const httplib::Request& req, httplib::Response& res) { reply(res, explain(req.body)); });
    svr.set_error_handler([reply](const httplib::Request& req, httplib::Response& res) {
      if (res.status == 404 && res.body.empty()) reply(res, error_response(404, "path", "no endpoint " + req.path));
    });
    svr.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      std::cerr << req.method << " " << req.path << " " << res.status << "\n";
    });
  }

 private:
  nlohmann::json prediction_json(const std::vector<double>& pred) const {
    const auto& s = explainer_->schema();
    if (s.task == Task::classification) {
      nlohmann::json probs = nlohmann::json::object();
      for (std::size_t c = 0; c < pred.size(); ++c) probs[s.classes.at(c)] = pred[c];
      return {{"class", s.classes.at(prediction_group(pred, Task::classification, nullptr))},
              {"probabilities", probs}};
    }
    nlohmann::json e{{"response", pred.front()}};
    if (explainer_->ranges()) {
      const auto k = explainer_->ranges()->interval_of(pred.front());
      e["interval"] = k;
      e["range"] = {explainer_->ranges()->intervals[k].first, explainer_->ranges()->intervals[k].second};
    }
    return e;
  }

  DesiredOutcome desired_for(const Row& x) const {
    try {
      return explainer_->desired_outcome_for(x);
    } catch (const ConfigError& e) {
      throw RequestError(e.what(), "desired");
    }
  }

  static ServiceResponse error_response(int status, const std::string& field, const std::string& message) {
    return {status, nlohmann::json{{"error", {{"field", field}, {"message", message}}}}.dump()};
  }

  template <typename F>
  ServiceResponse guarded(F&& f) const {
    try {
      return f();
    } catch (const RequestError& e) {
      return error_response(e.status(), e.field(), e.what());
    } catch (const ConfigError& e) {
      return error_response(e.infeasible() ? 422 : 400, e.field(), e.what());
    } catch (const InputError& e) {
      return error_response(400, "instance", e.what());
    } catch (const EncodingError& e) {
      return error_response(400, "instance", e.what());
    } catch (const std::exception& e) {
      const auto id = hex64(fnv1a64(e.what()) ^ (++failures_ * 0x9E3779B97F4A7C15ULL));
      std::cerr << "internal error " << id << ": " << e.what() << "\n";
      return {500, nlohmann::json{{"error", {{"id", id}, {"message", "internal error"}}}}.dump()};
    }
  }

  std::shared_ptr<const Explainer> explainer_;
  std::string artifact_hash_;
  mutable std::atomic<std::uint64_t> failures_{0};
};

}  // namespace care
