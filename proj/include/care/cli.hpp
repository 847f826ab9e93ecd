#pragma once

// `care` command line: fit, explain, benchmark, serve.
//
// Exit codes: 0 success, 1 fitting/internal failure, 2 input/IO/configuration,
// 3 schema mismatch, 4 environment (port in use, remote predictor unreachable).

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "care/evaluation.hpp"
#include "care/explainer.hpp"
#include "care/remote_predictor.hpp"
#include "care/service.hpp"
#include "json.hpp"

namespace care::cli {

enum ExitCode { kOk = 0, kFailure = 1, kInput = 2, kSchema = 3, kEnvironment = 4 };

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline void require_file(const std::filesystem::path& path, const std::string& what) {
  if (!std::filesystem::is_regular_file(path)) throw IoError(what + " '" + path.string() + "' does not exist");
}

struct FitArgs {
  std::string data, meta, test, out = ".";
  double test_fraction = 0.2;
  std::string modules = "1,2,3,4";
  std::string predictor = "auto";
  std::string endpoint;
  int retries = 2;
  int timeout = 10;
  double p = 0.5, rho = 0.1, theta_prox = 1.0, epsilon_percentile = 90.0;
  std::string tau = "median";
  int quantiles = 4;
  std::size_t generations = 10;
  double pc = 0.6, pm = 0.3, eta_m = 20.0;
  std::uint64_t seed = 0;
};

struct ExplainArgs {
  std::string artifact, out = ".", split = "test", rows, prefs, modules;
  std::vector<std::size_t> indices;
  std::size_t n = 10;
  std::uint64_t seed = 0;
  std::string desired_class;
  std::vector<double> desired_range;
  std::optional<double> threshold;
  bool table = false;
};

struct BenchmarkArgs {
  std::string artifact, out = ".", prefs, groups;
  std::vector<std::string> configs{"1", "1,2", "1,2,3", "1,2,3,4"};
  std::size_t inputs = 50, n = 10;
  std::uint64_t seed = 0;
};

struct ServeArgs {
  std::string artifact, host = "127.0.0.1";
  int port = 8080;
};

inline std::string artifact_hash(const std::string& text) { return hex64(fnv1a64(text)); }

inline nlohmann::json fit_summary(const Explainer& e) {
  const auto& s = e.schema();
  nlohmann::json doc{{"modules", e.modules().list()},
                     {"predictor", e.predictor().kind()},
                     {"train_rows", e.train().size()},
                     {"test_rows", e.test() ? e.test()->size() : 0}};
  std::size_t correct = 0;
  double sse = 0.0;
  for (std::size_t i = 0; i < e.train().size(); ++i) {
    const auto& pred = e.train_predictions()[i];
    if (s.task == Task::classification)
      correct += prediction_group(pred, Task::classification, nullptr) == static_cast<std::size_t>(e.train().targets[i]);
    else
      sse += (pred.front() - e.train().targets[i]) * (pred.front() - e.train().targets[i]);
  }
  if (s.task == Task::classification)
    doc["train_accuracy"] = static_cast<double>(correct) / static_cast<double>(e.train().size());
  else
    doc["train_rmse"] = std::sqrt(sse / static_cast<double>(e.train().size()));
  if (e.soundness()) {
    nlohmann::json groups = nlohmann::json::array();
    const auto& sm = *e.soundness();
    for (std::size_t g = 0; g < sm.proximity.group_count(); ++g) {
      const std::string label = s.task == Task::classification ? s.classes.at(g) : "interval " + std::to_string(g);
      if (!sm.proximity.available(g)) {
        groups.push_back({{"group", label}, {"available", false}});
        continue;
      }
      const auto& c = *sm.connectedness.group(g);
      groups.push_back({{"group", label},
                        {"available", true},
                        {"reference_rows", c.rows.size()},
                        {"epsilon", c.clustering.epsilon},
                        {"clusters", c.cluster_count()},
                        {"clustered_rows", c.members.size()}});
    }
    doc["soundness"] = {{"proximity_threshold", sm.proximity.threshold()}, {"groups", groups}};
  }
  if (e.coherency()) {
    const auto& cm = *e.coherency();
    nlohmann::json candidates = nlohmann::json::array();
    for (const auto& [f, score] : cm.candidate_scores)
      candidates.push_back({{"feature", s.features[f].name}, {"score", score}, {"kept", cm.find(f) != nullptr}});
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : cm.models) {
      nlohmann::json inputs = nlohmann::json::array();
      for (auto k : m.inputs) inputs.push_back(s.features[k].name);
      models.push_back({{"feature", s.features[m.feature].name},
                        {"type", std::holds_alternative<RidgeModel>(m.model) ? "ridge" : "cart"},
                        {"inputs", inputs},
                        {"score", m.score}});
    }
    doc["coherency"] = {{"tau", cm.tau},
                        {"tau_rule", e.config().coherency.tau ? "fixed" : "median"},
                        {"candidates", candidates},
                        {"models", models}};
  }
  return doc;
}

inline int cmd_fit(const FitArgs& a, std::ostream& out) {
  require_file(a.meta, "metadata file");
  require_file(a.data, "data file");
  if (!a.test.empty()) require_file(a.test, "test file");
  auto meta = load_dataset_meta(a.meta);
  const auto full = parse_dataset(read_text_file(a.data), meta);
  Dataset train, test;
  if (a.test.empty()) {
    std::tie(train, test) = split(full, 1.0 - a.test_fraction, a.seed);
  } else {
    train = full;
    auto held_out = parse_dataset(read_text_file(a.test), full.meta);
    test = encode_with(train, std::move(held_out.raw), std::move(held_out.targets));
  }

  FitConfig cfg;
  cfg.modules = ModuleSet::parse(a.modules);
  cfg.probability_threshold = a.p;
  cfg.coherency.rho = a.rho;
  if (a.tau != "median") {
    try {
      std::size_t pos = 0;
      cfg.coherency.tau = std::stod(a.tau, &pos);
      if (pos != a.tau.size()) throw std::invalid_argument(a.tau);
    } catch (const std::exception&) {
      throw ConfigError("--tau must be 'median' or a number in [0, 1]", "tau");
    }
  }
  cfg.soundness.proximity_threshold = a.theta_prox;
  cfg.soundness.epsilon_percentile = a.epsilon_percentile;
  cfg.quantiles = a.quantiles;
  cfg.generations = a.generations;
  cfg.pc = a.pc;
  cfg.pm = a.pm;
  cfg.eta_m = a.eta_m;
  cfg.seed = a.seed;
  if (!(a.p > 0.0 && a.p <= 1.0)) throw ConfigError("--p must lie in (0, 1]", "p");
  if (!(a.pc >= 0.0 && a.pc <= 1.0)) throw ConfigError("--pc must lie in [0, 1]", "pc");
  if (!(a.pm >= 0.0 && a.pm <= 1.0)) throw ConfigError("--pm must lie in [0, 1]", "pm");
  if (!(a.theta_prox > 0.0)) throw ConfigError("--theta-prox must be positive", "theta-prox");
  if (!(a.epsilon_percentile > 0.0 && a.epsilon_percentile <= 100.0))
    throw ConfigError("--epsilon-percentile must lie in (0, 100]", "epsilon-percentile");
  if (a.quantiles < 2) throw ConfigError("--quantiles must be at least 2", "quantiles");

  PredictorPtr f;
  if (a.predictor == "remote") {
    if (a.endpoint.empty()) throw ConfigError("--predictor remote needs --endpoint", "endpoint");
    RemoteOptions ro;
    ro.retries = a.retries;
    ro.timeout_seconds = a.timeout;
    f = std::make_shared<RemotePredictor>(a.endpoint, train.task(), train.schema.class_count(),
                                          InputSpec::from(train.schema), ro);
  } else {
    const std::string kind =
        a.predictor != "auto" ? a.predictor : (train.task() == Task::regression ? "least-squares" : "bagged-stumps");
    f = train_reference(train, parse_reference_kind(kind), a.seed);
  }

  auto explainer = Explainer::fit(std::move(train), f, cfg);
  explainer.set_test(std::move(test));
  ensure_dir(a.out);
  const auto text = explainer.to_json().dump();
  write_file(std::filesystem::path(a.out) / "explainer.json", text);
  auto summary = fit_summary(explainer);
  summary["artifact_hash"] = artifact_hash(text);
  write_file(std::filesystem::path(a.out) / "fit_summary.json", summary.dump(2) + "\n");
  out << summary.dump(2) << "\n";
  return kOk;
}

inline std::pair<std::shared_ptr<const Explainer>, std::string> load_artifact(const std::string& path) {
  require_file(path, "artifact");
  const auto text = read_text_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatchError("artifact '" + path + "' is not valid JSON: " + e.what());
  }
  return {std::make_shared<const Explainer>(Explainer::from_json(doc)), artifact_hash(text)};
}

inline std::optional<Preference> load_preferences(const std::string& path, const Schema& schema) {
  if (path.empty()) return std::nullopt;
  require_file(path, "preference file");
  return parse_preferences_text(read_text_file(path), schema);
}

inline int cmd_explain(const ExplainArgs& a, std::ostream& out) {
  const auto [explainer, hash] = load_artifact(a.artifact);
  const auto& schema = explainer->schema();
  const auto prefs = load_preferences(a.prefs, schema);
  std::optional<ModuleSet> modules;
  if (!a.modules.empty()) modules = ModuleSet::parse(a.modules);

  std::vector<std::pair<std::string, Row>> inputs;  // (label, encoded row)
  if (!a.rows.empty()) {
    require_file(a.rows, "rows file");
    const auto table = parse_csv(read_text_file(a.rows), explainer->train().meta, false);
    for (std::size_t i = 0; i < table.rows.size(); ++i)
      inputs.emplace_back("rows:" + std::to_string(i), schema.encode(table.rows[i]));
  } else {
    const Dataset* ds = a.split == "train"  ? &explainer->train()
                        : a.split == "test" ? (explainer->test() ? &*explainer->test() : nullptr)
                                            : nullptr;
    if (ds == nullptr) throw ConfigError("unknown or unloaded split '" + a.split + "'", "split");
    const auto indices = a.indices.empty() ? std::vector<std::size_t>{0} : a.indices;
    for (auto i : indices) {
      if (i >= ds->size()) throw ConfigError("index " + std::to_string(i) + " out of range for split", "index");
      inputs.emplace_back(a.split + ":" + std::to_string(i), ds->rows[i]);
    }
  }

  std::optional<DesiredOutcome> desired;
  if (!a.desired_class.empty()) {
    if (schema.task != Task::classification) throw ConfigError("--desired-class needs a classification task", "desired");
    desired = DesiredOutcome::classification(schema.class_index(a.desired_class),
                                             a.threshold.value_or(explainer->config().probability_threshold));
  } else if (!a.desired_range.empty()) {
    if (schema.task != Task::regression || a.desired_range.size() != 2 || !(a.desired_range[0] <= a.desired_range[1]))
      throw ConfigError("--desired-range needs lb,ub with lb <= ub on a regression task", "desired");
    desired = DesiredOutcome::regression(a.desired_range[0], a.desired_range[1]);
  }

  nlohmann::json results = nlohmann::json::array();
  std::string tables;
  for (const auto& [label, x] : inputs) {
    auto d = desired;
    if (!d) d = explainer->desired_outcome_for(x);
    if (a.threshold && d->task == Task::classification) d->threshold = *a.threshold;
    const auto set = explainer->explain(x, *d, prefs ? &*prefs : nullptr, {a.n, a.seed, modules});
    auto entry = to_json(set, schema, x);
    entry["source"] = label;
    results.push_back(std::move(entry));
    if (a.table) tables += label + "\n" + render_counterfactual_table(set, schema, x) + "\n";
  }
  nlohmann::json report{{"format", "care-explanations"},
                        {"version", 1},
                        {"artifact_hash", hash},
                        {"n", a.n},
                        {"seed", a.seed},
                        {"preferences", prefs ? to_json(*prefs, schema) : nlohmann::json(nullptr)},
                        {"results", results}};
  ensure_dir(a.out);
  write_file(std::filesystem::path(a.out) / "explanations.json", report.dump(2) + "\n");
  if (a.table) {
    write_file(std::filesystem::path(a.out) / "explanations.txt", tables);
    out << tables;
  }
  out << "wrote " << results.size() << " explanation(s) to "
      << (std::filesystem::path(a.out) / "explanations.json").string() << "\n";
  return kOk;
}

inline int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out) {
  const auto [explainer, hash] = load_artifact(a.artifact);
  if (!explainer->test()) throw ConfigError("artifact carries no test split", "artifact");
  BenchmarkOptions opts;
  opts.configs.clear();
  for (const auto& c : a.configs) opts.configs.push_back(ModuleSet::parse(c));
  opts.n_inputs = a.inputs;
  opts.n = a.n;
  opts.seed = a.seed;
  opts.preferences = load_preferences(a.prefs, explainer->schema());
  if (!a.groups.empty()) {
    require_file(a.groups, "coherency group file");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_text_file(a.groups));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed group file: ") + e.what(), "groups");
    }
    opts.groups = parse_coherency_groups(doc, explainer->train());
  }
  for (const auto& c : opts.configs)
    if (!c.subset_of(explainer->modules()))
      throw ConfigError("configuration {" + c.str() + "} needs modules not fitted in the artifact", "configs");
  const auto report = run_benchmark(*explainer, *explainer->test(), opts);
  auto doc = to_json(report, explainer->schema(), *explainer->test());
  doc["artifact_hash"] = hash;
  ensure_dir(a.out);
  const std::filesystem::path dir(a.out);
  write_file(dir / "report.json", doc.dump(2) + "\n");
  const auto table = render_benchmark_table(report);
  write_file(dir / "report.txt", table);
  write_file(dir / "timing.json", timing_json(report).dump(2) + "\n");
  out << table;
  for (const auto& c : report.configs)
    out << "{" << c.modules.str() << "}: " << c.mean_seconds << " s per explanation\n";
  return kOk;
}

inline int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  const auto [explainer, hash] = load_artifact(a.artifact);
  RecourseService service(explainer, hash);

  // Block termination signals before the server spawns worker threads so that
  // only the sigwait below receives them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGINT);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  httplib::Server svr;
  service.mount(svr);
  int port = a.port;
  if (a.port == 0) {
    port = svr.bind_to_any_port(a.host);
    if (port < 0) {
      err << "error: cannot bind " << a.host << "\n";
      return kEnvironment;
    }
  } else if (!svr.bind_to_port(a.host, a.port)) {
    err << "error: cannot bind " << a.host << ":" << a.port << " (port in use?)\n";
    return kEnvironment;
  }
  out << "listening on http://" << a.host << ":" << port << std::endl;
  std::thread worker([&] { svr.listen_after_bind(); });
  int sig = 0;
  sigwait(&set, &sig);
  err << "received signal " << sig << ", shutting down\n";
  svr.stop();
  worker.join();
  return kOk;
}

// Runs the command line; diagnostics go to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"care: counterfactual explanations for tabular models"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "fit an explainer and write its artifact");
  fit->add_option("--data", fa.data, "training CSV (header row required)")->required();
  fit->add_option("--meta", fa.meta, "dataset metadata JSON")->required();
  fit->add_option("--test", fa.test, "separate test CSV; otherwise --data is split");
  fit->add_option("--test-fraction", fa.test_fraction, "held-out share when splitting --data")->capture_default_str();
  fit->add_option("--out", fa.out, "output directory")->capture_default_str();
  fit->add_option("--modules", fa.modules, "module list, e.g. 1,2,3,4")->capture_default_str();
  fit->add_option("--predictor", fa.predictor, "auto|nearest-centroid|bagged-stumps|least-squares|remote")
      ->capture_default_str();
  fit->add_option("--endpoint", fa.endpoint, "remote model server base URL");
  fit->add_option("--retries", fa.retries, "remote retries on transient failure")->capture_default_str();
  fit->add_option("--timeout", fa.timeout, "remote timeout in seconds")->capture_default_str();
  fit->add_option("--p", fa.p, "desired-class probability threshold")->capture_default_str();
  fit->add_option("--rho", fa.rho, "correlation threshold")->capture_default_str();
  fit->add_option("--tau", fa.tau, "model score threshold: median or a number")->capture_default_str();
  fit->add_option("--theta-prox", fa.theta_prox, "proximity inlier threshold")->capture_default_str();
  fit->add_option("--epsilon-percentile", fa.epsilon_percentile, "percentile of nearest-neighbour distances")
      ->capture_default_str();
  fit->add_option("--quantiles", fa.quantiles, "response intervals for regression")->capture_default_str();
  fit->add_option("--generations", fa.generations, "NSGA-III generations")->capture_default_str();
  fit->add_option("--pc", fa.pc, "crossover probability")->capture_default_str();
  fit->add_option("--pm", fa.pm, "mutation probability")->capture_default_str();
  fit->add_option("--eta", fa.eta_m, "polynomial mutation distribution index")->capture_default_str();
  fit->add_option("--seed", fa.seed, "random seed")->capture_default_str();

  ExplainArgs ea;
  std::vector<double> range;
  double threshold = -1.0;
  auto* explain = app.add_subcommand("explain", "explain instances with a fitted artifact");
  explain->add_option("--artifact", ea.artifact, "explainer artifact")->required();
  explain->add_option("--out", ea.out, "output directory")->capture_default_str();
  explain->add_option("--index", ea.indices, "row indices of --split")->delimiter(',');
  explain->add_option("--split", ea.split, "test|train")->capture_default_str();
  explain->add_option("--rows", ea.rows, "CSV of input rows instead of indices");
  explain->add_option("--prefs", ea.prefs, "preference JSON");
  explain->add_option("--modules", ea.modules, "active modules (default: fitted)");
  explain->add_option("--n", ea.n, "counterfactuals per input")->capture_default_str();
  explain->add_option("--seed", ea.seed, "random seed")->capture_default_str();
  explain->add_option("--desired-class", ea.desired_class, "target class label");
  explain->add_option("--desired-range", range, "target response range lb,ub")->delimiter(',');
  explain->add_option("--threshold", threshold, "probability threshold for the desired class");
  explain->add_flag("--table", ea.table, "also write an aligned diff table");

  BenchmarkArgs ba;
  auto* bench = app.add_subcommand("benchmark", "compare module configurations on the test split");
  bench->add_option("--artifact", ba.artifact, "explainer artifact")->required();
  bench->add_option("--out", ba.out, "output directory")->capture_default_str();
  bench->add_option("--configs", ba.configs, "configurations separated by ';'")->delimiter(';');
  bench->add_option("--inputs", ba.inputs, "test rows to explain")->capture_default_str();
  bench->add_option("--n", ba.n, "counterfactuals per input")->capture_default_str();
  bench->add_option("--seed", ba.seed, "random seed")->capture_default_str();
  bench->add_option("--prefs", ba.prefs, "preference JSON for module 4");
  bench->add_option("--groups", ba.groups, "coherency group JSON");

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "serve the recourse API");
  serve->add_option("--artifact", sa.artifact, "explainer artifact")->required();
  serve->add_option("--host", sa.host, "bind address")->capture_default_str();
  serve->add_option("--port", sa.port, "port (0 picks a free one)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  }

  try {
    if (*fit) return cmd_fit(fa, out);
    if (*explain) {
      ea.desired_range = range;
      if (threshold >= 0.0) ea.threshold = threshold;
      return cmd_explain(ea, out);
    }
    if (*bench) return cmd_benchmark(ba, out);
    if (*serve) return cmd_serve(sa, out, err);
  } catch (const SchemaMismatchError& e) {
    err << "error: schema mismatch: " << e.what() << "\n";
    return kSchema;
  } catch (const EncodingError& e) {
    err << "error: schema mismatch: " << e.what() << "\n";
    return kSchema;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const RemotePredictorError& e) {
    err << "error: " << e.what() << "\n";
    return kEnvironment;
  } catch (const FittingError& e) {
    err << "error: fitting failed: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace care::cli
