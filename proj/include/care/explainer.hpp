#pragma once

// Fitting and explaining phases.
//
// Fitting builds the sub-models required by the active modules (soundness
// models for module 2, correlation models for module 3). Explaining assembles
// the active objective vector, evolves a population with NSGA-III and picks up
// to N counterfactuals from the final population.
//
// Objective order (all slots minimized; fitness values enter negated):
//   module 1: outcome, distance, sparsity
//   module 2: -proximity, -connectedness
//   module 3: coherency
//   module 4: actionability

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "care/actionability.hpp"
#include "care/coherency.hpp"
#include "care/error.hpp"
#include "care/nsga3.hpp"
#include "care/predictor.hpp"
#include "care/remote_predictor.hpp"
#include "care/soundness.hpp"
#include "care/tabular.hpp"
#include "care/validity.hpp"
#include "json.hpp"

namespace care {

inline constexpr int kArtifactVersion = 1;

struct ModuleSet {
  bool soundness = false;
  bool coherency = false;
  bool actionability = false;

  static ModuleSet all() { return {true, true, true}; }

  // "1,2,3,4" style lists; module 1 is mandatory.
  static ModuleSet parse(const std::string& text) {
    ModuleSet s;
    bool validity = false;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
                 item.end());
      if (item.empty()) continue;
      if (item == "1")
        validity = true;
      else if (item == "2")
        s.soundness = true;
      else if (item == "3")
        s.coherency = true;
      else if (item == "4")
        s.actionability = true;
      else
        throw ConfigError("unknown module '" + item + "'", "modules");
    }
    if (!validity) throw ConfigError("module 1 (validity) must always be active", "modules");
    return s;
  }

  static ModuleSet from_list(const std::vector<int>& ids) {
    std::string text;
    for (int id : ids) text += std::to_string(id) + ",";
    return parse(text);
  }

  std::vector<int> list() const {
    std::vector<int> out{1};
    if (soundness) out.push_back(2);
    if (coherency) out.push_back(3);
    if (actionability) out.push_back(4);
    return out;
  }

  std::string str() const {
    std::string s;
    for (int id : list()) s += (s.empty() ? "" : ",") + std::to_string(id);
    return s;
  }

  std::size_t objective_count() const {
    return 3 + (soundness ? 2 : 0) + (coherency ? 1 : 0) + (actionability ? 1 : 0);
  }

  bool subset_of(const ModuleSet& o) const {
    return (!soundness || o.soundness) && (!coherency || o.coherency) && (!actionability || o.actionability);
  }

  bool operator==(const ModuleSet&) const = default;
};

inline const std::array<const char*, 7> kObjectiveNames = {
    "outcome", "distance", "sparsity", "proximity", "connectedness", "coherency", "actionability"};

// All seven objectives in their natural orientation. Soundness and coherency
// values are absent when the corresponding sub-models were not fitted.
struct ObjectiveBreakdown {
  double outcome = 0.0;
  double distance = 0.0;
  double sparsity = 0.0;
  std::optional<double> proximity;
  std::optional<double> connectedness;
  std::optional<double> coherency;
  double actionability = 0.0;

  std::array<std::optional<double>, 7> values() const {
    return {outcome, distance, sparsity, proximity, connectedness, coherency, actionability};
  }

  moo::Objectives minimization(const ModuleSet& m) const {
    moo::Objectives v{outcome, distance, sparsity};
    if (m.soundness) {
      v.push_back(-proximity.value_or(0.0));
      v.push_back(-connectedness.value_or(0.0));
    }
    if (m.coherency) v.push_back(coherency.value_or(0.0));
    if (m.actionability) v.push_back(actionability);
    return v;
  }
};

inline nlohmann::json to_json(const ObjectiveBreakdown& b) {
  nlohmann::json doc = nlohmann::json::object();
  const auto vals = b.values();
  for (std::size_t k = 0; k < vals.size(); ++k)
    doc[kObjectiveNames[k]] = vals[k] ? nlohmann::json(*vals[k]) : nlohmann::json(nullptr);
  return doc;
}

struct Counterfactual {
  Row encoded;
  RawRow raw;
  std::vector<std::size_t> changed;
  ObjectiveBreakdown breakdown;
  std::vector<double> prediction;
  std::size_t front = 0;
};

struct CounterfactualSet {
  std::vector<Counterfactual> items;
  DesiredOutcome desired;
  ModuleSet modules;
  std::uint64_t seed = 0;
  bool valid = true;  // false: best-effort set, no counterfactual reached the desired outcome
};

struct ExplainOptions {
  std::size_t n = 10;
  std::uint64_t seed = 0;
  std::optional<ModuleSet> modules;  // defaults to the fitted modules
};

struct FitConfig {
  ModuleSet modules = ModuleSet::all();
  SoundnessOptions soundness;
  CoherencyConfig coherency;
  int quantiles = 4;
  double probability_threshold = 0.5;
  std::size_t generations = 10;
  double pc = 0.6;
  double pm = 0.3;
  double eta_m = 20.0;
  std::uint64_t seed = 0;
};

class Explainer {
 public:
  static Explainer fit(Dataset train, PredictorPtr predictor, const FitConfig& cfg) {
    if (!predictor) throw ArgumentError("fit: no predictor");
    if (predictor->task() != train.task()) throw ConfigError("predictor task does not match the dataset", "predictor");
    if (predictor->input_spec().categories.size() != train.feature_count())
      throw SchemaMismatchError("predictor arity does not match the dataset");
    Explainer e;
    e.cfg_ = cfg;
    e.train_ = std::make_shared<const Dataset>(std::move(train));
    e.predictor_ = std::move(predictor);
    e.train_predictions_ = e.predictor_->predict_batch(e.train_->rows);
    if (e.train_->task() == Task::regression) e.ranges_ = response_ranges(e.train_->targets, cfg.quantiles);
    try {
      if (cfg.modules.soundness)
        e.soundness_ = fit_soundness(*e.train_, *e.predictor_, e.ranges_ ? &*e.ranges_ : nullptr, cfg.soundness);
    } catch (const FittingError& ex) {
      throw FittingError(std::string("module 2 (soundness): ") + ex.what());
    }
    try {
      if (cfg.modules.coherency) e.coherency_ = fit_correlation_models(*e.train_, cfg.coherency, cfg.seed);
    } catch (const FittingError& ex) {
      throw FittingError(std::string("module 3 (coherency): ") + ex.what());
    }
    return e;
  }

  const Dataset& train() const { return *train_; }
  const Schema& schema() const { return train_->schema; }
  const Predictor& predictor() const { return *predictor_; }
  PredictorPtr predictor_ptr() const { return predictor_; }
  const FitConfig& config() const { return cfg_; }
  ModuleSet modules() const { return cfg_.modules; }
  const std::optional<SoundnessModels>& soundness() const { return soundness_; }
  const std::optional<CoherencyModels>& coherency() const { return coherency_; }
  const std::optional<ResponseRanges>& ranges() const { return ranges_; }
  const std::vector<std::vector<double>>& train_predictions() const { return train_predictions_; }

  const std::optional<Dataset>& test() const { return test_; }
  void set_test(Dataset test) {
    if (test.schema.size() != schema().size()) throw SchemaMismatchError("test split schema differs");
    test_ = std::move(test);
  }

  DesiredOutcome desired_outcome_for(std::span<const double> x) const {
    const Row r(x.begin(), x.end());
    const auto pred = predictor_->predict_batch(std::span<const Row>(&r, 1)).front();
    if (train_->task() == Task::classification) {
      if (predictor_->class_count() != 2)
        throw ConfigError("multiclass explanations need an explicit desired class", "desired");
      const std::size_t current = prediction_group(pred, Task::classification, nullptr);
      return DesiredOutcome::classification(1 - current, cfg_.probability_threshold);
    }
    const auto& rr = *ranges_;
    const std::size_t at = rr.interval_of(pred.front());
    const std::size_t target = at + 1 < rr.size() ? at + 1 : at - 1;
    return DesiredOutcome::regression(rr.intervals[target].first, rr.intervals[target].second);
  }

  std::vector<ObjectiveBreakdown> evaluate_batch(std::span<const double> x, std::span<const Row> candidates,
                                                 const DesiredOutcome& desired, const Preference* prefs,
                                                 std::vector<std::vector<double>>* predictions = nullptr) const {
    auto preds = predictor_->predict_batch(candidates);
    std::vector<ObjectiveBreakdown> out;
    out.reserve(candidates.size());
    const auto& feats = schema().features;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto& xp = candidates[i];
      ObjectiveBreakdown b;
      b.outcome = outcome_cost(preds[i], desired);
      b.distance = gower_distance(x, xp, feats);
      b.sparsity = static_cast<double>(sparsity_cost(x, xp));
      if (soundness_) {
        const auto g = prediction_group(preds[i], train_->task(), ranges_ ? &*ranges_ : nullptr);
        b.proximity = soundness_->proximity.fitness(xp, g);
        b.connectedness = soundness_->connectedness.fitness(xp, g);
      }
      if (coherency_) b.coherency = coherency_cost(x, xp, *coherency_, schema());
      if (prefs) b.actionability = actionability_cost(x, xp, *prefs, schema());
      out.push_back(b);
    }
    if (predictions) *predictions = std::move(preds);
    return out;
  }

  ObjectiveBreakdown evaluate(std::span<const double> x, std::span<const double> x_prime,
                              const DesiredOutcome& desired, const Preference* prefs) const {
    const Row r(x_prime.begin(), x_prime.end());
    return evaluate_batch(x, std::span<const Row>(&r, 1), desired, prefs).front();
  }

  // Gene bounds: the training range widened to include the input's own value.
  std::vector<moo::GeneSpec> gene_specs(std::span<const double> x) const {
    std::vector<moo::GeneSpec> genes;
    for (std::size_t j = 0; j < schema().size(); ++j) {
      const auto& f = schema().features[j];
      if (f.numerical())
        genes.push_back({std::min(f.encoded_lower(), x[j]), std::max(f.encoded_upper(), x[j]), 0});
      else
        genes.push_back({0.0, static_cast<double>(f.categories.size()) - 1.0, f.categories.size()});
    }
    return genes;
  }

  // One copy of x, 30% nearest training rows predicted into the desired outcome,
  // 30% random training rows, the rest uniform random genotypes.
  std::vector<moo::Genotype> initialize_population(std::span<const double> x, const DesiredOutcome& desired,
                                                   std::size_t pop_size, std::uint64_t seed) const {
    if (pop_size == 0) throw ArgumentError("population size must be positive");
    std::mt19937_64 rng(seed ^ 0x5DEECE66DULL);
    const auto genes = gene_specs(x);
    std::vector<moo::Genotype> pop;
    pop.emplace_back(x.begin(), x.end());

    const auto n_near = static_cast<std::size_t>(0.3 * static_cast<double>(pop_size));
    const auto n_rand = n_near;
    std::vector<std::pair<double, std::size_t>> desired_rows;
    for (std::size_t i = 0; i < train_->size(); ++i)
      if (outcome_cost(train_predictions_[i], desired) == 0.0)
        desired_rows.emplace_back(euclidean(x, train_->rows[i]), i);
    std::sort(desired_rows.begin(), desired_rows.end());
    for (std::size_t k = 0; k < n_near && k < desired_rows.size() && pop.size() < pop_size; ++k)
      pop.push_back(train_->rows[desired_rows[k].second]);

    std::uniform_int_distribution<std::size_t> pick(0, train_->size() - 1);
    for (std::size_t k = 0; k < n_rand && pop.size() < pop_size; ++k) pop.push_back(train_->rows[pick(rng)]);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (pop.size() < pop_size) {
      moo::Genotype g(genes.size());
      for (std::size_t j = 0; j < genes.size(); ++j) {
        if (genes[j].categorical())
          g[j] = static_cast<double>(std::uniform_int_distribution<std::size_t>(0, genes[j].categories - 1)(rng));
        else
          g[j] = genes[j].lower + unit(rng) * (genes[j].upper - genes[j].lower);
      }
      pop.push_back(std::move(g));
    }
    // Training rows may fall outside bounds widened only for x; keep every genotype valid.
    for (auto& g : pop)
      for (std::size_t j = 0; j < genes.size(); ++j)
        if (!genes[j].categorical()) g[j] = std::clamp(g[j], genes[j].lower, genes[j].upper);
    return pop;
  }

  CounterfactualSet explain(std::span<const double> x, const DesiredOutcome& desired, const Preference* prefs,
                            const ExplainOptions& opts) const {
    schema().validate(x);
    const ModuleSet modules = opts.modules.value_or(cfg_.modules);
    if (!modules.subset_of(cfg_.modules))
      throw ConfigError("modules " + modules.str() + " were not fitted (fitted: " + cfg_.modules.str() + ")",
                        "modules", true);
    if (modules.actionability && prefs == nullptr)
      throw ConfigError("module 4 requires preferences", "preferences");
    if (opts.n == 0) throw ConfigError("N must be at least 1", "n");
    if (desired.task != train_->task()) throw ConfigError("desired outcome does not match the task", "desired");
    if (desired.task == Task::classification && desired.target_class >= predictor_->class_count())
      throw ConfigError("desired class out of range", "desired");

    moo::MooConfig moo_cfg;
    moo_cfg.objectives = modules.objective_count();
    moo_cfg.generations = cfg_.generations;
    moo_cfg.pc = cfg_.pc;
    moo_cfg.pm = cfg_.pm;
    moo_cfg.eta_m = cfg_.eta_m;
    moo_cfg.seed = opts.seed;

    const Row xr(x.begin(), x.end());
    auto init = initialize_population(xr, desired, moo_cfg.population(), opts.seed);
    const auto genes = gene_specs(xr);
    const moo::Evaluator eval = [&](std::span<const moo::Genotype> genotypes) {
      const auto bd = evaluate_batch(xr, genotypes, desired, prefs);
      std::vector<moo::Objectives> out;
      out.reserve(bd.size());
      for (const auto& b : bd) out.push_back(b.minimization(modules));
      return out;
    };
    // Survivors of every generation form the candidate pool, so valid
    // individuals found early are not lost to later niching.
    moo::Population archive;
    const moo::Observer keep = [&](std::size_t, const moo::Population& pop) {
      for (std::size_t i = 0; i < pop.genotypes.size(); ++i) {
        archive.genotypes.push_back(pop.genotypes[i]);
        archive.objectives.push_back(pop.objectives[i]);
      }
    };
    moo::evolve(eval, std::move(init), genes, moo_cfg, keep);
    return select_final(archive, xr, desired, prefs, modules, opts.n, opts.seed);
  }

  // Valid individuals, deduplicated, ordered by the active module goals, then
  // front rank, then the sum of min-max normalized active objectives. Falls
  // back to a best-effort set ordered by outcome cost first when no individual
  // is valid.
  CounterfactualSet select_final(const moo::Population& pop, std::span<const double> x, const DesiredOutcome& desired,
                                 const Preference* prefs, const ModuleSet& modules, std::size_t n,
                                 std::uint64_t seed) const {
    CounterfactualSet set;
    set.desired = desired;
    set.modules = modules;
    set.seed = seed;

    auto unique_from = [&](bool valid_only) {
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < pop.genotypes.size(); ++i) {
        if (valid_only && pop.objectives[i][0] != 0.0) continue;
        bool dup = false;
        for (auto k : keep)
          if (changed_features(pop.genotypes[k], pop.genotypes[i]).empty()) {
            dup = true;
            break;
          }
        if (!dup) keep.push_back(i);
      }
      return keep;
    };
    auto pool = unique_from(true);
    if (pool.empty()) {
      set.valid = false;
      pool = unique_from(false);
    }

    std::vector<moo::Objectives> objs;
    for (auto i : pool) objs.push_back(pop.objectives[i]);
    const auto fronts = moo::fast_nondominated_sort(objs);
    std::vector<std::size_t> rank(objs.size(), 0);
    for (std::size_t f = 0; f < fronts.size(); ++f)
      for (auto k : fronts[f]) rank[k] = f;
    const std::size_t m = objs.empty() ? 0 : objs.front().size();
    std::vector<double> lo(m, std::numeric_limits<double>::infinity()), hi(m, -std::numeric_limits<double>::infinity());
    for (const auto& o : objs)
      for (std::size_t s = 0; s < m; ++s) {
        lo[s] = std::min(lo[s], o[s]);
        hi[s] = std::max(hi[s], o[s]);
      }
    std::vector<double> score(objs.size(), 0.0);
    for (std::size_t k = 0; k < objs.size(); ++k)
      for (std::size_t s = 0; s < m; ++s)
        if (hi[s] > lo[s]) score[k] += (objs[k][s] - lo[s]) / (hi[s] - lo[s]);

    // Module goals in hierarchy order: soundness deficit (2 - p - c), then
    // coherency cost, then actionability cost; each only when active.
    std::vector<std::size_t> goal_slots;
    {
      std::size_t slot = 3;
      if (modules.soundness) slot += 2;
      if (modules.coherency) goal_slots.push_back(slot++);
      if (modules.actionability) goal_slots.push_back(slot++);
    }
    auto goals = [&](std::size_t k) {
      std::vector<double> g;
      if (modules.soundness) g.push_back(2.0 + objs[k][3] + objs[k][4]);
      for (auto s : goal_slots) g.push_back(objs[k][s]);
      return g;
    };
    std::vector<std::vector<double>> goal(objs.size());
    for (std::size_t k = 0; k < objs.size(); ++k) goal[k] = goals(k);

    std::vector<std::size_t> order(objs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (!set.valid && objs[a][0] != objs[b][0]) return objs[a][0] < objs[b][0];
      if (goal[a] != goal[b]) return goal[a] < goal[b];
      if (rank[a] != rank[b]) return rank[a] < rank[b];
      return score[a] < score[b];
    });
    if (order.size() > n) order.resize(n);

    std::vector<Row> rows;
    for (auto k : order) rows.push_back(pop.genotypes[pool[k]]);
    std::vector<std::vector<double>> preds;
    const auto breakdowns = evaluate_batch(x, rows, desired, prefs, &preds);
    for (std::size_t k = 0; k < order.size(); ++k) {
      Counterfactual cf;
      cf.encoded = rows[k];
      cf.raw = schema().decode(rows[k]);
      cf.changed = changed_features(x, rows[k]);
      cf.breakdown = breakdowns[k];
      cf.prediction = preds[k];
      cf.front = rank[order[k]];
      set.items.push_back(std::move(cf));
    }
    return set;
  }

  nlohmann::json to_json() const;
  static Explainer from_json(const nlohmann::json& doc);

 private:
  FitConfig cfg_;
  std::shared_ptr<const Dataset> train_;
  PredictorPtr predictor_;
  std::vector<std::vector<double>> train_predictions_;
  std::optional<ResponseRanges> ranges_;
  std::optional<SoundnessModels> soundness_;
  std::optional<CoherencyModels> coherency_;
  std::optional<Dataset> test_;
};

namespace detail {

inline nlohmann::json dataset_rows_to_json(const Dataset& ds) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : ds.raw) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& v : r) row.push_back(raw_value_to_json(v));
    rows.push_back(std::move(row));
  }
  return {{"rows", rows}, {"targets", ds.targets}};
}

inline std::pair<std::vector<RawRow>, std::vector<double>> dataset_rows_from_json(const nlohmann::json& doc) {
  std::vector<RawRow> raw;
  for (const auto& row : doc.at("rows")) {
    RawRow r;
    for (const auto& v : row) r.push_back(raw_value_from_json(v));
    raw.push_back(std::move(r));
  }
  return {std::move(raw), doc.at("targets").get<std::vector<double>>()};
}

}  // namespace detail

inline nlohmann::json Explainer::to_json() const {
  nlohmann::json doc;
  doc["format"] = "care-explainer";
  doc["version"] = kArtifactVersion;
  doc["meta"] = care::to_json(train_->meta);
  doc["schema"] = care::to_json(train_->schema);
  doc["train"] = detail::dataset_rows_to_json(*train_);
  if (test_) doc["test"] = detail::dataset_rows_to_json(*test_);
  doc["predictor"] = predictor_->to_json();
  doc["train_predictions"] = train_predictions_;
  doc["config"] = {{"modules", cfg_.modules.list()},
                   {"proximity_threshold", cfg_.soundness.proximity_threshold},
                   {"epsilon_percentile", cfg_.soundness.epsilon_percentile},
                   {"rho", cfg_.coherency.rho},
                   {"tau", cfg_.coherency.tau ? nlohmann::json(*cfg_.coherency.tau) : nlohmann::json("median")},
                   {"coherency_train_fraction", cfg_.coherency.train_fraction},
                   {"cart_max_depth", cfg_.coherency.max_depth},
                   {"ridge_lambda", cfg_.coherency.lambda},
                   {"quantiles", cfg_.quantiles},
                   {"probability_threshold", cfg_.probability_threshold},
                   {"generations", cfg_.generations},
                   {"pc", cfg_.pc},
                   {"pm", cfg_.pm},
                   {"eta_m", cfg_.eta_m},
                   {"seed", cfg_.seed}};
  doc["ranges"] = ranges_ ? care::to_json(*ranges_) : nlohmann::json(nullptr);
  doc["soundness"] = soundness_ ? care::to_json(*soundness_) : nlohmann::json(nullptr);
  doc["coherency"] = coherency_ ? care::to_json(*coherency_) : nlohmann::json(nullptr);
  return doc;
}

inline Explainer Explainer::from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", std::string()) != "care-explainer")
      throw SchemaMismatchError("not a CARE explainer artifact");
    if (doc.at("version").get<int>() != kArtifactVersion)
      throw SchemaMismatchError("unsupported artifact version " + std::to_string(doc.at("version").get<int>()));
    Explainer e;
    const auto meta = parse_dataset_meta(doc.at("meta"));
    const auto schema = schema_from_json(doc.at("schema"));
    auto [raw, targets] = detail::dataset_rows_from_json(doc.at("train"));
    e.train_ = std::make_shared<const Dataset>(detail::assemble(meta, schema, std::move(raw), std::move(targets)));
    if (doc.contains("test")) {
      auto [traw, tt] = detail::dataset_rows_from_json(doc.at("test"));
      e.test_ = encode_with(*e.train_, std::move(traw), std::move(tt));
    }
    e.predictor_ = predictor_from_json(doc.at("predictor"));
    e.train_predictions_ = doc.at("train_predictions").get<std::vector<std::vector<double>>>();
    const auto& c = doc.at("config");
    e.cfg_.modules = ModuleSet::from_list(c.at("modules").get<std::vector<int>>());
    e.cfg_.soundness.proximity_threshold = c.at("proximity_threshold").get<double>();
    e.cfg_.soundness.epsilon_percentile = c.at("epsilon_percentile").get<double>();
    e.cfg_.coherency.rho = c.at("rho").get<double>();
    if (c.at("tau").is_number()) e.cfg_.coherency.tau = c.at("tau").get<double>();
    e.cfg_.coherency.train_fraction = c.at("coherency_train_fraction").get<double>();
    e.cfg_.coherency.max_depth = c.at("cart_max_depth").get<std::size_t>();
    e.cfg_.coherency.lambda = c.at("ridge_lambda").get<double>();
    e.cfg_.quantiles = c.at("quantiles").get<int>();
    e.cfg_.probability_threshold = c.at("probability_threshold").get<double>();
    e.cfg_.generations = c.at("generations").get<std::size_t>();
    e.cfg_.pc = c.at("pc").get<double>();
    e.cfg_.pm = c.at("pm").get<double>();
    e.cfg_.eta_m = c.at("eta_m").get<double>();
    e.cfg_.seed = c.at("seed").get<std::uint64_t>();
    if (!doc.at("ranges").is_null()) e.ranges_ = response_ranges_from_json(doc.at("ranges"));
    if (!doc.at("soundness").is_null()) e.soundness_ = soundness_from_json(doc.at("soundness"), *e.train_);
    if (!doc.at("coherency").is_null()) e.coherency_ = coherency_from_json(doc.at("coherency"));
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw SchemaMismatchError(std::string("malformed explainer artifact: ") + ex.what());
  }
}

inline Explainer load_explainer(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatchError("artifact '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return Explainer::from_json(doc);
}

// JSON form of a counterfactual set using raw (decoded) values.
inline nlohmann::json to_json(const CounterfactualSet& set, const Schema& schema, std::span<const double> x) {
  auto decode_row = [&](const RawRow& raw) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t j = 0; j < schema.size(); ++j) row[schema.features[j].name] = raw_value_to_json(raw[j]);
    return row;
  };
  nlohmann::json desired;
  if (set.desired.task == Task::classification)
    desired = {{"class", schema.classes.at(set.desired.target_class)}, {"threshold", set.desired.threshold}};
  else
    desired = {{"range", {set.desired.lb, set.desired.ub}}};
  nlohmann::json items = nlohmann::json::array();
  for (const auto& cf : set.items) {
    nlohmann::json changed = nlohmann::json::array();
    for (auto j : cf.changed) changed.push_back(schema.features[j].name);
    items.push_back({{"values", decode_row(cf.raw)},
                     {"changed", changed},
                     {"objectives", to_json(cf.breakdown)},
                     {"prediction", cf.prediction},
                     {"front", cf.front}});
  }
  return {{"input", decode_row(schema.decode(x))},
          {"desired", desired},
          {"modules", set.modules.list()},
          {"seed", set.seed},
          {"valid", set.valid},
          {"counterfactuals", items}};
}

}  // namespace care
