// Acceptance run: one PASS/FAIL line per primary criterion. Exits nonzero when
// any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <sys/wait.h>

#include "../fixtures.hpp"
#include "../oracles.hpp"
#include "care/cli.hpp"
#include "care/evaluation.hpp"
#include "care/service.hpp"

using namespace care;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Worst absolute error and instance count for one metric.
struct ErrorTally {
  std::size_t count = 0;
  double worst = 0.0;
  void add(double got, double want) {
    ++count;
    worst = std::max(worst, std::abs(got - want));
  }
  bool ok() const { return count >= 20 && worst <= 1e-9; }
};

// Fixtures are 625 rows split 0.8 with seed 7: 500 training rows, 125 test rows.
struct Fitted {
  Dataset train, test;
  std::shared_ptr<Explainer> explainer;
};

Fitted fit(const Dataset& full, ModuleSet modules) {
  auto [train, test] = split(full, 0.8, 7);
  auto f = train_reference(train, ReferenceKind::bagged_stumps, 1);
  FitConfig cfg;
  cfg.modules = modules;
  auto e = std::make_shared<Explainer>(Explainer::fit(train, f, cfg));
  return {std::move(train), std::move(test), std::move(e)};
}

const ConfigReport& config(const BenchmarkReport& r, const std::string& modules) {
  for (const auto& c : r.configs)
    if (c.modules.str() == modules) return c;
  throw std::runtime_error("configuration {" + modules + "} missing from report");
}

std::size_t record_errors(const ConfigReport& c) {
  std::size_t n = 0;
  for (const auto& rec : c.records) n += rec.error ? 1 : 0;
  return n;
}

// ---------------------------------------------------------------------------

Verdict metric_oracles() {
  std::mt19937_64 rng(2024);
  std::map<std::string, ErrorTally> t;

  const auto blobs = fixtures::two_blobs(200, 9);
  const auto& s = blobs.schema;
  std::uniform_int_distribution<std::size_t> pick(0, blobs.size() - 1);
  std::bernoulli_distribution coin(0.5);
  for (int k = 0; k < 40; ++k) {
    const auto i = pick(rng), j = pick(rng);
    t["gower_distance"].add(gower_distance(blobs.rows[i], blobs.rows[j], s.features),
                            oracle::gower_raw(blobs.raw[i], blobs.raw[j], s));
    for (std::size_t f = 0; f < s.size(); ++f) {
      const auto& m = s.features[f];
      double want, got;
      if (m.numerical()) {
        const double a = std::get<double>(blobs.raw[i][f]), b = std::get<double>(blobs.raw[j][f]);
        want = std::min(1.0, std::fabs(a - b) / (m.max - m.min));
        got = feature_delta(a, b, m);
      } else {
        want = std::get<std::string>(blobs.raw[i][f]) == std::get<std::string>(blobs.raw[j][f]) ? 0.0 : 1.0;
        got = feature_delta(blobs.rows[i][f], blobs.rows[j][f], m);
      }
      t["feature_delta"].add(got, want);
    }
    // Sparsity: perturb a random subset of features and count them.
    RawRow xp = blobs.raw[i];
    std::size_t changed = 0;
    for (std::size_t f = 0; f < s.size(); ++f) {
      if (!coin(rng)) continue;
      if (s.features[f].numerical())
        xp[f] = std::get<double>(xp[f]) + 0.25;
      else
        xp[f] = s.features[f].categories[(s.features[f].code_of(std::get<std::string>(xp[f])) + 1) % 3];
      ++changed;
    }
    t["sparsity_cost"].add(static_cast<double>(sparsity_cost(blobs.rows[i], s.encode(xp))),
                           static_cast<double>(changed));
  }

  std::normal_distribution<double> n(0, 1);
  std::uniform_int_distribution<int> cat(0, 3);
  for (int k = 0; k < 30; ++k) {
    std::vector<double> x, y, ca, cb;
    for (int i = 0; i < 40; ++i) {
      const double v = n(rng);
      x.push_back(v);
      y.push_back(0.6 * v + n(rng));
      ca.push_back(cat(rng));
      cb.push_back(coin(rng) ? ca.back() : cat(rng));
    }
    t["pearson_r"].add(stats::pearson_r(x, y), oracle::pearson(x, y));
    t["correlation_ratio"].add(stats::correlation_ratio(ca, y), oracle::correlation_ratio(ca, y));
    t["cramers_v"].add(stats::cramers_v(ca, cb), oracle::cramers_v(ca, cb));
  }

  for (int k = 0; k < 30; ++k) {
    std::vector<Row> ref;
    for (int i = 0; i < 30; ++i) ref.push_back({n(rng), n(rng)});
    std::vector<std::size_t> idx(ref.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<std::optional<ProximityGroup>> g;
    g.emplace_back(make_proximity_group(idx, ref));
    const ProximityModel m(std::move(g), 1.0);
    const Row q{2 * n(rng), 2 * n(rng)};
    t["proximity_ratio"].add(m.ratio(q, 0), oracle::proximity_ratio(q, ref));
  }

  const std::vector<std::string> names{"a", "b", "c", "d", "e"};
  for (int k = 0; k < 30; ++k) {
    const std::size_t sz = 2 + static_cast<std::size_t>(k % 8);
    std::vector<std::vector<std::size_t>> changed;
    std::vector<RawRow> values;
    std::vector<std::set<std::string>> named;
    std::vector<oracle::ValueMap> maps;
    for (std::size_t e = 0; e < sz; ++e) {
      std::vector<std::size_t> c;
      RawRow r;
      std::set<std::string> nm;
      oracle::ValueMap vm;
      for (std::size_t f = 0; f < names.size(); ++f) {
        const double v = cat(rng) % 3;
        r.push_back(v);
        if (coin(rng)) {
          c.push_back(f);
          nm.insert(names[f]);
          vm[names[f]] = std::to_string(v);
        }
      }
      changed.push_back(c);
      values.push_back(r);
      named.push_back(nm);
      maps.push_back(vm);
    }
    t["d_F"].add(feature_diversity(changed), oracle::feature_diversity(named));
    t["d_V"].add(value_diversity(changed, values), oracle::value_diversity(maps));
  }

  Verdict v{true, ""};
  for (const auto& [name, tally] : t) {
    v.pass = v.pass && tally.ok();
    v.detail += name + " n=" + std::to_string(tally.count) + " err=" + fmt("%.1e", tally.worst) + "; ";
  }
  if (t.size() != 9) v.pass = false;
  return v;
}

Verdict sorting_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> n_of(1, 64), m_of(2, 7), level(0, 5);
  std::uniform_real_distribution<double> u(0, 1);
  int mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(n_of(rng));
    const auto m = static_cast<std::size_t>(m_of(rng));
    std::vector<moo::Objectives> pts(n, moo::Objectives(m));
    for (auto& p : pts)
      for (auto& v : p) v = t % 2 ? level(rng) : u(rng);  // odd sets on a coarse grid with ties
    const auto want = oracle::dominance_ranks(pts);
    const auto fronts = moo::fast_nondominated_sort(pts);
    std::vector<int> got(n, -1);
    for (std::size_t k = 0; k < fronts.size(); ++k)
      for (auto i : fronts[k]) got[i] = static_cast<int>(k);
    mismatches += got != want;
  }
  return {mismatches == 0, "200 sets, " + std::to_string(mismatches) + " mismatches"};
}

Verdict das_dennis() {
  const std::tuple<std::size_t, std::size_t, std::size_t> cases[] = {{3, 12, 91}, {4, 7, 120}, {7, 3, 84}};
  bool ok = true;
  double worst = 0.0;
  std::string detail;
  for (const auto& [m, p, want] : cases) {
    const auto pts = moo::das_dennis_points(m, p);
    ok = ok && pts.size() == want && pts.size() == moo::binomial(m + p - 1, p);
    for (const auto& v : pts) {
      double s = 0;
      for (double x : v) {
        ok = ok && x >= 0.0;
        s += x;
      }
      worst = std::max(worst, std::abs(s - 1.0));
    }
    detail += "(" + std::to_string(m) + "," + std::to_string(p) + ")=" + std::to_string(pts.size()) + " ";
  }
  return {ok && worst <= 1e-12, detail + "simplex err=" + fmt("%.1e", worst)};
}

struct Benchmarks {
  BenchmarkReport blobs, moons;
};

BenchmarkOptions four_configs(Preference prefs) {
  BenchmarkOptions o;
  o.n_inputs = 50;
  o.n = 10;
  o.seed = 0;
  o.preferences = std::move(prefs);
  return o;
}

Verdict validity(const Benchmarks& b) {
  std::size_t total = 0, zero = 0, errors = 0, sets = 0;
  for (const auto* r : {&b.blobs, &b.moons})
    for (const auto& c : r->configs) {
      errors += record_errors(c);
      for (const auto& rec : c.records) {
        sets += rec.error ? 0 : 1;
        for (const auto& cf : rec.set.items) {
          ++total;
          zero += cf.breakdown.outcome == 0.0;
        }
      }
    }
  return {total > 0 && zero == total && errors == 0,
          std::to_string(zero) + "/" + std::to_string(total) + " counterfactuals with O_outcome = 0 over " +
              std::to_string(sets) + " sets, " + std::to_string(errors) + " errors"};
}

Verdict soundness(const BenchmarkReport& moons) {
  const auto& c1 = config(moons, "1");
  const auto& c12 = config(moons, "1,2");
  const double p1 = c1.objectives[3]->mean, k1 = c1.objectives[4]->mean;
  const double p12 = c12.objectives[3]->mean, k12 = c12.objectives[4]->mean;
  std::size_t unsound = 0;
  for (const auto& rec : c1.records)
    for (const auto& cf : rec.set.items) {
      const double p = *cf.breakdown.proximity, c = *cf.breakdown.connectedness;
      unsound += (p == 1.0 && c == 0.0) || p == 0.0;
    }
  const bool ok = p12 >= 0.9 && k12 >= 0.9 && p12 > p1 && k12 > k1 && unsound > 0 && record_errors(c1) == 0 &&
                  record_errors(c12) == 0;
  return {ok, "{1,2} proximity " + fmt("%.3f", p12) + " connectedness " + fmt("%.3f", k12) + " vs {1} " +
                  fmt("%.3f", p1) + " / " + fmt("%.3f", k1) + "; {1} counterfactuals with p=1,c=0 or p=0: " +
                  std::to_string(unsound)};
}

Verdict coherency() {
  const auto fx = fit(fixtures::correlated(625), ModuleSet::parse("1,2,3"));
  BenchmarkOptions o;
  o.configs = {ModuleSet::parse("1,2"), ModuleSet::parse("1,2,3")};
  o.n_inputs = 50;
  o.groups = parse_coherency_groups(fixtures::correlated_groups(), fx.train);
  const auto r = run_benchmark(*fx.explainer, fx.test, o);
  const auto& a = config(r, "1,2");
  const auto& b = config(r, "1,2,3");
  const double ma = a.objectives[5]->mean, mb = b.objectives[5]->mean;
  const bool ok = mb <= 0.02 && b.coherency_rate >= 0.95 && ma > mb && a.coherency_rate < b.coherency_rate &&
                  record_errors(a) == 0 && record_errors(b) == 0;
  return {ok, "{1,2,3} O_coherency " + fmt("%.4f", mb) + " rate " + fmt("%.3f", b.coherency_rate) + "; {1,2} " +
                  fmt("%.4f", ma) + " rate " + fmt("%.3f", a.coherency_rate)};
}

Verdict actionability() {
  const auto fx = fit(fixtures::actionable(625), ModuleSet::all());
  BenchmarkOptions o;
  o.configs = {ModuleSet::parse("1,2,3"), ModuleSet::parse("1,2,3,4")};
  o.n_inputs = 50;
  o.preferences = parse_preferences(fixtures::actionable_preferences(), fx.train.schema);
  const auto r = run_benchmark(*fx.explainer, fx.test, o);
  const auto& a = config(r, "1,2,3");
  const auto& b = config(r, "1,2,3,4");
  std::size_t total = 0, free = 0;
  for (const auto& rec : b.records)
    for (const auto& cf : rec.set.items) {
      ++total;
      free += cf.breakdown.actionability == 0.0;
    }
  const double share = total ? static_cast<double>(free) / static_cast<double>(total) : 0.0;
  const double ea = a.objectives[6]->mean, eb = b.objectives[6]->mean;
  const bool ok = share >= 0.95 && eb < ea && record_errors(a) == 0 && record_errors(b) == 0;
  return {ok, "{1,2,3,4} eta = 0 for " + std::to_string(free) + "/" + std::to_string(total) + " (" +
                  fmt("%.3f", share) + "), mean eta " + fmt("%.3f", eb) + " vs {1,2,3} " + fmt("%.3f", ea)};
}

Verdict epsilon_chain() {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0, 1);
  std::uniform_int_distribution<int> size(20, 200);
  std::uniform_real_distribution<double> u(-6, 6);
  int queries = 0, mismatches = 0, connected = 0;
  const EpsilonGraphClusterer clusterer;
  for (int g = 0; g < 10; ++g) {
    const auto rows_n = static_cast<std::size_t>(size(rng));
    std::vector<Row> rows;
    for (std::size_t i = 0; i < rows_n; ++i) rows.push_back({n(rng) + (i % 3) * 3.0, n(rng), 0.5 * n(rng)});
    const auto cl = clusterer.cluster(rows);
    std::vector<std::size_t> idx(rows_n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<std::optional<ConnectednessGroup>> groups;
    groups.emplace_back(make_connectedness_group(idx, rows, cl));
    const ConnectednessModel m(std::move(groups));
    for (int q = 0; q < 10; ++q, ++queries) {
      Row x;
      if (q % 2) {
        x = rows[static_cast<std::size_t>(q * 7) % rows_n];
        for (auto& v : x) v += 0.5 * n(rng);
      } else {
        x = {u(rng), u(rng), u(rng)};
      }
      const bool want = oracle::epsilon_chain(rows, x, cl.epsilon).connected;
      mismatches += (m.fitness(x, 0) == 1) != want;
      connected += want;
    }
  }
  return {mismatches == 0 && queries == 100,
          std::to_string(queries) + " queries (" + std::to_string(connected) + " connected), " +
              std::to_string(mismatches) + " mismatches"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int shell(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / ("care_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto ds = fixtures::half_moons(625);
  std::ofstream(dir / "data.csv") << fixtures::to_csv(ds);
  std::ofstream(dir / "meta.json") << to_json(ds.meta).dump();
  const std::string cli = CARE_CLI_PATH;
  auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  if (shell(cli + " fit --data " + q(dir / "data.csv") + " --meta " + q(dir / "meta.json") + " --modules 1,2,3" +
            " --seed 7 --out " + q(dir / "fit")) != 0)
    return {false, "care fit failed"};
  const auto artifact = dir / "fit" / "explainer.json";
  for (const char* run : {"a", "b"})
    if (shell(cli + " explain --artifact " + q(artifact) + " --index 0,1,2 --n 5 --seed 3 --out " + q(dir / run)) != 0)
      return {false, "care explain failed"};
  const auto cli_a = slurp(dir / "a" / "explanations.json");
  const bool cli_same = !cli_a.empty() && cli_a == slurp(dir / "b" / "explanations.json");

  const auto [explainer, hash] = cli::load_artifact(artifact.string());
  const RecourseService service(explainer, hash);
  httplib::Server svr;
  service.mount(svr);
  svr.set_logger([](const httplib::Request&, const httplib::Response&) {});
  const int port = svr.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(120, 0);
  bool svc_same = true, breakdown_equal = true;
  const auto cli_doc = json::parse(cli_a);
  for (int i = 0; i < 3; ++i) {
    const auto body = json{{"instance", {{"index", i}}}, {"n", 5}, {"seed", 3}}.dump();
    const auto r1 = client.Post("/explain", body, "application/json");
    const auto r2 = client.Post("/explain", body, "application/json");
    if (!r1 || !r2 || r1->status != 200 || r2->status != 200) {
      svc_same = false;
      break;
    }
    svc_same = svc_same && r1->body == r2->body;
    const auto svc = json::parse(r1->body)["counterfactuals"];
    const auto& mine = cli_doc["results"][static_cast<std::size_t>(i)]["counterfactuals"];
    breakdown_equal = breakdown_equal && svc.size() == mine.size() && !svc.empty();
    for (std::size_t k = 0; breakdown_equal && k < svc.size(); ++k)
      breakdown_equal = svc[k]["objectives"] == mine[k]["objectives"] && svc[k]["values"] == mine[k]["values"];
  }
  svr.stop();
  worker.join();
  fs::remove_all(dir);
  return {cli_same && svc_same && breakdown_equal, std::string("cli byte-identical ") + (cli_same ? "yes" : "no") +
                                                        ", service byte-identical " + (svc_same ? "yes" : "no") +
                                                        ", cli/service breakdowns equal " +
                                                        (breakdown_equal ? "yes" : "no")};
}

Verdict diversity(const BenchmarkReport& moons) {
  std::size_t inputs = 0, bad = 0;
  double lo_f = 1, hi_f = 0, lo_v = 1, hi_v = 0;
  std::string per_config;
  for (const auto& c : moons.configs) {
    std::size_t failed = 0;
    for (const auto& rec : c.records) {
      ++inputs;
      if (!rec.d_f || !rec.d_v) {
        ++failed;
        continue;
      }
      const double f = *rec.d_f, v = *rec.d_v;
      failed += !(f > 0.0 && f <= 1.0 && v >= 0.0 && v <= 1.0);
      lo_f = std::min(lo_f, f);
      hi_f = std::max(hi_f, f);
      lo_v = std::min(lo_v, v);
      hi_v = std::max(hi_v, v);
    }
    bad += failed;
    per_config += " {" + c.modules.str() + "}:" + std::to_string(failed);
  }
  return {inputs > 0 && bad == 0, std::to_string(inputs - bad) + "/" + std::to_string(inputs) +
                                      " inputs pass; d_F in [" + fmt("%.3f", lo_f) + ", " + fmt("%.3f", hi_f) +
                                      "], d_V in [" + fmt("%.3f", lo_v) + ", " + fmt("%.3f", hi_v) +
                                      "]; failing inputs per config" + per_config};
}

}  // namespace

int main() {
  int failures = 0;
  auto run = [&](const std::string& name, const std::function<Verdict()>& f) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << " [" << fmt("%.1f", secs) << " s]"
              << std::endl;
  };

  run("metric oracles", metric_oracles);
  run("sorting oracle", sorting_oracle);
  run("das-dennis counts", das_dennis);

  // Validity, soundness and diversity share one benchmark per fixture.
  Benchmarks bench;
  const auto start = std::chrono::steady_clock::now();
  std::string bench_error;
  try {
    const auto blobs = fit(fixtures::two_blobs(625), ModuleSet::all());
    bench.blobs = run_benchmark(*blobs.explainer, blobs.test,
                                four_configs(parse_preferences(json::parse(R"({"colour": {"op": "fix"}})"),
                                                               blobs.train.schema)));
    const auto moons = fit(fixtures::half_moons(625), ModuleSet::all());
    bench.moons = run_benchmark(*moons.explainer, moons.test,
                                four_configs(parse_preferences(json::parse(R"({"x1": {"op": "ge"}})"),
                                                               moons.train.schema)));
  } catch (const std::exception& e) {
    bench_error = e.what();
  }
  std::cerr << "benchmarks: " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
            << " s\n";
  auto on_bench = [&](std::function<Verdict()> f) {
    return [f, &bench_error]() -> Verdict {
      if (!bench_error.empty()) return {false, "benchmark failed: " + bench_error};
      return f();
    };
  };
  run("validity trend", on_bench([&] { return validity(bench); }));
  run("soundness trend", on_bench([&] { return soundness(bench.moons); }));
  run("coherency trend", coherency);
  run("actionability", actionability);
  run("epsilon-chain equivalence", epsilon_chain);
  run("determinism", determinism);
  run("diversity", on_bench([&] { return diversity(bench.moons); }));

  std::cout << (failures ? "FAIL " : "PASS ") << failures << " of 10 criteria failed" << std::endl;
  return failures ? 1 : 0;
}
