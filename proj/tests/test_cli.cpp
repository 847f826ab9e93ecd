#include <gtest/gtest.h>

#include <csignal>
#include <fstream>
#include <sstream>

#include "care/cli.hpp"
#include "fixtures.hpp"
#include "httplib.h"

using namespace care;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run care_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "care");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / ("care_cli_" + std::to_string(::getpid())));
    fs::create_directories(*dir_);
    const auto ds = fixtures::actionable(200);
    spit(*dir_ / "data.csv", fixtures::to_csv(ds));
    spit(*dir_ / "meta.json", to_json(ds.meta).dump());
    spit(*dir_ / "prefs.json", fixtures::actionable_preferences().dump());
    const auto r = care_cli({"fit", "--data", (*dir_ / "data.csv").string(), "--meta", (*dir_ / "meta.json").string(),
                             "--out", (*dir_ / "fit").string(), "--predictor", "nearest-centroid", "--seed", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }
  static fs::path dir() { return *dir_; }
  static std::string artifact() { return (*dir_ / "fit" / "explainer.json").string(); }
  static fs::path* dir_;
};

fs::path* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, FitWritesArtifactAndSummary) {
  ASSERT_TRUE(fs::exists(artifact()));
  const auto summary = nlohmann::json::parse(slurp(dir() / "fit" / "fit_summary.json"));
  EXPECT_EQ(summary["modules"], nlohmann::json({1, 2, 3, 4}));
  EXPECT_EQ(summary["train_rows"], 160);
  EXPECT_EQ(summary["test_rows"], 40);
  EXPECT_EQ(summary["artifact_hash"], cli::artifact_hash(slurp(artifact())));
  EXPECT_TRUE(summary.contains("soundness"));
  EXPECT_TRUE(summary.contains("coherency"));
  EXPECT_EQ(summary["coherency"]["tau_rule"], "median");
}

TEST_F(Cli, ExplainIsByteIdenticalAcrossRuns) {
  const std::vector<std::string> base{"explain", "--artifact", artifact(), "--index", "0,3", "--n", "4",
                                      "--seed", "9", "--modules", "1,2,3", "--table"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", (dir() / "ex_a").string()});
  b.insert(b.end(), {"--out", (dir() / "ex_b").string()});
  const auto ra = care_cli(a), rb = care_cli(b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  const auto ja = slurp(dir() / "ex_a" / "explanations.json");
  EXPECT_EQ(ja, slurp(dir() / "ex_b" / "explanations.json"));
  EXPECT_EQ(slurp(dir() / "ex_a" / "explanations.txt"), slurp(dir() / "ex_b" / "explanations.txt"));
  const auto doc = nlohmann::json::parse(ja);
  EXPECT_EQ(doc["format"], "care-explanations");
  ASSERT_EQ(doc["results"].size(), 2u);
  EXPECT_EQ(doc["results"][1]["source"], "test:3");
  EXPECT_LE(doc["results"][0]["counterfactuals"].size(), 4u);
  EXPECT_NE(ra.out.find("cf1"), std::string::npos);
}

TEST_F(Cli, ExplainWithPreferencesAndRowsFile) {
  const auto ds = fixtures::actionable(5, 99);
  spit(dir() / "rows.csv", fixtures::to_csv(ds, false));
  const auto r = care_cli({"explain", "--artifact", artifact(), "--rows", (dir() / "rows.csv").string(), "--prefs",
                           (dir() / "prefs.json").string(), "--n", "3", "--out", (dir() / "ex_rows").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(slurp(dir() / "ex_rows" / "explanations.json"));
  EXPECT_EQ(doc["results"].size(), 5u);
  EXPECT_EQ(doc["preferences"]["rising"]["op"], "ge");
}

TEST_F(Cli, BenchmarkWritesReportTableAndTiming) {
  const auto out = dir() / "bench";
  const auto r = care_cli({"benchmark", "--artifact", artifact(), "--configs", "1;1,2,3,4", "--inputs", "3", "--n",
                           "3", "--prefs", (dir() / "prefs.json").string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report["configs"].size(), 2u);
  EXPECT_EQ(report["n_inputs"], 3);
  EXPECT_TRUE(fs::exists(out / "timing.json"));
  EXPECT_EQ(slurp(out / "report.txt").rfind("config", 0), 0u);
  EXPECT_NE(r.out.find("{1,2,3,4}"), std::string::npos);
  const auto again = care_cli({"benchmark", "--artifact", artifact(), "--configs", "1;1,2,3,4", "--inputs", "3", "--n",
                               "3", "--prefs", (dir() / "prefs.json").string(), "--out", (dir() / "bench2").string()});
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(slurp(out / "report.json"), slurp(dir() / "bench2" / "report.json"));
}

TEST_F(Cli, InputAndConfigErrorsExitTwo) {
  EXPECT_EQ(care_cli({}).code, 2);
  EXPECT_EQ(care_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(care_cli({"fit", "--meta", "m.json"}).code, 2);
  EXPECT_EQ(care_cli({"fit", "--data", "nope.csv", "--meta", "nope.json"}).code, 2);
  EXPECT_EQ(care_cli({"explain", "--artifact", (dir() / "missing.json").string()}).code, 2);
  EXPECT_EQ(care_cli({"explain", "--artifact", artifact(), "--index", "100000", "--out", dir().string()}).code, 2);
  EXPECT_EQ(care_cli({"explain", "--artifact", artifact(), "--modules", "2", "--out", dir().string()}).code, 2);
  EXPECT_EQ(care_cli({"explain", "--artifact", artifact(), "--modules", "1,4", "--out", dir().string()}).code, 2);
  EXPECT_EQ(care_cli({"fit", "--data", (dir() / "data.csv").string(), "--meta", (dir() / "meta.json").string(),
                      "--out", (dir() / "bad").string(), "--p", "0"})
                .code,
            2);
  EXPECT_EQ(care_cli({"fit", "--data", (dir() / "data.csv").string(), "--meta", (dir() / "meta.json").string(),
                      "--out", (dir() / "bad").string(), "--tau", "high"})
                .code,
            2);
  spit(dir() / "broken.csv", "fixed,rising,free1,free2,free3,free4,label\np,1,2\n");
  const auto bad_csv = care_cli({"fit", "--data", (dir() / "broken.csv").string(), "--meta",
                                 (dir() / "meta.json").string(), "--out", (dir() / "bad").string()});
  EXPECT_EQ(bad_csv.code, 2);
  EXPECT_NE(bad_csv.err.find("error"), std::string::npos);
  // Columns that disagree with the metadata are a schema mismatch.
  spit(dir() / "short.csv", "fixed,rising\np,1\n");
  EXPECT_EQ(care_cli({"fit", "--data", (dir() / "short.csv").string(), "--meta", (dir() / "meta.json").string(),
                      "--out", (dir() / "bad").string()})
                .code,
            3);
}

TEST_F(Cli, SchemaMismatchExitsThree) {
  spit(dir() / "junk.json", "not json");
  EXPECT_EQ(care_cli({"explain", "--artifact", (dir() / "junk.json").string()}).code, 3);
  spit(dir() / "other.json", R"({"format": "something-else", "version": 1})");
  EXPECT_EQ(care_cli({"explain", "--artifact", (dir() / "other.json").string()}).code, 3);
  // A category the training data never had.
  spit(dir() / "stray.csv", "fixed,rising,free1,free2,free3,free4\nr,40,0,0,0,0\n");
  const auto r = care_cli({"explain", "--artifact", artifact(), "--rows", (dir() / "stray.csv").string(), "--out",
                           (dir() / "stray").string()});
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST_F(Cli, ServeOnBusyPortExitsFour) {
  httplib::Server blocker;
  const RecourseService holder(cli::load_artifact(artifact()).first, "h");
  holder.mount(blocker);
  const int port = blocker.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  sigset_t saved;
  pthread_sigmask(SIG_SETMASK, nullptr, &saved);
  const auto r = care_cli({"serve", "--artifact", artifact(), "--port", std::to_string(port)});
  pthread_sigmask(SIG_SETMASK, &saved, nullptr);
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("port in use"), std::string::npos);
}

TEST_F(Cli, UnreachableRemotePredictorExitsFour) {
  const auto r = care_cli({"fit", "--data", (dir() / "data.csv").string(), "--meta", (dir() / "meta.json").string(),
                           "--out", (dir() / "remote").string(), "--predictor", "remote", "--endpoint",
                           "http://127.0.0.1:1", "--retries", "0", "--timeout", "2"});
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_NE(r.err.find("remote predictor"), std::string::npos);
}

TEST_F(Cli, HelpExitsZero) {
  const auto r = care_cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("benchmark"), std::string::npos);
}
