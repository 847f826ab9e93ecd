#include <gtest/gtest.h>

#include <thread>

#include "care/service.hpp"
#include "fixtures.hpp"
#include "httplib.h"

using namespace care;
using nlohmann::json;

namespace {

std::shared_ptr<const Explainer> fit_actionable(bool with_test = true) {
  auto [train, test] = split(fixtures::actionable(300), 0.8, 7);
  auto f = train_reference(train, ReferenceKind::nearest_centroid, 0);
  FitConfig cfg;
  cfg.modules = ModuleSet::all();
  auto e = Explainer::fit(train, f, cfg);
  if (with_test) e.set_test(std::move(test));
  return std::make_shared<const Explainer>(std::move(e));
}

class Service : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { service_ = new RecourseService(fit_actionable(), "abc123"); }
  static void TearDownTestSuite() { delete service_; }
  static RecourseService* service_;

  static json body(const ServiceResponse& r) { return json::parse(r.body); }
  static std::string field(const ServiceResponse& r) { return body(r)["error"]["field"]; }
};

RecourseService* Service::service_ = nullptr;

const char* kExplain = R"({"instance": {"index": 0}, "modules": [1, 2], "n": 3, "seed": 4})";

}  // namespace

TEST_F(Service, Health) {
  const auto r = service_->health();
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(body(r)["status"], "ok");
  EXPECT_EQ(body(r)["artifact_hash"], "abc123");
  EXPECT_EQ(body(r)["api_version"], kApiVersion);
}

TEST_F(Service, SchemaListsApplicableKinds) {
  const auto doc = body(service_->schema());
  ASSERT_EQ(doc["features"].size(), 6u);
  const auto& fixed = doc["features"][0];
  EXPECT_EQ(fixed["name"], "fixed");
  EXPECT_EQ(fixed["kind"], "categorical");
  EXPECT_EQ(fixed["constraints"].size(), 2u);
  EXPECT_EQ(fixed["categories"], json::array({"p", "q"}));
  const auto& rising = doc["features"][1];
  EXPECT_EQ(rising["kind"], "numerical");
  EXPECT_EQ(rising["constraints"].size(), 6u);
  EXPECT_LT(rising["min"].get<double>(), rising["max"].get<double>());
  EXPECT_EQ(doc["classes"], json::array({"low", "high"}));
  EXPECT_EQ(doc["modules"], json({1, 2, 3, 4}));
  EXPECT_TRUE(doc["defaults"].contains("threshold"));
}

TEST_F(Service, InstancesPagination) {
  const auto r = service_->instances("test", 2, 5);
  ASSERT_EQ(r.status, 200);
  const auto doc = body(r);
  EXPECT_EQ(doc["total"], 60);
  ASSERT_EQ(doc["rows"].size(), 5u);
  EXPECT_EQ(doc["rows"][0]["index"], 2);
  EXPECT_TRUE(doc["rows"][0]["values"].contains("rising"));
  const auto& pred = doc["rows"][0]["prediction"];
  EXPECT_NEAR(pred["probabilities"]["low"].get<double>() + pred["probabilities"]["high"].get<double>(), 1.0, 1e-12);

  const auto tail = body(service_->instances("test", 58, 20));
  EXPECT_EQ(tail["rows"].size(), 2u);
  const auto past = service_->instances("test", 500, 20);
  EXPECT_EQ(past.status, 200);
  EXPECT_TRUE(body(past)["rows"].empty());
  EXPECT_EQ(body(service_->instances("train", 0, 3))["total"], 240);

  EXPECT_EQ(service_->instances("valid", 0, 3).status, 400);
  EXPECT_EQ(service_->instances("test", 0, kMaxPageSize + 1).status, 400);
  RecourseService no_test(fit_actionable(false), "h");
  const auto missing = no_test.instances("test", 0, 3);
  EXPECT_EQ(missing.status, 404);
  EXPECT_EQ(field(missing), "split");
}

TEST_F(Service, ExplainReturnsValidDeterministicSet) {
  const auto a = service_->explain(kExplain);
  ASSERT_EQ(a.status, 200) << a.body;
  const auto doc = body(a);
  EXPECT_EQ(doc["config"]["modules"], json({1, 2}));
  EXPECT_EQ(doc["config"]["n"], 3);
  EXPECT_LE(doc["counterfactuals"].size(), 3u);
  EXPECT_GE(doc["counterfactuals"].size(), 1u);
  EXPECT_EQ(doc["valid"], true);
  EXPECT_EQ(service_->explain(kExplain).body, a.body);
  EXPECT_GT(a.elapsed_ms, 0.0);

  // Same row passed by value gives the same answer.
  const auto inst = body(service_->instances("test", 0, 1))["rows"][0]["values"];
  const auto by_row = service_->explain(json{{"instance", {{"row", inst}}}, {"modules", {1, 2}}, {"n", 3}, {"seed", 4}}.dump());
  ASSERT_EQ(by_row.status, 200) << by_row.body;
  EXPECT_EQ(body(by_row)["counterfactuals"], doc["counterfactuals"]);
}

TEST_F(Service, ExplainWithPreferences) {
  const auto req = json{{"instance", {{"index", 1}}},
                        {"preferences", fixtures::actionable_preferences()},
                        {"n", 3},
                        {"seed", 2}};
  const auto r = service_->explain(req.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  const auto doc = body(r);
  EXPECT_EQ(doc["config"]["modules"], json({1, 2, 3, 4}));
  EXPECT_EQ(doc["config"]["preferences"]["fixed"]["op"], "fix");
  for (const auto& cf : doc["counterfactuals"]) EXPECT_TRUE(cf["objectives"].contains("actionability"));
}

TEST_F(Service, ExplainRejectsBadRequests) {
  struct Case {
    std::string body;
    int status;
    std::string field;
  };
  const std::vector<Case> cases{
      {"{", 400, "body"},
      {"[]", 400, "body"},
      {R"({"instance": {"index": 0}, "colour": 1})", 400, "colour"},
      {R"({"n": 3})", 400, "instance"},
      {R"({"instance": {"index": 0, "row": {}}})", 400, "instance"},
      {R"({"instance": {"index": -1}})", 400, "instance.index"},
      {R"({"instance": {"index": 999}})", 400, "instance.index"},
      {R"({"instance": {"index": 0, "split": "dev"}})", 400, "instance.split"},
      {R"({"instance": {"row": {"fixed": "p"}}})", 400, "instance.row.rising"},
      {R"({"instance": {"index": 0}, "desired": {"class": "medium"}})", 400, "desired.class"},
      {R"({"instance": {"index": 0}, "desired": {"class": "high", "threshold": 0}})", 400, "desired.threshold"},
      {R"({"instance": {"index": 0}, "desired": {"class": "high", "threshold": 1.5}})", 400, "desired.threshold"},
      {R"({"instance": {"index": 0}, "modules": [2, 3]})", 400, "modules"},
      {R"({"instance": {"index": 0}, "modules": [1, 4]})", 400, "preferences"},
      {R"({"instance": {"index": 0}, "n": 0})", 400, "n"},
      {R"({"instance": {"index": 0}, "n": 1001})", 400, "n"},
      {R"({"instance": {"index": 0}, "seed": "x"})", 400, "seed"},
      {R"({"instance": {"index": 0}, "preferences": {"height": {"op": "fix"}}})", 400, "preferences.height"},
      {R"({"instance": {"index": 0}, "preferences": {"fixed": {"op": "range", "lb": 0, "ub": 1}}})", 422,
       "preferences.fixed.op"},
  };
  for (const auto& c : cases) {
    const auto r = service_->explain(c.body);
    EXPECT_EQ(r.status, c.status) << c.body << " -> " << r.body;
    if (r.status >= 400) {
      EXPECT_EQ(field(r), c.field) << c.body;
      EXPECT_FALSE(body(r)["error"]["message"].get<std::string>().empty());
    }
  }
}

TEST_F(Service, UnfittedModulesAre422) {
  auto [train, test] = split(fixtures::actionable(200), 0.8, 7);
  auto f = train_reference(train, ReferenceKind::nearest_centroid, 0);
  FitConfig cfg;
  cfg.modules = ModuleSet::parse("1");
  auto e = Explainer::fit(train, f, cfg);
  e.set_test(std::move(test));
  RecourseService svc(std::make_shared<const Explainer>(std::move(e)), "h");
  const auto r = svc.explain(R"({"instance": {"index": 0}, "modules": [1, 2]})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(field(r), "modules");
}

TEST_F(Service, OverHttp) {
  httplib::Server svr;
  service_->mount(svr);
  const int port = svr.bind_to_any_port("127.0.0.1");
  std::thread t([&] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);
  auto h = cli.Get("/health");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(h->get_header_value("Access-Control-Allow-Origin"), "*");
  auto page = cli.Get("/instances?split=test&offset=1&limit=2");
  ASSERT_TRUE(page);
  EXPECT_EQ(json::parse(page->body)["rows"].size(), 2u);
  auto bad = cli.Get("/instances?limit=-3");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["error"]["field"], "limit");
  auto ex = cli.Post("/explain", kExplain, "application/json");
  ASSERT_TRUE(ex);
  EXPECT_EQ(ex->status, 200);
  EXPECT_EQ(ex->body, service_->explain(kExplain).body);
  EXPECT_TRUE(ex->has_header("X-Elapsed-Ms"));
  auto nowhere = cli.Get("/nowhere");
  ASSERT_TRUE(nowhere);
  EXPECT_EQ(nowhere->status, 404);
  EXPECT_EQ(json::parse(nowhere->body)["error"]["field"], "path");
  auto opt = cli.Options("/explain");
  ASSERT_TRUE(opt);
  EXPECT_EQ(opt->status, 204);
  svr.stop();
  t.join();
}
