#include <doctest.h>
#include <httplib.h>

#include <chrono>
#include <future>
#include <thread>

#include "dipsent/error.hpp"
#include "dipsent/records.hpp"
#include "dipsent/service.hpp"
#include "support.hpp"

using namespace dipsent;

namespace {

struct SseEvent {
  std::string event;
  std::string data;
};

std::vector<SseEvent> parse_sse(const std::string& body) {
  std::vector<SseEvent> events;
  SseEvent current;
  std::istringstream in(body);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) {
      if (!current.event.empty()) events.push_back(current);
      current = {};
    } else if (line.starts_with("event: ")) {
      current.event = line.substr(7);
    } else if (line.starts_with("data: ")) {
      if (!current.data.empty()) current.data += '\n';
      current.data += line.substr(6);
    }
  }
  return events;
}

/// Blocks its second call until released; lets a test observe a step event
/// while the chain is still running.
class GateOracle final : public SentimentOracle {
 public:
  SentimentProbs predict(std::string_view) const override {
    if (++calls == 2) gate.wait_for(std::chrono::seconds(10));
    return test::kNegativeProbs;
  }
  std::string describe() const override { return "gate"; }
  mutable std::atomic<int> calls{0};
  std::shared_future<void> gate;
};

class Fixture {
 public:
  explicit Fixture(std::shared_ptr<const SentimentOracle> oracle = test::shipped_lexicon(),
                   std::shared_ptr<const Rewriter> rewriter = test::shipped_mock(0),
                   std::string name = "service")
      : dir_(test::fresh_dir(name)), store_(std::make_shared<RunStore>(dir_)) {
    ServiceOptions options;
    options.engine.clock = std::make_shared<FixedClock>("2031-01-01T00:00:00.000Z");
    service_ = std::make_unique<Service>(options, std::move(oracle), std::move(rewriter), store_);
    port_ = service_->bind_to_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { service_->listen_after_bind(); });
    service_->wait_until_ready();
  }
  ~Fixture() {
    service_->stop();
    thread_.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30, 0);
    return c;
  }
  httplib::Result post(const std::string& path, const json& body) const {
    return client().Post(path, body.dump(), "application/json");
  }
  httplib::Result get(const std::string& path) const { return client().Get(path); }

  RunStore& store() { return *store_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::shared_ptr<RunStore> store_;
  std::unique_ptr<Service> service_;
  int port_ = -1;
  std::thread thread_;
};

std::string negative_text() {
  const std::vector<int> design{6};
  return narrative_text(test::synthetic_corpus(design).posts[0]);
}

void check_error(const httplib::Result& res, int status, std::string_view code) {
  REQUIRE(res);
  CHECK(res->status == status);
  const auto body = json::parse(res->body);
  CHECK(body["error"]["code"] == code);
  CHECK(body["error"]["message"].is_string());
}

}  // namespace

TEST_CASE("sse framing") {
  CHECK(sse_event("step", "{}") == "event: step\ndata: {}\n\n");
  CHECK(sse_event("x", "a\nb") == "event: x\ndata: a\ndata: b\n\n");
}

TEST_CASE("run store survives restarts and drops partial lines") {
  const auto dir = test::fresh_dir("store");
  test::ConstantOracle oracle(test::kNegativeProbs);
  test::TagRewriter rewriter;
  EngineOptions options;
  options.clock = std::make_shared<FixedClock>("t");
  std::string first_line;
  {
    RunStore store(dir);
    CHECK(store.size() == 0);
    RunRequest request;
    request.text = "x";
    request.targets = ClassSet{SentimentClass::Positive};
    request.run_id = store.next_run_id();
    CHECK(request.run_id == "run-000001");
    first_line = store.append(generate_counterfactual(request, rewriter, oracle, options));
    request.run_id = store.next_run_id();
    store.append(generate_counterfactual(request, rewriter, oracle, options));
    CHECK_THROWS_AS(store.append(generate_counterfactual(request, rewriter, oracle, options)),
                    Error);
  }
  const auto path = dir / "runs.jsonl";
  const auto intact = test::read_file(path);
  test::write_file(path, intact + R"({"run_id":"run-000003","stat)");
  {
    RunStore store(dir);
    CHECK(store.size() == 2);
    CHECK(test::read_file(path) == intact);
    CHECK(store.get_line("run-000001") == first_line);
    CHECK(store.get("run-000002")->status == RunStatus::Failure);
    CHECK_FALSE(store.get_line("run-999"));
    CHECK(store.next_run_id() == "run-000003");
    const auto all = store.list();
    REQUIRE(all.size() == 2);
    CHECK(all[0].run_id == "run-000001");
  }
  test::write_file(path, intact + "not json\n");
  CHECK_THROWS_AS(RunStore{dir}, Error);
}

TEST_CASE("predict, registry and config endpoints") {
  Fixture f;
  SUBCASE("predict") {
    const auto res = f.post("/api/predict", {{"text", "a warm and constructive meeting"}});
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
    const auto body = json::parse(res->body);
    CHECK(body["class"] == "Positive");
    CHECK(body["score"].get<double>() == doctest::Approx(0.4));
    CHECK(body["probs"]["p_pos"].get<double>() == doctest::Approx(0.6));
    const auto strict = f.post("/api/predict", {{"text", "a warm and constructive meeting"},
                                                {"thresholds", {{"tau", 0.5}}}});
    CHECK(json::parse(strict->body)["class"] == "Neutral");
  }
  SUBCASE("registry") {
    const auto res = f.get("/api/registry");
    REQUIRE(res);
    const auto body = json::parse(res->body);
    CHECK(body["categories"].size() == 5);
    REQUIRE(body["modifications"].size() == 14);
    CHECK(body["modifications"][6]["key"] == "communication.tone");
    CHECK(body["modifications"][6]["category"] == "Communication");
    CHECK(body["modifications"][6]["instruction"].get<std::string>().starts_with("Modify the tone"));
  }
  SUBCASE("config") {
    const auto body = json::parse(f.get("/api/config")->body);
    CHECK(body["thresholds"]["tau"] == 0.1);
    CHECK(body["category_order"][1] == "Process");
    CHECK(body["default_targets"] == json::array({"Neutral", "Positive"}));
    CHECK(body["rewriter"] == "mock(seed=0,entries=14)");
  }
  SUBCASE("cors preflight") {
    const auto res = f.client().Options("/api/counterfactual");
    REQUIRE(res);
    CHECK(res->status == 204);
    CHECK(res->get_header_value("Access-Control-Allow-Methods").find("POST") !=
          std::string::npos);
  }
  SUBCASE("validation_error") {
    check_error(f.post("/api/predict", {{"text", "   "}}), 400, "validation_error");
    check_error(f.post("/api/predict", {{"txt", "x"}}), 400, "validation_error");
    check_error(f.client().Post("/api/predict", "{oops", "application/json"), 400, "validation_error");
    check_error(f.post("/api/predict", {{"text", "x"}, {"thresholds", {{"tau", 2}}}}), 400,
                "validation_error");
  }
}

TEST_CASE("counterfactual stream reconstructs the stored run byte for byte") {
  Fixture f;
  const auto res = f.post("/api/counterfactual", {{"text", negative_text()},
                                                  {"target_classes", {"Neutral"}},
                                                  {"original_class", "Negative"},
                                                  {"event_id", "evt-001"}});
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type").starts_with("text/event-stream"));
  const auto events = parse_sse(res->body);
  REQUIRE(events.size() == 4);
  CHECK(events[0].event == "start");
  const auto run_id = json::parse(events[0].data)["run_id"].get<std::string>();
  CHECK(run_id == "run-000001");
  CHECK(events[1].event == "step");
  CHECK(events[2].event == "step");
  CHECK(events[3].event == "end");

  json rebuilt = json::parse(events[3].data);
  CHECK_FALSE(rebuilt.contains("records"));
  CHECK(rebuilt["status"] == "SUCCESS");
  json steps = json::array();
  for (std::size_t i = 1; i <= 2; ++i) steps.push_back(json::parse(events[i].data));
  rebuilt["records"] = steps;

  const auto stored = f.get("/api/runs/" + run_id);
  REQUIRE(stored);
  CHECK(stored->status == 200);
  CHECK(rebuilt.dump() == stored->body);
  CHECK(stored->body == *f.store().get_line(run_id));
  const auto run = json::parse(stored->body).get<CounterfactualRun>();
  CHECK_FALSE(check_run_invariants(run));
  CHECK(run.records[1].predicted_class == SentimentClass::Neutral);
}

TEST_CASE("counterfactual request options") {
  Fixture f;
  SUBCASE("empty order fails with zero steps") {
    const auto res = f.post("/api/counterfactual",
                            {{"text", negative_text()}, {"category_order", json::array()}});
    const auto events = parse_sse(res->body);
    REQUIRE(events.size() == 2);
    const auto end = json::parse(events[1].data);
    CHECK(end["status"] == "FAILURE");
    const auto stored = json::parse(f.get("/api/runs/" + end["run_id"].get<std::string>())->body);
    CHECK(stored["records"].empty());
  }
  SUBCASE("custom order, single target string and selection") {
    const auto res = f.post("/api/counterfactual", {{"text", negative_text()},
                                                    {"target_class", "Positive"},
                                                    {"category_order", {"Context", "Substance"}},
                                                    {"selection", "random"},
                                                    {"seed", 3}});
    const auto events = parse_sse(res->body);
    REQUIRE(events.size() >= 3);
    const auto first = json::parse(events[1].data);
    CHECK(first["category"] == "Context");
    const auto end = json::parse(events.back().data);
    CHECK(end["target_classes"] == json::array({"Positive"}));
    CHECK(end["selection"] == "random");
  }
  SUBCASE("rejections happen before the stream") {
    check_error(f.post("/api/counterfactual", {{"text", ""}}), 400, "validation_error");
    check_error(f.post("/api/counterfactual", {{"text", "x"}, {"target_classes", json::array()}}),
                400, "validation_error");
    check_error(f.post("/api/counterfactual", {{"text", "x"}, {"target_class", "Mixed"}}), 400,
                "validation_error");
    check_error(f.post("/api/counterfactual", {{"text", "x"}, {"category_order", {"Weather"}}}),
                400, "validation_error");
    check_error(f.post("/api/counterfactual", {{"text", "x"}, {"selection", "greedy"}}), 400,
                "validation_error");
    CHECK(f.store().size() == 0);
  }
}

TEST_CASE("steps are streamed before the chain finishes") {
  auto oracle = std::make_shared<GateOracle>();
  std::promise<void> release;
  oracle->gate = release.get_future().share();
  Fixture f(oracle, std::make_shared<test::TagRewriter>(), "service-stream");

  httplib::Request req;
  req.method = "POST";
  req.path = "/api/counterfactual";
  req.body = json{{"text", "x"}}.dump();
  req.set_header("Content-Type", "application/json");
  std::string received;
  bool saw_step_early = false;
  bool released = false;
  req.content_receiver = [&](const char* data, std::size_t n, std::uint64_t, std::uint64_t) {
    received.append(data, n);
    if (!released && received.find("event: step") != std::string::npos) {
      // The second prediction cannot finish before release.
      saw_step_early = received.find("event: end") == std::string::npos && oracle->calls <= 2;
      released = true;
      release.set_value();
    }
    return true;
  };
  auto client = f.client();
  const auto res = client.send(req);
  REQUIRE(res);
  CHECK(saw_step_early);
  const auto events = parse_sse(received);
  REQUIRE(events.size() == 7);
  CHECK(json::parse(events.back().data)["status"] == "FAILURE");
}

TEST_CASE("oracle failure mid-chain ends with an ERROR run") {
  auto failing = std::make_shared<test::FailingOracle>(*test::shipped_lexicon(), 2,
                                                       ErrorCode::OracleUnavailable);
  Fixture f(failing, std::make_shared<test::TagRewriter>(), "service-error");
  const auto events = parse_sse(f.post("/api/counterfactual", {{"text", negative_text()}})->body);
  REQUIRE(events.size() == 3);
  const auto end = json::parse(events[2].data);
  CHECK(end["status"] == "ERROR");
  CHECK(end["error"]["code"] == "oracle_unavailable");
  CHECK(end["error"]["step"] == 2);
}

TEST_CASE("run history filters and lookups") {
  Fixture f;
  f.post("/api/counterfactual", {{"text", negative_text()}});
  f.post("/api/counterfactual", {{"text", negative_text()}, {"category_order", json::array()}});
  f.post("/api/counterfactual", {{"text", negative_text()}, {"target_class", "Positive"}});

  auto runs = [&](const std::string& query) {
    return json::parse(f.get("/api/runs" + query)->body)["runs"];
  };
  const auto all = runs("");
  REQUIRE(all.size() == 3);
  CHECK(all[0]["run_id"] == "run-000001");
  CHECK(all[0]["status"] == "SUCCESS");
  CHECK(all[0]["steps"] == 2);
  CHECK(all[0]["achieving_category"] == "Process");
  CHECK(all[1]["achieving_category"].is_null());
  CHECK(runs("?status=FAILURE").size() == 1);
  CHECK(runs("?target=Neutral").size() == 2);
  CHECK(runs("?category=Process").size() == 1);
  CHECK(runs("?target=Positive").size() == 3);
  CHECK(runs("?status=FAILURE&target=Positive").size() == 1);
  check_error(f.get("/api/runs?status=DONE"), 400, "validation_error");
  check_error(f.get("/api/runs/run-424242"), 404, "not_found");
}

TEST_CASE("ablation and single-step endpoints") {
  Fixture f;
  SUBCASE("ablation over the registry") {
    const auto res = f.post("/api/ablation", {{"text", negative_text()}});
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto body = json::parse(res->body);
    CHECK(body["total"] == 14);
    // nn=6, np=3: still Negative for every type.
    CHECK(body["successful"] == 0);
    CHECK(body["results"][0]["original_text"] == negative_text());
  }
  SUBCASE("selected modifications") {
    const std::vector<int> design{3};
    const auto text = narrative_text(test::synthetic_corpus(design).posts[0]);
    const auto body = json::parse(
        f.post("/api/ablation", {{"text", text}, {"modifications", {"communication.tone"}}})->body);
    CHECK(body["total"] == 1);
    CHECK(body["successful"] == 1);
    check_error(f.post("/api/ablation", {{"text", text}, {"modifications", {"nope"}}}), 400,
                "validation_error");
  }
  SUBCASE("step") {
    const auto res = f.post("/api/step", {{"text", negative_text()},
                                          {"modification", "participants.replace_lead_negotiator"},
                                          {"step_index", 4}});
    REQUIRE(res);
    const auto record = json::parse(res->body).get<TransformationRecord>();
    CHECK(record.step_index == 4);
    CHECK(record.category == CounterfactualCategory::Participants);
    CHECK(record.text_before == negative_text());
    CHECK(record.predicted_class == SentimentClass::Negative);
    check_error(f.post("/api/step", {{"text", "x"}, {"modification", "bogus"}}), 400,
                "validation_error");
    check_error(f.post("/api/step", {{"text", "x"}, {"modification", "context.location"},
                                     {"step_index", 0}}),
                400, "validation_error");
  }
}

TEST_CASE("remote failures map to 502") {
  auto failing = std::make_shared<test::FailingOracle>(*test::shipped_lexicon(), 1,
                                                       ErrorCode::OracleProtocol);
  Fixture f(failing, test::shipped_mock(0), "service-502");
  check_error(f.post("/api/predict", {{"text", "x"}}), 502, "oracle_protocol");
}
