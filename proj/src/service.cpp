#include "dipsent/service.hpp"

#include <httplib.h>

#include <charconv>
#include <semaphore>
#include <sstream>

#include "dipsent/error.hpp"
#include "dipsent/records.hpp"

namespace dipsent {

// ---------------------------------------------------------------- RunStore

namespace {

std::optional<std::uint64_t> run_number(std::string_view id) {
  constexpr std::string_view prefix = "run-";
  if (!id.starts_with(prefix)) return std::nullopt;
  id.remove_prefix(prefix.size());
  std::uint64_t n = 0;
  auto [p, ec] = std::from_chars(id.data(), id.data() + id.size(), n);
  if (ec != std::errc() || p != id.data() + id.size()) return std::nullopt;
  return n;
}

}  // namespace

RunStore::RunStore(std::filesystem::path root)
    : root_(std::move(root)), log_path_(root_ / "runs.jsonl") {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create store " + root_.string() + ": " + ec.message());

  std::uint64_t good_end = 0;
  {
    std::ifstream in(log_path_, std::ios::binary);
    std::string line;
    std::uint64_t offset = 0;
    std::size_t lineno = 0;
    while (in) {
      if (!std::getline(in, line)) break;
      ++lineno;
      const bool complete = !in.eof();
      const auto next = offset + line.size() + (complete ? 1 : 0);
      if (!complete) break;  // interrupted write; dropped below
      if (!line.empty()) {
        json j;
        try {
          j = json::parse(line);
        } catch (const json::exception& e) {
          throw Error(ErrorCode::Parse, log_path_.string() + ": " + e.what(), {}, lineno);
        }
        const auto id = j.at("run_id").get<std::string>();
        if (index_.contains(id)) {
          throw Error(ErrorCode::DuplicateId, "duplicate run id in store: " + id, {id}, lineno);
        }
        index_.emplace(id, offset);
        order_.push_back(id);
        if (auto n = run_number(id); n && *n > counter_) counter_ = *n;
      }
      offset = next;
      good_end = offset;
    }
  }
  if (std::filesystem::exists(log_path_) && std::filesystem::file_size(log_path_) != good_end) {
    std::filesystem::resize_file(log_path_, good_end);
  }
  end_offset_ = good_end;
  out_.open(log_path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorCode::Io, "cannot open " + log_path_.string());
}

std::string RunStore::append(const CounterfactualRun& run) {
  const std::string line = json(run).dump();
  std::lock_guard write_lock(write_mu_);
  {
    std::shared_lock read_lock(mu_);
    if (index_.contains(run.run_id)) {
      throw Error(ErrorCode::DuplicateId, "run id already stored: " + run.run_id, {run.run_id});
    }
  }
  out_ << line << '\n';
  out_.flush();
  if (!out_) {
    out_.clear();
    throw Error(ErrorCode::Io, "write to " + log_path_.string() + " failed");
  }
  std::unique_lock lock(mu_);
  index_.emplace(run.run_id, end_offset_);
  order_.push_back(run.run_id);
  end_offset_ += line.size() + 1;
  return line;
}

std::optional<std::string> RunStore::read_at(std::uint64_t offset) const {
  std::ifstream in(log_path_, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(offset));
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  return line;
}

std::optional<std::string> RunStore::get_line(std::string_view run_id) const {
  std::uint64_t offset = 0;
  {
    std::shared_lock lock(mu_);
    auto it = index_.find(run_id);
    if (it == index_.end()) return std::nullopt;
    offset = it->second;
  }
  return read_at(offset);
}

std::optional<CounterfactualRun> RunStore::get(std::string_view run_id) const {
  auto line = get_line(run_id);
  if (!line) return std::nullopt;
  return json::parse(*line).get<CounterfactualRun>();
}

std::vector<CounterfactualRun> RunStore::list() const {
  std::vector<std::uint64_t> offsets;
  {
    std::shared_lock lock(mu_);
    offsets.reserve(order_.size());
    for (const auto& id : order_) offsets.push_back(index_.find(id)->second);
  }
  std::vector<CounterfactualRun> runs;
  runs.reserve(offsets.size());
  for (auto off : offsets) {
    if (auto line = read_at(off)) runs.push_back(json::parse(*line).get<CounterfactualRun>());
  }
  return runs;
}

std::size_t RunStore::size() const {
  std::shared_lock lock(mu_);
  return order_.size();
}

std::string RunStore::next_run_id() {
  for (;;) {
    const auto n = ++counter_;
    std::string digits = std::to_string(n);
    if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
    std::string id = "run-" + digits;
    std::shared_lock lock(mu_);
    if (!index_.contains(id)) return id;
  }
}

// ----------------------------------------------------------------- Service

std::string sse_event(std::string_view event, std::string_view data) {
  std::string out;
  out.reserve(event.size() + data.size() + 16);
  out.append("event: ").append(event).append("\n");
  std::size_t start = 0;
  while (true) {
    const auto nl = data.find('\n', start);
    out.append("data: ").append(data.substr(start, nl - start)).append("\n");
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  out.append("\n");
  return out;
}

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Validation:
    case ErrorCode::Parse:
    case ErrorCode::EmptyThread:
    case ErrorCode::ZeroWeight:
    case ErrorCode::Configuration:
      return 400;
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::DuplicateId:
      return 409;
    case ErrorCode::OracleRejected:
    case ErrorCode::OracleUnavailable:
    case ErrorCode::OracleProtocol:
    case ErrorCode::RewriteOutOfBand:
    case ErrorCode::RewriteEmpty:
      return 502;
    default:
      return 500;
  }
}

json error_body(ErrorCode code, std::string_view message) {
  return {{"error", {{"code", code_name(code)}, {"message", message}}}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, std::string_view message) {
  send_json(res, http_status(code), error_body(code, message));
}

json parse_body(const httplib::Request& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("request body is not JSON: ") + e.what());
  }
  if (!body.is_object()) throw Error(ErrorCode::Validation, "request body must be an object");
  return body;
}

std::string required_text(const json& body) {
  auto it = body.find("text");
  if (it == body.end() || !it->is_string()) {
    throw Error(ErrorCode::Validation, "field 'text' must be a string");
  }
  auto text = it->get<std::string>();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::Validation, "field 'text' must not be empty");
  }
  return text;
}

ClassThresholds thresholds_from(const json& body, ClassThresholds base) {
  if (auto it = body.find("thresholds"); it != body.end()) {
    if (!it->is_object() || !it->contains("tau") || !(*it)["tau"].is_number()) {
      throw Error(ErrorCode::Validation, "thresholds must be {\"tau\": number}");
    }
    base.tau = (*it)["tau"].get<double>();
  }
  validate(base);
  return base;
}

ClassSet targets_from(const json& body, ClassSet fallback) {
  for (const char* key : {"target_classes", "target_class"}) {
    if (auto it = body.find(key); it != body.end()) {
      try {
        return parse_class_set(*it);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::Validation, std::string("invalid ") + key + ": " + e.what());
      }
    }
  }
  return fallback;
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
  } catch (const json::exception& e) {
    send_error(res, ErrorCode::Validation, e.what());
  } catch (const std::exception& e) {
    send_error(res, ErrorCode::Io, e.what());
  }
}

json run_summary(const CounterfactualRun& run) {
  json j = {
      {"run_id", run.run_id},
      {"status", run.status},
      {"target_classes", run.target_classes},
      {"steps", run.records.size()},
      {"started_at", run.provenance.started_at},
  };
  j["event_id"] = run.event_id ? json(*run.event_id) : json(nullptr);
  j["original_class"] = run.original_class ? json(*run.original_class) : json(nullptr);
  if (run.status == RunStatus::Success && !run.records.empty()) {
    j["achieving_category"] = run.records.back().category;
  } else {
    j["achieving_category"] = nullptr;
  }
  return j;
}

}  // namespace

struct Service::Impl {
  Impl(ServiceOptions o, std::shared_ptr<const SentimentOracle> orc,
       std::shared_ptr<const Rewriter> rw, std::shared_ptr<RunStore> st)
      : options(std::move(o)),
        oracle(std::move(orc)),
        rewriter(std::move(rw)),
        store(std::move(st)),
        chains(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options.max_concurrent_chains))) {
    const auto threads = std::max<std::size_t>(2, options.http_threads);
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    routes();
  }

  void routes();
  void predict(const httplib::Request& req, httplib::Response& res);
  void counterfactual(const httplib::Request& req, httplib::Response& res);
  void ablation(const httplib::Request& req, httplib::Response& res);
  void step(const httplib::Request& req, httplib::Response& res);
  void registry(httplib::Response& res);
  void runs(const httplib::Request& req, httplib::Response& res);
  void run_by_id(const httplib::Request& req, httplib::Response& res);
  void config(httplib::Response& res);

  ServiceOptions options;
  std::shared_ptr<const SentimentOracle> oracle;
  std::shared_ptr<const Rewriter> rewriter;
  std::shared_ptr<RunStore> store;
  std::counting_semaphore<1024> chains;
  httplib::Server server;
};

void Service::Impl::routes() {
  server.Post("/api/predict", [this](const auto& req, auto& res) { predict(req, res); });
  server.Post("/api/counterfactual",
              [this](const auto& req, auto& res) { counterfactual(req, res); });
  server.Post("/api/ablation", [this](const auto& req, auto& res) { ablation(req, res); });
  server.Post("/api/step", [this](const auto& req, auto& res) { step(req, res); });
  server.Get("/api/registry", [this](const auto&, auto& res) { registry(res); });
  server.Get("/api/runs", [this](const auto& req, auto& res) { runs(req, res); });
  server.Get(R"(/api/runs/([^/]+))", [this](const auto& req, auto& res) { run_by_id(req, res); });
  server.Get("/api/config", [this](const auto&, auto& res) { config(res); });
  server.Options(R"(/api/.*)", [](const auto&, auto& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

void Service::Impl::predict(const httplib::Request& req, httplib::Response& res) {
  guarded(res, [&] {
    const auto body = parse_body(req);
    const auto text = required_text(body);
    const auto thresholds = thresholds_from(body, options.engine.thresholds);
    const auto probs = oracle->predict(text);
    const double score = compound_score(probs);
    send_json(res, 200,
              {{"probs", probs}, {"score", score}, {"class", classify(score, thresholds)}});
  });
}

void Service::Impl::counterfactual(const httplib::Request& req, httplib::Response& res) {
  // Everything that can be rejected is checked before the stream opens.
  RunRequest request;
  EngineOptions engine = options.engine;
  try {
    const auto body = parse_body(req);
    request.text = required_text(body);
    request.targets = targets_from(body, options.default_targets);
    request.order = options.category_order;
    if (auto it = body.find("category_order"); it != body.end()) {
      request.order = it->get<std::vector<CounterfactualCategory>>();
    }
    if (auto it = body.find("original_class"); it != body.end() && !it->is_null()) {
      request.original_class = it->get<SentimentClass>();
    }
    if (auto it = body.find("event_id"); it != body.end() && !it->is_null()) {
      request.event_id = it->get<std::string>();
    }
    if (auto it = body.find("selection"); it != body.end()) {
      engine.selection = parse_selection(it->get<std::string>());
    }
    if (auto it = body.find("seed"); it != body.end()) {
      engine.seed = it->get<std::uint64_t>();
    }
    engine.thresholds = thresholds_from(body, engine.thresholds);
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
    return;
  } catch (const json::exception& e) {
    send_error(res, ErrorCode::Validation, e.what());
    return;
  }
  request.run_id = store->next_run_id();

  res.set_header("Cache-Control", "no-cache");
  res.set_chunked_content_provider(
      "text/event-stream",
      [this, request = std::move(request), engine = std::move(engine)](
          std::size_t, httplib::DataSink& sink) {
        chains.acquire();
        struct Release {
          std::counting_semaphore<1024>& s;
          ~Release() { s.release(); }
        } release{chains};

        // Keep computing when the client goes away so the run still lands
        // in the store.
        bool open = true;
        auto emit = [&](std::string_view event, const json& data) {
          if (!open) return;
          const auto chunk = sse_event(event, data.dump());
          open = sink.write(chunk.data(), chunk.size());
        };

        emit("start", {{"run_id", request.run_id}});
        try {
          const auto run = generate_counterfactual(
              request, *rewriter, *oracle, engine,
              [&](const TransformationRecord& record) { emit("step", json(record)); });
          store->append(run);
          json header = run;
          header.erase("records");
          emit("end", header);
        } catch (const Error& e) {
          emit("error", error_body(e.code(), e.what()));
        }
        if (open) sink.done();
        return open;
      });
}

void Service::Impl::ablation(const httplib::Request& req, httplib::Response& res) {
  guarded(res, [&] {
    const auto body = parse_body(req);
    AblationRequest request;
    request.text = required_text(body);
    request.targets = targets_from(body, options.default_targets);
    if (auto it = body.find("modifications"); it != body.end()) {
      for (const auto& key : it->get<std::vector<std::string>>()) {
        try {
          request.modifications.push_back(&find_modification(key));
        } catch (const Error& e) {
          throw Error(ErrorCode::Validation, e.what());
        }
      }
    } else {
      for (const auto& m : modification_registry()) request.modifications.push_back(&m);
    }
    if (auto it = body.find("original_class"); it != body.end() && !it->is_null()) {
      request.original_class = it->get<SentimentClass>();
    }
    EngineOptions engine = options.engine;
    engine.thresholds = thresholds_from(body, engine.thresholds);

    chains.acquire();
    std::vector<AblationResult> results;
    try {
      results = run_ablation(request, *rewriter, *oracle, engine);
    } catch (...) {
      chains.release();
      throw;
    }
    chains.release();
    std::size_t successful = 0;
    for (const auto& r : results) successful += r.success() ? 1 : 0;
    send_json(res, 200,
              {{"results", results}, {"successful", successful}, {"total", results.size()}});
  });
}

void Service::Impl::step(const httplib::Request& req, httplib::Response& res) {
  guarded(res, [&] {
    const auto body = parse_body(req);
    TransformationRecord record;
    record.text_before = required_text(body);
    const ModificationType* modification = nullptr;
    try {
      modification = &find_modification(body.at("modification").get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorCode::Validation, e.what());
    }
    record.step_index = body.value("step_index", 1);
    if (record.step_index < 1) throw Error(ErrorCode::Validation, "step_index must be >= 1");
    const auto thresholds = thresholds_from(body, options.engine.thresholds);
    record.category = modification->category;
    record.modification = modification->key;
    record.text_after = rewriter->rewrite(record.text_before, *modification);
    record.predicted_probs = oracle->predict(record.text_after);
    record.predicted_score = compound_score(record.predicted_probs);
    record.predicted_class = classify(record.predicted_score, thresholds);
    send_json(res, 200, record);
  });
}

void Service::Impl::registry(httplib::Response& res) {
  json cats = json::array();
  for (auto c : kAllCategories) cats.push_back(c);
  json mods = json::array();
  for (const auto& m : modification_registry()) {
    mods.push_back({{"key", m.key},
                    {"category", m.category},
                    {"instruction", m.instruction},
                    {"label", m.label}});
  }
  send_json(res, 200, {{"categories", cats}, {"modifications", mods}});
}

void Service::Impl::runs(const httplib::Request& req, httplib::Response& res) {
  guarded(res, [&] {
    std::optional<RunStatus> status;
    std::optional<SentimentClass> target;
    std::optional<CounterfactualCategory> category;
    try {
      if (req.has_param("status")) status = parse_run_status(req.get_param_value("status"));
      if (req.has_param("target")) target = parse_sentiment_class(req.get_param_value("target"));
      if (req.has_param("category")) category = parse_category(req.get_param_value("category"));
    } catch (const Error& e) {
      throw Error(ErrorCode::Validation, e.what());
    }
    json out = json::array();
    for (const auto& run : store->list()) {
      if (status && run.status != *status) continue;
      if (target && !run.target_classes.contains(*target)) continue;
      if (category) {
        if (run.status != RunStatus::Success || run.records.empty() ||
            run.records.back().category != *category) {
          continue;
        }
      }
      out.push_back(run_summary(run));
    }
    send_json(res, 200, {{"runs", out}});
  });
}

void Service::Impl::run_by_id(const httplib::Request& req, httplib::Response& res) {
  guarded(res, [&] {
    const auto id = req.matches[1].str();
    auto line = store->get_line(id);
    if (!line) throw Error(ErrorCode::NotFound, "no run with id " + id, {id});
    res.status = 200;
    res.set_content(*line, "application/json");
  });
}

void Service::Impl::config(httplib::Response& res) {
  send_json(res, 200,
            {{"thresholds", {{"tau", options.engine.thresholds.tau}}},
             {"selection", options.engine.selection},
             {"category_order", options.category_order},
             {"default_targets", options.default_targets},
             {"oracle", oracle->describe()},
             {"rewriter", rewriter->describe()}});
}

Service::Service(ServiceOptions options, std::shared_ptr<const SentimentOracle> oracle,
                 std::shared_ptr<const Rewriter> rewriter, std::shared_ptr<RunStore> store)
    : impl_(std::make_unique<Impl>(std::move(options), std::move(oracle), std::move(rewriter),
                                   std::move(store))) {}

Service::~Service() { stop(); }

int Service::bind_to_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool Service::bind(const std::string& host, int port) {
  return impl_->server.bind_to_port(host, port);
}

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace dipsent
