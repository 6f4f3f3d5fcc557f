#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "dipsent/engine.hpp"
#include "dipsent/oracle.hpp"
#include "dipsent/rewriter.hpp"

namespace dipsent {

/// Append-only run history backed by `<root>/runs.jsonl`. The id -> offset
/// index is rebuilt from the file on open.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root);

  /// Persists and returns the exact line written (without newline).
  /// Throws DuplicateId when the run id is taken, Io on write failure.
  std::string append(const CounterfactualRun& run);

  std::optional<std::string> get_line(std::string_view run_id) const;
  std::optional<CounterfactualRun> get(std::string_view run_id) const;
  /// All runs in insertion order.
  std::vector<CounterfactualRun> list() const;
  std::size_t size() const;

  /// Fresh id of the form run-000001.
  std::string next_run_id();

  const std::filesystem::path& log_path() const noexcept { return log_path_; }

 private:
  std::optional<std::string> read_at(std::uint64_t offset) const;

  std::filesystem::path root_;
  std::filesystem::path log_path_;
  mutable std::shared_mutex mu_;
  std::mutex write_mu_;
  std::ofstream out_;
  std::uint64_t end_offset_ = 0;
  std::map<std::string, std::uint64_t, std::less<>> index_;
  std::vector<std::string> order_;
  std::atomic<std::uint64_t> counter_{0};
};

struct ServiceOptions {
  EngineOptions engine;
  std::vector<CounterfactualCategory> category_order = default_category_order();
  ClassSet default_targets{SentimentClass::Neutral, SentimentClass::Positive};
  /// Counterfactual chains running at the same time; others wait.
  std::size_t max_concurrent_chains = 4;
  std::size_t http_threads = 8;
};

/// JSON-over-HTTP front end:
///   POST /api/predict          {"text"} -> probs, score, class
///   POST /api/counterfactual   server-sent events: start, step..., end
///   POST /api/ablation         {"text", "modifications"?} -> results
///   POST /api/step             {"text", "modification"} -> one record
///   GET  /api/registry         categories and modification types
///   GET  /api/runs             summaries, filters status/target/category
///   GET  /api/runs/{id}        stored run, byte-identical to the log line
///   GET  /api/config           active thresholds and order
/// Errors are {"error": {"code", "message"}}.
class Service {
 public:
  Service(ServiceOptions options, std::shared_ptr<const SentimentOracle> oracle,
          std::shared_ptr<const Rewriter> rewriter, std::shared_ptr<RunStore> store);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Returns the bound port, or -1.
  int bind_to_any_port(const std::string& host);
  bool bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Formats one server-sent event.
std::string sse_event(std::string_view event, std::string_view data);

}  // namespace dipsent
