#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dipsent/corpus.hpp"
#include "dipsent/error.hpp"
#include "dipsent/oracle.hpp"
#include "dipsent/rewriter.hpp"
#include "dipsent/sentiment.hpp"

namespace dipsent {

inline constexpr int kRunLogSchemaVersion = 1;

/// Source of provenance timestamps.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::string now() const = 0;
};

/// UTC wall clock, ISO-8601 with millisecond precision.
class SystemClock final : public Clock {
 public:
  std::string now() const override;
};

/// Always returns the same instant; used for reproducible logs.
class FixedClock final : public Clock {
 public:
  explicit FixedClock(std::string instant) : instant_(std::move(instant)) {}
  std::string now() const override { return instant_; }

 private:
  std::string instant_;
};

enum class RunStatus { Success, Failure, Error };
std::string_view to_string(RunStatus s) noexcept;
RunStatus parse_run_status(std::string_view name);

/// How a modification type is picked inside the current category.
enum class SelectionStrategy {
  FirstInRegistry,
  SeededRandom,
  /// Tries each type of the category on the current text and keeps the
  /// first that reaches the target; falls back to the first type's output.
  /// Only the kept transformation is recorded.
  Exhaustive,
};
std::string_view to_string(SelectionStrategy s) noexcept;
SelectionStrategy parse_selection(std::string_view name);

struct TransformationRecord {
  int step_index = 0;
  CounterfactualCategory category = CounterfactualCategory::Participants;
  std::string modification;
  std::string text_before;
  std::string text_after;
  SentimentProbs predicted_probs;
  SentimentClass predicted_class = SentimentClass::Neutral;
  double predicted_score = 0.0;

  friend bool operator==(const TransformationRecord&, const TransformationRecord&) = default;
};

struct RunError {
  ErrorCode code = ErrorCode::Validation;
  std::string message;
  /// 1-based step during which the failure happened; 0 before any step.
  int step = 0;

  friend bool operator==(const RunError&, const RunError&) = default;
};

struct Provenance {
  std::string started_at;
  std::string finished_at;
  std::string oracle;
  std::string rewriter;
  double tau = 0.1;
  std::uint64_t seed = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct CounterfactualRun {
  std::string run_id;
  std::optional<std::string> event_id;
  std::string original_text;
  std::optional<SentimentClass> original_class;
  ClassSet target_classes;
  std::vector<CounterfactualCategory> category_order;
  SelectionStrategy selection = SelectionStrategy::FirstInRegistry;
  std::vector<TransformationRecord> records;
  RunStatus status = RunStatus::Failure;
  std::string final_text;
  std::optional<RunError> error;
  Provenance provenance;

  friend bool operator==(const CounterfactualRun&, const CounterfactualRun&) = default;
};

struct EngineOptions {
  ClassThresholds thresholds;
  SelectionStrategy selection = SelectionStrategy::FirstInRegistry;
  std::uint64_t seed = 0;
  /// Predict the original text first and stop without modifying when it
  /// already has a target class. Off by default; such runs succeed with
  /// zero records and are rejected by the success analytics.
  bool precheck = false;
  std::shared_ptr<const Clock> clock = std::make_shared<SystemClock>();
};

struct RunRequest {
  std::string text;
  ClassSet targets;
  std::vector<CounterfactualCategory> order = default_category_order();
  std::optional<SentimentClass> original_class;
  std::string run_id;
  std::optional<std::string> event_id;
};

using StepObserver = std::function<void(const TransformationRecord&)>;

/// Category-sequential counterfactual sweep. Each step rewrites the current
/// text with one modification of the next category, predicts the result,
/// and stops at the first prediction inside the target set. Rewriter and
/// oracle failures end the run with status Error and the completed records.
/// `on_step` sees every record as soon as it is appended.
CounterfactualRun generate_counterfactual(const RunRequest& request, const Rewriter& rewriter,
                                          const SentimentOracle& oracle,
                                          const EngineOptions& options,
                                          const StepObserver& on_step = {});

/// Checks the structural invariants of a run; returns a description of the
/// first violation, or nothing.
std::optional<std::string> check_run_invariants(const CounterfactualRun& run);

struct AblationResult {
  std::optional<std::string> event_id;
  std::string modification;
  CounterfactualCategory category = CounterfactualCategory::Participants;
  std::string original_text;
  std::string modified_text;
  std::optional<SentimentClass> original_class;
  /// Absent when the modification errored.
  std::optional<SentimentClass> resulting_class;
  ClassSet target_classes;
  std::optional<RunError> error;
  Provenance provenance;

  bool success() const noexcept {
    return resulting_class && target_classes.contains(*resulting_class);
  }

  friend bool operator==(const AblationResult&, const AblationResult&) = default;
};

struct AblationRequest {
  std::string text;
  std::vector<const ModificationType*> modifications;
  ClassSet targets{SentimentClass::Neutral, SentimentClass::Positive};
  std::optional<SentimentClass> original_class;
  std::optional<std::string> event_id;
};

/// Applies each modification to the original text on its own. A failing
/// modification is recorded in its result and the rest still run.
std::vector<AblationResult> run_ablation(const AblationRequest& request,
                                         const Rewriter& rewriter,
                                         const SentimentOracle& oracle,
                                         const EngineOptions& options);

/// One JSON object per line, each carrying `schema_version` and `type`.
/// Opening an existing log drops a trailing partial line left by an
/// interrupted write. Appends are serialized and flushed per record.
class RunLog {
 public:
  explicit RunLog(std::filesystem::path path);

  void append(const CounterfactualRun& run);
  void append(const AblationResult& result);

  const std::filesystem::path& path() const noexcept { return path_; }
  bool has_run_for(std::string_view event_id) const;
  bool has_ablation_for(std::string_view event_id, std::string_view modification) const;

 private:
  void write_line(const std::string& line);

  std::filesystem::path path_;
  std::ofstream out_;
  mutable std::mutex mu_;
  std::set<std::string, std::less<>> run_events_;
  std::set<std::pair<std::string, std::string>, std::less<>> ablation_events_;
};

std::vector<CounterfactualRun> read_runs(const std::filesystem::path& path);
std::vector<AblationResult> read_ablation_results(const std::filesystem::path& path);

enum class BatchMode { Sequential, Ablation };
std::string_view to_string(BatchMode m) noexcept;

struct BatchOptions {
  BatchMode mode = BatchMode::Sequential;
  /// Events whose dataset label is in this set are processed.
  ClassSet filter{SentimentClass::Negative};
  ClassSet targets{SentimentClass::Neutral, SentimentClass::Positive};
  std::vector<CounterfactualCategory> order = default_category_order();
  /// Ablation mode only; empty means the whole registry.
  std::vector<const ModificationType*> modifications;
  EngineOptions engine;
  /// Chains executed concurrently.
  std::size_t concurrency = 4;
};

struct BatchSummary {
  std::size_t matched = 0;
  std::size_t already_logged = 0;
  std::size_t written = 0;
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::size_t errors = 0;
};

/// Processes matching events in ascending event-id order and appends one
/// record per run (or per ablation result) to `log`, skipping work the log
/// already holds. Per-event errors are logged and counted, not thrown.
BatchSummary run_batch(std::span<const EventSentimentPair> corpus, const Rewriter& rewriter,
                       const SentimentOracle& oracle, const BatchOptions& options,
                       RunLog& log);

}  // namespace dipsent
