#include "dipsent/engine.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <random>
#include <sstream>

#include "dipsent/parallel.hpp"
#include "dipsent/records.hpp"

namespace dipsent {

namespace {

RunError to_run_error(const std::exception& e, int step) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return {err->code(), err->what(), step};
  }
  return {ErrorCode::Io, std::string("unexpected failure: ") + e.what(), step};
}

Provenance start_provenance(const Rewriter& rewriter, const SentimentOracle& oracle,
                            const EngineOptions& options) {
  Provenance p;
  p.started_at = options.clock->now();
  p.oracle = oracle.describe();
  p.rewriter = rewriter.describe();
  p.tau = options.thresholds.tau;
  p.seed = options.seed;
  return p;
}

struct Attempt {
  const ModificationType* modification;
  std::string text;
  SentimentProbs probs;
  SentimentClass cls;
};

Attempt attempt(const std::string& current, const ModificationType& modification,
                const Rewriter& rewriter, const SentimentOracle& oracle,
                const ClassThresholds& thresholds) {
  Attempt a{&modification, rewriter.rewrite(current, modification), {}, {}};
  if (a.text.empty()) {
    throw Error(ErrorCode::RewriteEmpty,
                "rewriter returned empty text for " + std::string(modification.key));
  }
  a.probs = oracle.predict(a.text);
  a.cls = classify(compound_score(a.probs), thresholds);
  return a;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(std::move(line));
  }
  return lines;
}

template <class T>
std::vector<T> read_records(const std::filesystem::path& path, std::string_view type) {
  std::vector<T> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    try {
      auto j = json::parse(line);
      if (j.at("type").get<std::string>() != type) continue;
      out.push_back(j.get<T>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse,
                  path.string() + " record " + std::to_string(line_no) + ": " + e.what(), {},
                  line_no);
    } catch (const Error& e) {
      throw Error(ErrorCode::Parse,
                  path.string() + " record " + std::to_string(line_no) + ": " + e.what(), {},
                  line_no);
    }
  }
  return out;
}

}  // namespace

std::string SystemClock::now() const {
  const auto t = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(t);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      t.time_since_epoch()).count() % 1000;
  std::tm utc{};
  gmtime_r(&secs, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &utc);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
  return out;
}

std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::Success: return "SUCCESS";
    case RunStatus::Failure: return "FAILURE";
    case RunStatus::Error: return "ERROR";
  }
  return "ERROR";
}

RunStatus parse_run_status(std::string_view name) {
  for (auto s : {RunStatus::Success, RunStatus::Failure, RunStatus::Error}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::Validation, "unknown run status '" + std::string(name) + "'");
}

std::string_view to_string(SelectionStrategy s) noexcept {
  switch (s) {
    case SelectionStrategy::FirstInRegistry: return "first";
    case SelectionStrategy::SeededRandom: return "random";
    case SelectionStrategy::Exhaustive: return "exhaustive";
  }
  return "first";
}

SelectionStrategy parse_selection(std::string_view name) {
  for (auto s : {SelectionStrategy::FirstInRegistry, SelectionStrategy::SeededRandom,
                 SelectionStrategy::Exhaustive}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::Validation, "unknown selection strategy '" + std::string(name) + "'");
}

std::string_view to_string(BatchMode m) noexcept {
  return m == BatchMode::Sequential ? "sequential" : "ablation";
}

CounterfactualRun generate_counterfactual(const RunRequest& request, const Rewriter& rewriter,
                                          const SentimentOracle& oracle,
                                          const EngineOptions& options,
                                          const StepObserver& on_step) {
  if (request.text.empty()) {
    throw Error(ErrorCode::Validation, "original text is empty");
  }
  if (request.targets.empty()) {
    throw Error(ErrorCode::Validation, "target class set is empty");
  }
  validate(options.thresholds);

  CounterfactualRun run;
  run.run_id = request.run_id;
  run.event_id = request.event_id;
  run.original_text = request.text;
  run.original_class = request.original_class;
  run.target_classes = request.targets;
  run.category_order = request.order;
  run.selection = options.selection;
  run.provenance = start_provenance(rewriter, oracle, options);

  auto finish = [&](RunStatus status, std::string final_text) {
    run.status = status;
    run.final_text = std::move(final_text);
    run.provenance.finished_at = options.clock->now();
    return run;
  };

  if (options.precheck) {
    try {
      const auto probs = oracle.predict(request.text);
      run.original_class = classify(compound_score(probs), options.thresholds);
    } catch (const std::exception& e) {
      run.error = to_run_error(e, 0);
      return finish(RunStatus::Error, request.text);
    }
    if (request.targets.contains(*run.original_class)) {
      return finish(RunStatus::Success, request.text);
    }
  }

  std::mt19937_64 rng;
  if (options.selection == SelectionStrategy::SeededRandom) {
    const auto h = stable_hash(request.text);
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                      static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    rng.seed(seq);
  }

  std::string current = request.text;
  for (std::size_t i = 0; i < request.order.size(); ++i) {
    const int step = static_cast<int>(i) + 1;
    const auto candidates = modifications_for(request.order[i]);
    std::optional<Attempt> kept;
    try {
      switch (options.selection) {
        case SelectionStrategy::FirstInRegistry:
          kept = attempt(current, *candidates.front(), rewriter, oracle, options.thresholds);
          break;
        case SelectionStrategy::SeededRandom:
          kept = attempt(current, *candidates[rng() % candidates.size()], rewriter, oracle,
                         options.thresholds);
          break;
        case SelectionStrategy::Exhaustive:
          for (const auto* candidate : candidates) {
            auto a = attempt(current, *candidate, rewriter, oracle, options.thresholds);
            const bool hit = request.targets.contains(a.cls);
            if (!kept || hit) kept = std::move(a);
            if (hit) break;
          }
          break;
      }
    } catch (const std::exception& e) {
      run.error = to_run_error(e, step);
      return finish(RunStatus::Error, current);
    }

    TransformationRecord record;
    record.step_index = step;
    record.category = request.order[i];
    record.modification = std::string(kept->modification->key);
    record.text_before = current;
    record.text_after = kept->text;
    record.predicted_probs = kept->probs;
    record.predicted_class = kept->cls;
    record.predicted_score = compound_score(kept->probs);
    run.records.push_back(record);
    if (on_step) on_step(run.records.back());

    if (request.targets.contains(record.predicted_class)) {
      return finish(RunStatus::Success, record.text_after);
    }
    current = std::move(kept->text);
  }
  return finish(RunStatus::Failure, current);
}

std::optional<std::string> check_run_invariants(const CounterfactualRun& run) {
  const auto& recs = run.records;
  if (recs.size() > run.category_order.size()) return "more records than categories";
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (recs[i].step_index != static_cast<int>(i) + 1) return "step_index out of sequence";
    if (recs[i].category != run.category_order[i]) return "record category differs from order";
    if (recs[i].predicted_score != recs[i].predicted_probs.p_pos - recs[i].predicted_probs.p_neg) {
      return "predicted_score differs from compound score";
    }
    if (i == 0 && recs[i].text_before != run.original_text) {
      return "first record does not start from the original text";
    }
    if (i + 1 < recs.size() && recs[i].text_after != recs[i + 1].text_before) {
      return "chain broken between steps " + std::to_string(i + 1) + " and " +
             std::to_string(i + 2);
    }
    if (i + 1 < recs.size() && run.target_classes.contains(recs[i].predicted_class)) {
      return "run continued past a target hit";
    }
  }
  const std::string expected_final = recs.empty() ? run.original_text : recs.back().text_after;
  if (run.final_text != expected_final) return "final_text is not the last text_after";
  switch (run.status) {
    case RunStatus::Success:
      if (recs.empty()) {
        if (!run.original_class || !run.target_classes.contains(*run.original_class)) {
          return "SUCCESS without records or a pre-checked target class";
        }
      } else if (!run.target_classes.contains(recs.back().predicted_class)) {
        return "SUCCESS but last class is not a target";
      }
      break;
    case RunStatus::Failure:
      if (!recs.empty() && run.target_classes.contains(recs.back().predicted_class)) {
        return "FAILURE but last class is a target";
      }
      if (recs.size() != run.category_order.size()) return "FAILURE before exhausting categories";
      break;
    case RunStatus::Error:
      if (!run.error) return "ERROR without an error";
      break;
  }
  return std::nullopt;
}

std::vector<AblationResult> run_ablation(const AblationRequest& request,
                                         const Rewriter& rewriter,
                                         const SentimentOracle& oracle,
                                         const EngineOptions& options) {
  if (request.text.empty()) throw Error(ErrorCode::Validation, "original text is empty");
  if (request.targets.empty()) throw Error(ErrorCode::Validation, "target class set is empty");
  validate(options.thresholds);

  std::vector<AblationResult> results;
  results.reserve(request.modifications.size());
  for (const auto* modification : request.modifications) {
    AblationResult r;
    r.event_id = request.event_id;
    r.modification = std::string(modification->key);
    r.category = modification->category;
    r.original_text = request.text;
    r.original_class = request.original_class;
    r.target_classes = request.targets;
    r.provenance = start_provenance(rewriter, oracle, options);
    try {
      auto a = attempt(request.text, *modification, rewriter, oracle, options.thresholds);
      r.modified_text = std::move(a.text);
      r.resulting_class = a.cls;
    } catch (const std::exception& e) {
      r.error = to_run_error(e, 1);
    }
    r.provenance.finished_at = options.clock->now();
    results.push_back(std::move(r));
  }
  return results;
}

RunLog::RunLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::filesystem::exists(path_)) {
    std::string content;
    {
      std::ifstream in(path_, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      content = ss.str();
    }
    if (!content.empty() && content.back() != '\n') {
      const auto keep = content.rfind('\n');
      content.resize(keep == std::string::npos ? 0 : keep + 1);
      std::filesystem::resize_file(path_, content.size());
    }
    std::istringstream in(content);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = json::parse(line);
        const auto type = j.at("type").get<std::string>();
        const auto& event = j.at("event_id");
        if (event.is_null()) continue;
        if (type == "counterfactual_run") {
          run_events_.insert(event.get<std::string>());
        } else if (type == "ablation_result") {
          ablation_events_.emplace(event.get<std::string>(),
                                   j.at("modification").get<std::string>());
        }
      } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse,
                    path_.string() + " line " + std::to_string(line_no) + ": " + e.what(), {},
                    line_no);
      }
    }
  }
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw Error(ErrorCode::Io, "cannot open run log " + path_.string());
}

void RunLog::write_line(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::Io, "write to " + path_.string() + " failed");
}

void RunLog::append(const CounterfactualRun& run) {
  std::lock_guard lock(mu_);
  write_line(json(run).dump());
  if (run.event_id) run_events_.insert(*run.event_id);
}

void RunLog::append(const AblationResult& result) {
  std::lock_guard lock(mu_);
  write_line(json(result).dump());
  if (result.event_id) ablation_events_.emplace(*result.event_id, result.modification);
}

bool RunLog::has_run_for(std::string_view event_id) const {
  std::lock_guard lock(mu_);
  return run_events_.contains(event_id);
}

bool RunLog::has_ablation_for(std::string_view event_id, std::string_view modification) const {
  std::lock_guard lock(mu_);
  return ablation_events_.contains(
      std::pair<std::string, std::string>(std::string(event_id), std::string(modification)));
}

std::vector<CounterfactualRun> read_runs(const std::filesystem::path& path) {
  return read_records<CounterfactualRun>(path, "counterfactual_run");
}

std::vector<AblationResult> read_ablation_results(const std::filesystem::path& path) {
  return read_records<AblationResult>(path, "ablation_result");
}

BatchSummary run_batch(std::span<const EventSentimentPair> corpus, const Rewriter& rewriter,
                       const SentimentOracle& oracle, const BatchOptions& options,
                       RunLog& log) {
  std::vector<const EventSentimentPair*> events;
  for (const auto& p : corpus) {
    if (options.filter.contains(p.label)) events.push_back(&p);
  }
  std::stable_sort(events.begin(), events.end(), [](const auto* a, const auto* b) {
    return a->narrative.id < b->narrative.id;
  });
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i]->narrative.id == events[i - 1]->narrative.id) {
      throw Error(ErrorCode::DuplicateId, "duplicate event id " + events[i]->narrative.id,
                  {events[i]->narrative.id});
    }
  }

  BatchSummary summary;
  summary.matched = events.size();

  if (options.mode == BatchMode::Sequential) {
    std::vector<const EventSentimentPair*> todo;
    for (const auto* e : events) {
      if (log.has_run_for(e->narrative.id)) ++summary.already_logged;
      else todo.push_back(e);
    }
    auto produce = [&](std::size_t i) {
      const auto& event = *todo[i];
      RunRequest request;
      request.text = narrative_text(event.narrative);
      request.targets = options.targets;
      request.order = options.order;
      request.original_class = event.label;
      request.run_id = "run-" + event.narrative.id;
      request.event_id = event.narrative.id;
      try {
        return generate_counterfactual(request, rewriter, oracle, options.engine);
      } catch (const std::exception& e) {
        CounterfactualRun failed;
        failed.run_id = request.run_id;
        failed.event_id = request.event_id;
        failed.original_text = request.text;
        failed.original_class = request.original_class;
        failed.target_classes = request.targets;
        failed.category_order = request.order;
        failed.selection = options.engine.selection;
        failed.status = RunStatus::Error;
        failed.final_text = request.text;
        failed.error = to_run_error(e, 0);
        failed.provenance = start_provenance(rewriter, oracle, options.engine);
        failed.provenance.finished_at = failed.provenance.started_at;
        return failed;
      }
    };
    ordered_parallel_for(todo.size(), options.concurrency, produce,
                         [&](std::size_t, CounterfactualRun&& run) {
                           log.append(run);
                           ++summary.written;
                           switch (run.status) {
                             case RunStatus::Success: ++summary.successes; break;
                             case RunStatus::Failure: ++summary.failures; break;
                             case RunStatus::Error: ++summary.errors; break;
                           }
                         });
    return summary;
  }

  std::vector<const ModificationType*> modifications = options.modifications;
  if (modifications.empty()) {
    for (const auto& m : modification_registry()) modifications.push_back(&m);
  }
  struct Work {
    const EventSentimentPair* event;
    std::vector<const ModificationType*> pending;
  };
  std::vector<Work> todo;
  for (const auto* e : events) {
    Work w{e, {}};
    for (const auto* m : modifications) {
      if (!log.has_ablation_for(e->narrative.id, m->key)) w.pending.push_back(m);
    }
    if (w.pending.empty()) ++summary.already_logged;
    else todo.push_back(std::move(w));
  }
  auto produce = [&](std::size_t i) {
    const auto& work = todo[i];
    AblationRequest request;
    request.text = narrative_text(work.event->narrative);
    request.modifications = work.pending;
    request.targets = options.targets;
    request.original_class = work.event->label;
    request.event_id = work.event->narrative.id;
    return run_ablation(request, rewriter, oracle, options.engine);
  };
  ordered_parallel_for(todo.size(), options.concurrency, produce,
                       [&](std::size_t, std::vector<AblationResult>&& results) {
                         for (const auto& r : results) {
                           log.append(r);
                           ++summary.written;
                           if (r.error) ++summary.errors;
                           else if (r.success()) ++summary.successes;
                           else ++summary.failures;
                         }
                       });
  return summary;
}

}  // namespace dipsent
