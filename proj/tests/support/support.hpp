#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dipsent/corpus.hpp"
#include "dipsent/engine.hpp"
#include "dipsent/oracle.hpp"
#include "dipsent/rewriter.hpp"

namespace dipsent::test {

std::filesystem::path data_path(std::string_view relative);
/// Fresh empty directory under the system temp dir.
std::filesystem::path fresh_dir(std::string_view name);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::shared_ptr<LexiconScorer> shipped_lexicon();
std::shared_ptr<MockRewriter> shipped_mock(std::uint64_t seed = 0);

// Outcome-count fixtures expanded into full records.

struct BreakdownCounts {
  std::vector<CounterfactualCategory> order;
  std::vector<std::pair<CounterfactualCategory, std::size_t>> successes;
  std::size_t failures = 0;
};
BreakdownCounts load_breakdown_counts(const std::filesystem::path& path);
std::vector<CounterfactualRun> expand_breakdown(const BreakdownCounts& counts);

struct AblationCount {
  std::string modification;
  std::size_t total = 0;
  std::size_t successful = 0;
};
std::vector<AblationCount> load_ablation_counts(const std::filesystem::path& path);
std::vector<AblationResult> expand_ablation(std::span<const AblationCount> counts);

using Confusion = std::array<std::array<std::size_t, 3>, 3>;
Confusion load_confusion(const std::filesystem::path& path);
void expand_confusion(const Confusion& m, std::vector<SentimentClass>& predictions,
                      std::vector<SentimentClass>& labels);

// Exact lexicon arithmetic on integer hit counts. With tau = num/den the
// compound (np - nn) / (np + nn + 3a) is compared by cross-multiplication.

SentimentClass exact_class(long np, long nn, long alpha, long tau_num, long tau_den);
/// Steps (each adding `per_step` positive hits) until the class leaves
/// Negative, or nothing within `max_steps`.
std::optional<int> exact_steps_to_leave_negative(long nn, long per_step, int max_steps,
                                                 long tau_num = 1, long tau_den = 10);
/// Counts lexicon hits by plain set membership over the tokens.
std::pair<long, long> count_hits(std::string_view text, const LexiconScorer& lexicon);

// Synthetic corpora.

/// One post per entry; the narrative carries exactly `negative_terms[i]`
/// negative lexicon terms and no positive ones. Every post has three
/// negative comments so the dataset labels it Negative.
Corpus synthetic_corpus(std::span<const int> negative_terms, std::string_view id_prefix = "evt");
/// 35 events that leave Negative within five mock steps and 15 that do not.
std::vector<int> desk_scale_design();
std::vector<int> three_event_design();

// Test doubles.

class ConstantOracle final : public SentimentOracle {
 public:
  explicit ConstantOracle(SentimentProbs probs) : probs_(probs) {}
  SentimentProbs predict(std::string_view) const override {
    ++calls;
    return probs_;
  }
  std::string describe() const override { return "constant"; }
  mutable std::atomic<int> calls{0};

 private:
  SentimentProbs probs_;
};

inline constexpr SentimentProbs kNegativeProbs{0.7, 0.2, 0.1};
inline constexpr SentimentProbs kNeutralProbs{0.2, 0.6, 0.2};
inline constexpr SentimentProbs kPositiveProbs{0.1, 0.2, 0.7};

/// Returns scripted answers in call order, then repeats the last one.
class ScriptedOracle final : public SentimentOracle {
 public:
  explicit ScriptedOracle(std::vector<SentimentProbs> script) : script_(std::move(script)) {}
  SentimentProbs predict(std::string_view) const override;
  std::string describe() const override { return "scripted"; }
  mutable std::atomic<int> calls{0};

 private:
  std::vector<SentimentProbs> script_;
};

class CountingOracle final : public SentimentOracle {
 public:
  explicit CountingOracle(const SentimentOracle& inner) : inner_(inner) {}
  SentimentProbs predict(std::string_view text) const override {
    ++calls;
    return inner_.predict(text);
  }
  std::string describe() const override { return inner_.describe(); }
  mutable std::atomic<int> calls{0};

 private:
  const SentimentOracle& inner_;
};

/// Fails with `code` on the given 1-based call; passes through otherwise.
class FailingOracle final : public SentimentOracle {
 public:
  FailingOracle(const SentimentOracle& inner, int fail_on_call, ErrorCode code)
      : inner_(inner), fail_on_(fail_on_call), code_(code) {}
  SentimentProbs predict(std::string_view text) const override;
  std::string describe() const override { return "failing"; }
  mutable std::atomic<int> calls{0};

 private:
  const SentimentOracle& inner_;
  int fail_on_;
  ErrorCode code_;
};

/// Appends " <key>" to the text.
class TagRewriter final : public Rewriter {
 public:
  std::string rewrite(std::string_view text, const ModificationType& m) const override {
    ++calls;
    return std::string(text) + " " + std::string(m.key);
  }
  std::string describe() const override { return "tag"; }
  mutable std::atomic<int> calls{0};
};

class CountingRewriter final : public Rewriter {
 public:
  explicit CountingRewriter(const Rewriter& inner) : inner_(inner) {}
  std::string rewrite(std::string_view text, const ModificationType& m) const override {
    ++calls;
    return inner_.rewrite(text, m);
  }
  std::string describe() const override { return inner_.describe(); }
  mutable std::atomic<int> calls{0};

 private:
  const Rewriter& inner_;
};

class FailingRewriter final : public Rewriter {
 public:
  FailingRewriter(const Rewriter& inner, int fail_on_call, ErrorCode code)
      : inner_(inner), fail_on_(fail_on_call), code_(code) {}
  std::string rewrite(std::string_view text, const ModificationType& m) const override;
  std::string describe() const override { return "failing"; }
  mutable std::atomic<int> calls{0};

 private:
  const Rewriter& inner_;
  int fail_on_;
  ErrorCode code_;
};

/// Captures CLI output.
struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};
CliResult cli(std::vector<std::string> args);

}  // namespace dipsent::test
