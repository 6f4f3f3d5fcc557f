#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dipsent/http.hpp"

namespace dipsent {

enum class CounterfactualCategory { Participants, Process, Communication, Substance, Context };

inline constexpr CounterfactualCategory kAllCategories[] = {
    CounterfactualCategory::Participants, CounterfactualCategory::Process,
    CounterfactualCategory::Communication, CounterfactualCategory::Substance,
    CounterfactualCategory::Context};

std::string_view to_string(CounterfactualCategory c) noexcept;
CounterfactualCategory parse_category(std::string_view name);

/// The sweep order used when none is given.
std::vector<CounterfactualCategory> default_category_order();

struct ModificationType {
  CounterfactualCategory category;
  std::string_view key;
  /// Imperative instruction handed to the rewriter.
  std::string_view instruction;
  /// Short row label used in report tables.
  std::string_view label;
};

/// All fourteen modification types, grouped by category in sweep order.
std::span<const ModificationType> modification_registry() noexcept;

std::vector<const ModificationType*> modifications_for(CounterfactualCategory category);

/// Throws Configuration for unknown keys.
const ModificationType& find_modification(std::string_view key);

struct PromptPair {
  std::string system;
  std::string user;
};

/// "Replace the ..." -> "replacing the ...".
std::string gerund_clause(std::string_view instruction);

/// Throws Validation for empty text.
PromptPair construct_prompt(std::string_view text, const ModificationType& modification);

/// Rewrites a narrative along one modification type. Shared across
/// concurrent chains; implementations keep no per-call mutable state.
class Rewriter {
 public:
  virtual ~Rewriter() = default;
  virtual std::string rewrite(std::string_view text,
                              const ModificationType& modification) const = 0;
  virtual std::string describe() const = 0;
};

std::size_t whitespace_token_count(std::string_view text);

/// True when the output's whitespace-token count lies within
/// +-tolerance of the input's.
bool within_length_band(std::string_view input, std::string_view output, double tolerance);

struct RemoteRewriterConfig {
  std::string endpoint;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  bool jitter = true;
  std::string api_key;
  int max_tokens = 1024;
  double temperature = 0.0;
  /// Unset disables the length check.
  std::optional<double> length_tolerance = 0.3;
};

void validate(const RemoteRewriterConfig& config);

/// Chat-completion client. Wire contract:
/// POST {"system", "user", "max_tokens", "temperature"} -> {"text"}.
class RemoteRewriter final : public Rewriter {
 public:
  explicit RemoteRewriter(RemoteRewriterConfig config,
                          std::shared_ptr<HttpTransport> transport = make_default_transport(),
                          Sleeper sleep = thread_sleeper());

  std::string rewrite(std::string_view text,
                      const ModificationType& modification) const override;
  std::string describe() const override;

 private:
  RemoteRewriterConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleep_;
};

std::string remote_rewrite(std::string_view text, const ModificationType& modification,
                           const RemoteRewriterConfig& config);

/// Modification key -> fragment template. `{pos}` and `{neg}` placeholders
/// expand to terms drawn from the mock's vocabularies.
using MockTable = std::map<std::string, std::string, std::less<>>;

/// Lines of `key = fragment`; '#' starts a comment.
MockTable parse_mock_table(std::istream& in);
MockTable load_mock_table(const std::filesystem::path& path);

/// Deterministic stand-in for an LLM: appends the expanded fragment for the
/// modification to the text. Placeholder picks depend only on
/// (seed, text, modification key).
class MockRewriter final : public Rewriter {
 public:
  MockRewriter(MockTable table, std::vector<std::string> positive_vocab,
               std::vector<std::string> negative_vocab, std::uint64_t seed = 0,
               std::string separator = " ");

  std::string rewrite(std::string_view text,
                      const ModificationType& modification) const override;
  std::string describe() const override;

 private:
  MockTable table_;
  std::vector<std::string> positive_;
  std::vector<std::string> negative_;
  std::uint64_t seed_;
  std::string separator_;
};

std::string mock_rewrite(std::string_view text, const ModificationType& modification,
                         const MockRewriter& mock);

/// 64-bit FNV-1a, used wherever a platform-stable string hash is needed.
std::uint64_t stable_hash(std::string_view bytes) noexcept;

}  // namespace dipsent
