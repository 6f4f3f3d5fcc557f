#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dipsent/http.hpp"
#include "dipsent/sentiment.hpp"

namespace dipsent {

/// Anything that maps text to a (negative, neutral, positive) triple.
/// Implementations are shared across threads and must not mutate state in
/// predict().
class SentimentOracle {
 public:
  virtual ~SentimentOracle() = default;
  virtual SentimentProbs predict(std::string_view text) const = 0;
  /// Short provenance descriptor recorded alongside results.
  virtual std::string describe() const = 0;
};

/// Lowercases ASCII letters and splits on runs of non-alphanumeric bytes.
/// Bytes >= 0x80 are treated as alphanumeric so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct LexiconHits {
  std::size_t positive = 0;
  std::size_t negative = 0;
};

/// Laplace-smoothed term counting:
///   p_pos = (np + a) / (np + nn + 3a), p_neg = (nn + a) / (...), p_neu = a / (...)
class LexiconScorer final : public SentimentOracle {
 public:
  LexiconScorer(std::set<std::string> positive_terms,
                std::set<std::string> negative_terms, double alpha = 1.0);

  SentimentProbs predict(std::string_view text) const override;
  std::string describe() const override;

  LexiconHits hits(std::string_view text) const;
  const std::set<std::string>& positive_terms() const noexcept { return positive_; }
  const std::set<std::string>& negative_terms() const noexcept { return negative_; }
  double alpha() const noexcept { return alpha_; }

 private:
  std::set<std::string> positive_;
  std::set<std::string> negative_;
  double alpha_;
};

SentimentProbs lexicon_predict(std::string_view text, const LexiconScorer& scorer);

/// One token per line; blank lines and '#' comments ignored; tokens lowercased.
std::set<std::string> parse_term_list(std::istream& in);
std::set<std::string> load_term_list(const std::filesystem::path& path);

struct RemoteOracleConfig {
  std::string endpoint;
  std::chrono::milliseconds timeout{10000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  bool jitter = true;
  /// Sent as a bearer token when non-empty. Never logged.
  std::string api_key;
};

void validate(const RemoteOracleConfig& config);

/// Wire contract: POST {"text": ...} -> {"p_neg", "p_neu", "p_pos"}.
class RemoteOracle final : public SentimentOracle {
 public:
  explicit RemoteOracle(RemoteOracleConfig config,
                        std::shared_ptr<HttpTransport> transport = make_default_transport(),
                        Sleeper sleep = thread_sleeper());

  SentimentProbs predict(std::string_view text) const override;
  std::string describe() const override;

 private:
  RemoteOracleConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleep_;
};

SentimentProbs remote_predict(std::string_view text, const RemoteOracleConfig& config);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  /// No predictions of this class: precision reported as 0.
  bool precision_undefined = false;
  /// No true labels of this class: recall reported as 0.
  bool recall_undefined = false;
};

struct ClassificationReport {
  std::array<ClassMetrics, 3> per_class{};

  const ClassMetrics& operator[](SentimentClass c) const {
    return per_class[static_cast<std::size_t>(c)];
  }
};

ClassificationReport classification_report(std::span<const SentimentClass> predictions,
                                           std::span<const SentimentClass> labels);

}  // namespace dipsent
