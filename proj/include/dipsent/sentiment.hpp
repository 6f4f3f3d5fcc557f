#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dipsent {

/// Probability triple over (negative, neutral, positive).
struct SentimentProbs {
  double p_neg = 0.0;
  double p_neu = 0.0;
  double p_pos = 0.0;

  friend bool operator==(const SentimentProbs&, const SentimentProbs&) = default;
};

/// Maximum deviation of p_neg + p_neu + p_pos from 1 that validation accepts.
inline constexpr double kProbabilitySumTolerance = 1e-6;

/// Throws Error{Validation} when a component leaves [0,1] or the sum is off
/// by more than kProbabilitySumTolerance.
void validate(const SentimentProbs& probs);

/// Ordered Negative < Neutral < Positive.
enum class SentimentClass : std::uint8_t { Negative = 0, Neutral = 1, Positive = 2 };

inline constexpr SentimentClass kAllClasses[] = {
    SentimentClass::Negative, SentimentClass::Neutral, SentimentClass::Positive};

std::string_view to_string(SentimentClass c) noexcept;
/// Case-insensitive; throws Error{Validation} on anything else.
SentimentClass parse_sentiment_class(std::string_view name);

/// Small value set of sentiment classes, iterated in class order.
class ClassSet {
 public:
  ClassSet() = default;
  ClassSet(std::initializer_list<SentimentClass> classes);

  void insert(SentimentClass c) noexcept;
  bool contains(SentimentClass c) const noexcept;
  bool empty() const noexcept { return bits_ == 0; }
  std::vector<SentimentClass> to_vector() const;

  friend bool operator==(const ClassSet&, const ClassSet&) = default;

 private:
  std::uint8_t bits_ = 0;
};

struct ClassThresholds {
  double tau = 0.1;
};

void validate(const ClassThresholds& thresholds);

/// How a comment's vote score becomes its aggregation weight.
enum class WeightScheme {
  Log,      // 1 + ln(1 + max(0, s))
  Linear,   // max(1, s)
  Uniform,  // 1
};

std::string_view to_string(WeightScheme scheme) noexcept;
WeightScheme parse_weight_scheme(std::string_view name);

struct Comment {
  std::string id;
  std::string post_id;
  std::string text;
  std::int64_t vote_score = 0;
  std::optional<SentimentProbs> probs;
  double compound = 0.0;
  double weight = 1.0;

  friend bool operator==(const Comment&, const Comment&) = default;
};

/// p_pos - p_neg, after validating the triple.
double compound_score(const SentimentProbs& probs);

double comment_weight(std::int64_t vote_score,
                      WeightScheme scheme = WeightScheme::Log) noexcept;

/// Fills probs, compound and weight of a comment from an oracle prediction.
void score_comment(Comment& comment, const SentimentProbs& probs,
                   WeightScheme scheme = WeightScheme::Log);

/// Weighted mean of the comments' compound scores.
/// Throws EmptyThread for an empty list and ZeroWeight when the weights sum
/// to zero.
double aggregate_post_sentiment(std::span<const Comment> comments);

/// Absolute slack applied at the band edges to absorb floating-point error.
inline constexpr double kBoundarySlack = 1e-12;

/// score >= tau is Positive, score <= -tau is Negative, Neutral in between.
SentimentClass classify(double score, const ClassThresholds& thresholds = {});

}  // namespace dipsent
