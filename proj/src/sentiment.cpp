#include "dipsent/sentiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "dipsent/error.hpp"

namespace dipsent {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    return std::tolower(static_cast<unsigned char>(x)) ==
           std::tolower(static_cast<unsigned char>(y));
  });
}

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

void validate(const SentimentProbs& probs) {
  if (!in_unit_interval(probs.p_neg) || !in_unit_interval(probs.p_neu) ||
      !in_unit_interval(probs.p_pos)) {
    throw Error(ErrorCode::Validation,
                "probability component outside [0,1]");
  }
  const double sum = probs.p_neg + probs.p_neu + probs.p_pos;
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw Error(ErrorCode::Validation,
                "probabilities sum to " + std::to_string(sum) + ", expected 1");
  }
}

std::string_view to_string(SentimentClass c) noexcept {
  switch (c) {
    case SentimentClass::Negative: return "Negative";
    case SentimentClass::Neutral: return "Neutral";
    case SentimentClass::Positive: return "Positive";
  }
  return "Neutral";
}

SentimentClass parse_sentiment_class(std::string_view name) {
  for (auto c : kAllClasses) {
    if (iequals(name, to_string(c))) return c;
  }
  throw Error(ErrorCode::Validation,
              "unknown sentiment class '" + std::string(name) + "'");
}

ClassSet::ClassSet(std::initializer_list<SentimentClass> classes) {
  for (auto c : classes) insert(c);
}

void ClassSet::insert(SentimentClass c) noexcept {
  bits_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(c));
}

bool ClassSet::contains(SentimentClass c) const noexcept {
  return (bits_ >> static_cast<unsigned>(c)) & 1u;
}

std::vector<SentimentClass> ClassSet::to_vector() const {
  std::vector<SentimentClass> out;
  for (auto c : kAllClasses) {
    if (contains(c)) out.push_back(c);
  }
  return out;
}

void validate(const ClassThresholds& thresholds) {
  if (!(thresholds.tau > 0.0 && thresholds.tau < 1.0)) {
    throw Error(ErrorCode::Validation, "tau must lie in (0, 1)");
  }
}

std::string_view to_string(WeightScheme scheme) noexcept {
  switch (scheme) {
    case WeightScheme::Log: return "log";
    case WeightScheme::Linear: return "linear";
    case WeightScheme::Uniform: return "uniform";
  }
  return "log";
}

WeightScheme parse_weight_scheme(std::string_view name) {
  for (auto s : {WeightScheme::Log, WeightScheme::Linear, WeightScheme::Uniform}) {
    if (iequals(name, to_string(s))) return s;
  }
  throw Error(ErrorCode::Configuration,
              "unknown weight scheme '" + std::string(name) + "'");
}

double compound_score(const SentimentProbs& probs) {
  validate(probs);
  return probs.p_pos - probs.p_neg;
}

double comment_weight(std::int64_t vote_score, WeightScheme scheme) noexcept {
  const auto clamped = std::max<std::int64_t>(0, vote_score);
  switch (scheme) {
    case WeightScheme::Log:
      return 1.0 + std::log1p(static_cast<double>(clamped));
    case WeightScheme::Linear:
      return std::max(1.0, static_cast<double>(clamped));
    case WeightScheme::Uniform:
      return 1.0;
  }
  return 1.0;
}

void score_comment(Comment& comment, const SentimentProbs& probs,
                   WeightScheme scheme) {
  comment.compound = compound_score(probs);
  comment.probs = probs;
  comment.weight = comment_weight(comment.vote_score, scheme);
}

double aggregate_post_sentiment(std::span<const Comment> comments) {
  if (comments.empty()) {
    throw Error(ErrorCode::EmptyThread, "cannot aggregate an empty thread");
  }
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& c : comments) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) {
      throw Error(ErrorCode::Validation, "comment weight must be finite and >= 0",
                  {c.id});
    }
    if (!(c.compound >= -1.0 && c.compound <= 1.0)) {
      throw Error(ErrorCode::Validation, "compound score outside [-1,1]", {c.id});
    }
    weighted += c.weight * c.compound;
    total += c.weight;
  }
  if (total <= 0.0) {
    std::vector<std::string> ids;
    if (!comments.empty()) ids.push_back(comments.front().post_id);
    throw Error(ErrorCode::ZeroWeight, "comment weights sum to zero", ids);
  }
  // Rounding can push the quotient a hair past the extreme compounds.
  double lo = comments.front().compound, hi = lo;
  for (const auto& c : comments) {
    lo = std::min(lo, c.compound);
    hi = std::max(hi, c.compound);
  }
  return std::clamp(weighted / total, lo, hi);
}

SentimentClass classify(double score, const ClassThresholds& thresholds) {
  validate(thresholds);
  if (!(score >= -1.0 && score <= 1.0)) {
    throw Error(ErrorCode::Validation, "score outside [-1,1]");
  }
  // Scores a rounding error short of tau (0.4 - 0.5 for a -0.1 ratio) still
  // land on the inclusive side.
  const double edge = thresholds.tau - kBoundarySlack;
  if (score >= edge) return SentimentClass::Positive;
  if (score <= -edge) return SentimentClass::Negative;
  return SentimentClass::Neutral;
}

}  // namespace dipsent
