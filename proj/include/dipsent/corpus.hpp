#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dipsent/oracle.hpp"
#include "dipsent/sentiment.hpp"

namespace dipsent {

enum class EventType {
  Bilateral,
  Multilateral,
  Summit,
  Digital,
  Science,
  Economic,
  Cultural,
  Humanitarian,
  Nuclear,
  Migration,
};

inline constexpr EventType kAllEventTypes[] = {
    EventType::Bilateral, EventType::Multilateral, EventType::Summit,
    EventType::Digital,   EventType::Science,      EventType::Economic,
    EventType::Cultural,  EventType::Humanitarian, EventType::Nuclear,
    EventType::Migration,
};

enum class Actor { China, India, US, NonUS, Europe };
inline constexpr Actor kAllActors[] = {Actor::China, Actor::India, Actor::US,
                                       Actor::NonUS, Actor::Europe};

enum class Theme { Economics, Politics, Healthcare, Climate };
inline constexpr Theme kAllThemes[] = {Theme::Economics, Theme::Politics,
                                       Theme::Healthcare, Theme::Climate};

std::string_view to_string(EventType t) noexcept;
std::string_view to_string(Actor a) noexcept;
std::string_view to_string(Theme t) noexcept;

// Case-insensitive. Event types also accept a trailing " Diplomacy".
EventType parse_event_type(std::string_view name);
Actor parse_actor(std::string_view name);
Theme parse_theme(std::string_view name);

struct EventNarrative {
  std::string id;
  std::string title;
  std::string body;
  EventType event_type = EventType::Bilateral;
  std::set<Actor> actor_tags;
  std::set<Theme> theme_tags;

  friend bool operator==(const EventNarrative&, const EventNarrative&) = default;
};

/// Title, then a blank line and the body when the body is non-empty.
std::string narrative_text(const EventNarrative& narrative);

struct Corpus {
  std::vector<EventNarrative> posts;
  std::vector<Comment> comments;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Reads one JSON record per line (`kind` = post | comment). Blank lines are
/// skipped. Throws Parse (with line number), DuplicateId or OrphanComment.
Corpus parse_dump(std::istream& in);

/// Posts first, then comments, each in stored order.
void serialize_dump(const Corpus& corpus, std::ostream& out);

struct EventSentimentPair {
  EventNarrative narrative;
  double score = 0.0;
  SentimentClass label = SentimentClass::Neutral;
  std::size_t n_comments = 0;

  friend bool operator==(const EventSentimentPair&, const EventSentimentPair&) = default;
};

struct SkippedPost {
  std::string post_id;
  std::string reason;

  friend bool operator==(const SkippedPost&, const SkippedPost&) = default;
};

struct EventDataset {
  std::vector<EventSentimentPair> pairs;
  std::vector<SkippedPost> skipped;
};

struct DatasetOptions {
  ClassThresholds thresholds;
  WeightScheme weights = WeightScheme::Log;
  /// Posts scored concurrently.
  std::size_t parallelism = 8;
};

/// Scores every comment with the oracle and aggregates per post. Posts
/// without usable comments land in `skipped`. Output follows post order.
EventDataset build_event_dataset(const Corpus& corpus, const SentimentOracle& oracle,
                                 const DatasetOptions& options = {});

enum class GroupAxis { Actor, Theme };

std::string_view to_string(GroupAxis axis) noexcept;
GroupAxis parse_group_axis(std::string_view name);

/// Rows are the axis' groups in declaration order, columns the ten event
/// types. A cell is the unweighted mean of event scores in its bucket, or
/// empty when the bucket is.
struct GroupSentimentMatrix {
  GroupAxis axis = GroupAxis::Theme;
  std::vector<std::string> rows;
  std::vector<EventType> cols;
  std::vector<std::vector<std::optional<double>>> cells;
  std::vector<std::vector<std::size_t>> counts;

  std::optional<double> cell(std::string_view row, EventType col) const;
};

GroupSentimentMatrix group_sentiment_matrix(std::span<const EventSentimentPair> pairs,
                                            GroupAxis axis);

}  // namespace dipsent
