#include "dipsent/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "dipsent/error.hpp"
#include "dipsent/parallel.hpp"
#include "dipsent/records.hpp"

namespace dipsent {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    return std::tolower(static_cast<unsigned char>(x)) ==
           std::tolower(static_cast<unsigned char>(y));
  });
}

template <class Enum, std::size_t N>
Enum parse_named(std::string_view name, const Enum (&all)[N], std::string_view what) {
  for (auto v : all) {
    if (iequals(name, to_string(v))) return v;
  }
  throw Error(ErrorCode::Validation,
              "unknown " + std::string(what) + " '" + std::string(name) + "'");
}

}  // namespace

std::string_view to_string(EventType t) noexcept {
  switch (t) {
    case EventType::Bilateral: return "Bilateral";
    case EventType::Multilateral: return "Multilateral";
    case EventType::Summit: return "Summit";
    case EventType::Digital: return "Digital";
    case EventType::Science: return "Science";
    case EventType::Economic: return "Economic";
    case EventType::Cultural: return "Cultural";
    case EventType::Humanitarian: return "Humanitarian";
    case EventType::Nuclear: return "Nuclear";
    case EventType::Migration: return "Migration";
  }
  return "Bilateral";
}

std::string_view to_string(Actor a) noexcept {
  switch (a) {
    case Actor::China: return "China";
    case Actor::India: return "India";
    case Actor::US: return "US";
    case Actor::NonUS: return "Non-US";
    case Actor::Europe: return "Europe";
  }
  return "China";
}

std::string_view to_string(Theme t) noexcept {
  switch (t) {
    case Theme::Economics: return "Economics";
    case Theme::Politics: return "Politics";
    case Theme::Healthcare: return "Healthcare";
    case Theme::Climate: return "Climate";
  }
  return "Economics";
}

EventType parse_event_type(std::string_view name) {
  constexpr std::string_view suffix = " diplomacy";
  if (name.size() > suffix.size() &&
      iequals(name.substr(name.size() - suffix.size()), suffix)) {
    name.remove_suffix(suffix.size());
  }
  return parse_named(name, kAllEventTypes, "event type");
}

Actor parse_actor(std::string_view name) { return parse_named(name, kAllActors, "actor"); }

Theme parse_theme(std::string_view name) { return parse_named(name, kAllThemes, "theme"); }

std::string narrative_text(const EventNarrative& narrative) {
  if (narrative.body.empty()) return narrative.title;
  return narrative.title + "\n\n" + narrative.body;
}

Corpus parse_dump(std::istream& in) {
  Corpus corpus;
  std::unordered_set<std::string> post_ids;
  std::unordered_set<std::string> comment_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    std::string kind;
    try {
      record = nlohmann::json::parse(line);
      kind = record.at("kind").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse,
                  "line " + std::to_string(line_no) + ": " + e.what(), {}, line_no);
    }
    try {
      if (kind == "post") {
        auto post = record.get<EventNarrative>();
        if (!post_ids.insert(post.id).second) {
          throw Error(ErrorCode::DuplicateId,
                      "line " + std::to_string(line_no) + ": duplicate post id " + post.id,
                      {post.id}, line_no);
        }
        corpus.posts.push_back(std::move(post));
      } else if (kind == "comment") {
        auto comment = record.get<Comment>();
        if (!comment_ids.insert(comment.id).second) {
          throw Error(ErrorCode::DuplicateId,
                      "line " + std::to_string(line_no) + ": duplicate comment id " +
                          comment.id,
                      {comment.id}, line_no);
        }
        corpus.comments.push_back(std::move(comment));
      } else {
        throw Error(ErrorCode::Parse,
                    "line " + std::to_string(line_no) + ": unknown kind '" + kind + "'",
                    {}, line_no);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse,
                  "line " + std::to_string(line_no) + ": " + e.what(), {}, line_no);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Validation) {
        throw Error(ErrorCode::Parse,
                    "line " + std::to_string(line_no) + ": " + e.what(), {}, line_no);
      }
      throw;
    }
  }

  std::vector<std::string> missing;
  std::vector<std::string> orphan_comments;
  for (const auto& c : corpus.comments) {
    if (post_ids.contains(c.post_id)) continue;
    orphan_comments.push_back(c.id);
    if (std::find(missing.begin(), missing.end(), c.post_id) == missing.end()) {
      missing.push_back(c.post_id);
    }
  }
  if (!missing.empty()) {
    std::string msg = "comments reference unknown posts:";
    for (const auto& id : missing) msg += " " + id;
    msg += " (comments:";
    for (const auto& id : orphan_comments) msg += " " + id;
    msg += ")";
    throw Error(ErrorCode::OrphanComment, msg, missing);
  }
  return corpus;
}

void serialize_dump(const Corpus& corpus, std::ostream& out) {
  for (const auto& p : corpus.posts) out << nlohmann::json(p).dump() << '\n';
  for (const auto& c : corpus.comments) out << nlohmann::json(c).dump() << '\n';
}

EventDataset build_event_dataset(const Corpus& corpus, const SentimentOracle& oracle,
                                 const DatasetOptions& options) {
  validate(options.thresholds);
  std::unordered_map<std::string, std::vector<const Comment*>> by_post;
  for (const auto& c : corpus.comments) by_post[c.post_id].push_back(&c);

  struct Scored {
    std::optional<EventSentimentPair> pair;
    std::optional<SkippedPost> skipped;
  };

  auto score_post = [&](std::size_t i) -> Scored {
    const auto& post = corpus.posts[i];
    auto it = by_post.find(post.id);
    if (it == by_post.end() || it->second.empty()) {
      return {std::nullopt, SkippedPost{post.id, "no_comments"}};
    }
    std::vector<Comment> scored;
    scored.reserve(it->second.size());
    for (const Comment* c : it->second) {
      Comment copy = *c;
      try {
        score_comment(copy, oracle.predict(copy.text), options.weights);
      } catch (const Error& e) {
        throw Error(e.code(),
                    "post " + post.id + ", comment " + copy.id + ": " + e.what(),
                    {post.id});
      }
      scored.push_back(std::move(copy));
    }
    try {
      const double score = aggregate_post_sentiment(scored);
      return {EventSentimentPair{post, score, classify(score, options.thresholds),
                                 scored.size()},
              std::nullopt};
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ZeroWeight) {
        return {std::nullopt, SkippedPost{post.id, "zero_weight"}};
      }
      throw;
    }
  };

  EventDataset dataset;
  ordered_parallel_for(corpus.posts.size(), options.parallelism, score_post,
                       [&](std::size_t, Scored&& s) {
                         if (s.pair) dataset.pairs.push_back(std::move(*s.pair));
                         if (s.skipped) dataset.skipped.push_back(std::move(*s.skipped));
                       });
  return dataset;
}

std::string_view to_string(GroupAxis axis) noexcept {
  return axis == GroupAxis::Actor ? "actor" : "theme";
}

GroupAxis parse_group_axis(std::string_view name) {
  if (iequals(name, "actor")) return GroupAxis::Actor;
  if (iequals(name, "theme")) return GroupAxis::Theme;
  throw Error(ErrorCode::Validation, "unknown group axis '" + std::string(name) + "'");
}

std::optional<double> GroupSentimentMatrix::cell(std::string_view row, EventType col) const {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] != row) continue;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (cols[c] == col) return cells[r][c];
    }
  }
  return std::nullopt;
}

GroupSentimentMatrix group_sentiment_matrix(std::span<const EventSentimentPair> pairs,
                                            GroupAxis axis) {
  if (pairs.empty()) {
    throw Error(ErrorCode::Validation, "group matrix needs at least one event");
  }
  GroupSentimentMatrix m;
  m.axis = axis;
  if (axis == GroupAxis::Actor) {
    for (auto a : kAllActors) m.rows.emplace_back(to_string(a));
  } else {
    for (auto t : kAllThemes) m.rows.emplace_back(to_string(t));
  }
  m.cols.assign(std::begin(kAllEventTypes), std::end(kAllEventTypes));

  // Scores are sorted per bucket before summing so the mean is bit-identical
  // under any permutation of the input.
  std::vector<std::vector<std::vector<double>>> buckets(
      m.rows.size(), std::vector<std::vector<double>>(m.cols.size()));
  for (const auto& p : pairs) {
    const auto col = static_cast<std::size_t>(p.narrative.event_type);
    if (axis == GroupAxis::Actor) {
      for (auto a : p.narrative.actor_tags) {
        buckets[static_cast<std::size_t>(a)][col].push_back(p.score);
      }
    } else {
      for (auto t : p.narrative.theme_tags) {
        buckets[static_cast<std::size_t>(t)][col].push_back(p.score);
      }
    }
  }

  m.cells.assign(m.rows.size(), std::vector<std::optional<double>>(m.cols.size()));
  m.counts.assign(m.rows.size(), std::vector<std::size_t>(m.cols.size(), 0));
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    for (std::size_t c = 0; c < m.cols.size(); ++c) {
      auto& scores = buckets[r][c];
      m.counts[r][c] = scores.size();
      if (scores.empty()) continue;
      std::sort(scores.begin(), scores.end());
      double sum = 0.0;
      for (double s : scores) sum += s;
      m.cells[r][c] = std::clamp(sum / static_cast<double>(scores.size()),
                                 scores.front(), scores.back());
    }
  }
  return m;
}

}  // namespace dipsent
