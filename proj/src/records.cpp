#include "dipsent/records.hpp"

#include <string>

namespace dipsent {

namespace {

template <class T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> optional_from_json(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->template get<T>();
}

void check_schema(const json& j, std::string_view type) {
  const int version = j.at("schema_version").get<int>();
  if (version != kRunLogSchemaVersion) {
    throw Error(ErrorCode::Parse,
                "unsupported schema_version " + std::to_string(version));
  }
  if (j.at("type").get<std::string>() != type) {
    throw Error(ErrorCode::Parse, "expected record type " + std::string(type));
  }
}

}  // namespace

void to_json(json& j, SentimentClass c) { j = std::string(to_string(c)); }
void from_json(const json& j, SentimentClass& c) {
  c = parse_sentiment_class(j.get<std::string>());
}

void to_json(json& j, const ClassSet& s) {
  j = json::array();
  for (auto c : s.to_vector()) j.push_back(c);
}
void from_json(const json& j, ClassSet& s) { s = parse_class_set(j); }

ClassSet parse_class_set(const json& j) {
  ClassSet s;
  if (j.is_string()) {
    s.insert(j.get<SentimentClass>());
  } else {
    for (const auto& item : j) s.insert(item.get<SentimentClass>());
  }
  if (s.empty()) throw Error(ErrorCode::Validation, "target class set is empty");
  return s;
}

void to_json(json& j, const SentimentProbs& p) {
  j = {{"p_neg", p.p_neg}, {"p_neu", p.p_neu}, {"p_pos", p.p_pos}};
}
void from_json(const json& j, SentimentProbs& p) {
  p.p_neg = j.at("p_neg").get<double>();
  p.p_neu = j.at("p_neu").get<double>();
  p.p_pos = j.at("p_pos").get<double>();
}

void to_json(json& j, EventType t) { j = std::string(to_string(t)); }
void from_json(const json& j, EventType& t) { t = parse_event_type(j.get<std::string>()); }
void to_json(json& j, Actor a) { j = std::string(to_string(a)); }
void from_json(const json& j, Actor& a) { a = parse_actor(j.get<std::string>()); }
void to_json(json& j, Theme t) { j = std::string(to_string(t)); }
void from_json(const json& j, Theme& t) { t = parse_theme(j.get<std::string>()); }

void to_json(json& j, const EventNarrative& n) {
  j = {{"kind", "post"},           {"id", n.id},
       {"title", n.title},         {"body", n.body},
       {"event_type", n.event_type}, {"actor_tags", n.actor_tags},
       {"theme_tags", n.theme_tags}};
}
void from_json(const json& j, EventNarrative& n) {
  n.id = j.at("id").get<std::string>();
  n.title = j.at("title").get<std::string>();
  n.body = j.value("body", std::string{});
  n.event_type = j.at("event_type").get<EventType>();
  n.actor_tags.clear();
  n.theme_tags.clear();
  if (auto it = j.find("actor_tags"); it != j.end()) {
    for (const auto& a : *it) n.actor_tags.insert(a.get<Actor>());
  }
  if (auto it = j.find("theme_tags"); it != j.end()) {
    for (const auto& t : *it) n.theme_tags.insert(t.get<Theme>());
  }
  if (n.id.empty()) throw Error(ErrorCode::Validation, "post id is empty");
  if (n.title.empty()) throw Error(ErrorCode::Validation, "post " + n.id + " has an empty title");
}

void to_json(json& j, const Comment& c) {
  j = {{"kind", "comment"}, {"id", c.id},     {"post_id", c.post_id},
       {"text", c.text},    {"vote_score", c.vote_score}};
}
void from_json(const json& j, Comment& c) {
  c = Comment{};
  c.id = j.at("id").get<std::string>();
  c.post_id = j.at("post_id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.vote_score = j.at("vote_score").get<std::int64_t>();
  if (c.id.empty()) throw Error(ErrorCode::Validation, "comment id is empty");
}

void to_json(json& j, const EventSentimentPair& p) {
  json narrative = p.narrative;
  narrative.erase("kind");
  j = {{"narrative", narrative},
       {"score", p.score},
       {"label", p.label},
       {"n_comments", p.n_comments}};
}
void from_json(const json& j, EventSentimentPair& p) {
  p.narrative = j.at("narrative").get<EventNarrative>();
  p.score = j.at("score").get<double>();
  p.label = j.at("label").get<SentimentClass>();
  p.n_comments = j.at("n_comments").get<std::size_t>();
}

void to_json(json& j, const SkippedPost& s) {
  j = {{"post_id", s.post_id}, {"reason", s.reason}};
}
void from_json(const json& j, SkippedPost& s) {
  s.post_id = j.at("post_id").get<std::string>();
  s.reason = j.at("reason").get<std::string>();
}

void to_json(json& j, CounterfactualCategory c) { j = std::string(to_string(c)); }
void from_json(const json& j, CounterfactualCategory& c) {
  c = parse_category(j.get<std::string>());
}
void to_json(json& j, RunStatus s) { j = std::string(to_string(s)); }
void from_json(const json& j, RunStatus& s) { s = parse_run_status(j.get<std::string>()); }
void to_json(json& j, SelectionStrategy s) { j = std::string(to_string(s)); }
void from_json(const json& j, SelectionStrategy& s) { s = parse_selection(j.get<std::string>()); }

void to_json(json& j, const TransformationRecord& r) {
  j = {{"step_index", r.step_index},
       {"category", r.category},
       {"modification", r.modification},
       {"text_before", r.text_before},
       {"text_after", r.text_after},
       {"predicted_probs", r.predicted_probs},
       {"predicted_class", r.predicted_class},
       {"predicted_score", r.predicted_score}};
}
void from_json(const json& j, TransformationRecord& r) {
  r.step_index = j.at("step_index").get<int>();
  r.category = j.at("category").get<CounterfactualCategory>();
  r.modification = j.at("modification").get<std::string>();
  r.text_before = j.at("text_before").get<std::string>();
  r.text_after = j.at("text_after").get<std::string>();
  r.predicted_probs = j.at("predicted_probs").get<SentimentProbs>();
  r.predicted_class = j.at("predicted_class").get<SentimentClass>();
  r.predicted_score = j.at("predicted_score").get<double>();
}

void to_json(json& j, const RunError& e) {
  j = {{"code", std::string(code_name(e.code))}, {"message", e.message}, {"step", e.step}};
}
void from_json(const json& j, RunError& e) {
  e.code = parse_error_code(j.at("code").get<std::string>());
  e.message = j.at("message").get<std::string>();
  e.step = j.at("step").get<int>();
}

void to_json(json& j, const Provenance& p) {
  j = {{"started_at", p.started_at}, {"finished_at", p.finished_at},
       {"oracle", p.oracle},         {"rewriter", p.rewriter},
       {"thresholds", {{"tau", p.tau}}}, {"seed", p.seed}};
}
void from_json(const json& j, Provenance& p) {
  p.started_at = j.at("started_at").get<std::string>();
  p.finished_at = j.at("finished_at").get<std::string>();
  p.oracle = j.at("oracle").get<std::string>();
  p.rewriter = j.at("rewriter").get<std::string>();
  p.tau = j.at("thresholds").at("tau").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
}

void to_json(json& j, const CounterfactualRun& r) {
  j = {{"schema_version", kRunLogSchemaVersion},
       {"type", "counterfactual_run"},
       {"run_id", r.run_id},
       {"event_id", optional_to_json(r.event_id)},
       {"original_text", r.original_text},
       {"original_class", optional_to_json(r.original_class)},
       {"target_classes", r.target_classes},
       {"category_order", r.category_order},
       {"selection", r.selection},
       {"records", r.records},
       {"status", r.status},
       {"final_text", r.final_text},
       {"error", optional_to_json(r.error)},
       {"provenance", r.provenance}};
}
void from_json(const json& j, CounterfactualRun& r) {
  check_schema(j, "counterfactual_run");
  r.run_id = j.at("run_id").get<std::string>();
  r.event_id = optional_from_json<std::string>(j, "event_id");
  r.original_text = j.at("original_text").get<std::string>();
  r.original_class = optional_from_json<SentimentClass>(j, "original_class");
  r.target_classes = parse_class_set(j.at("target_classes"));
  r.category_order = j.at("category_order").get<std::vector<CounterfactualCategory>>();
  r.selection = j.at("selection").get<SelectionStrategy>();
  r.records = j.at("records").get<std::vector<TransformationRecord>>();
  r.status = j.at("status").get<RunStatus>();
  r.final_text = j.at("final_text").get<std::string>();
  r.error = optional_from_json<RunError>(j, "error");
  r.provenance = j.at("provenance").get<Provenance>();
}

void to_json(json& j, const AblationResult& r) {
  j = {{"schema_version", kRunLogSchemaVersion},
       {"type", "ablation_result"},
       {"event_id", optional_to_json(r.event_id)},
       {"modification", r.modification},
       {"category", r.category},
       {"original_text", r.original_text},
       {"modified_text", r.modified_text},
       {"original_class", optional_to_json(r.original_class)},
       {"resulting_class", optional_to_json(r.resulting_class)},
       {"target_classes", r.target_classes},
       {"success", r.success()},
       {"error", optional_to_json(r.error)},
       {"provenance", r.provenance}};
}
void from_json(const json& j, AblationResult& r) {
  check_schema(j, "ablation_result");
  r.event_id = optional_from_json<std::string>(j, "event_id");
  r.modification = j.at("modification").get<std::string>();
  r.category = j.at("category").get<CounterfactualCategory>();
  r.original_text = j.at("original_text").get<std::string>();
  r.modified_text = j.at("modified_text").get<std::string>();
  r.original_class = optional_from_json<SentimentClass>(j, "original_class");
  r.resulting_class = optional_from_json<SentimentClass>(j, "resulting_class");
  r.target_classes = parse_class_set(j.at("target_classes"));
  r.error = optional_from_json<RunError>(j, "error");
  r.provenance = j.at("provenance").get<Provenance>();
  if (j.at("success").get<bool>() != r.success()) {
    throw Error(ErrorCode::Parse,
                "ablation record for " + r.modification +
                    " has a success flag inconsistent with its resulting class");
  }
}

void to_json(json& j, const ClassificationReport& r) {
  j = json::object();
  for (auto c : kAllClasses) {
    const auto& m = r[c];
    j[std::string(to_string(c))] = {{"precision", m.precision},
                                    {"recall", m.recall},
                                    {"f1", m.f1},
                                    {"support", m.support},
                                    {"precision_undefined", m.precision_undefined},
                                    {"recall_undefined", m.recall_undefined}};
  }
}

void write_dataset(std::span<const EventSentimentPair> pairs, std::ostream& out) {
  for (const auto& p : pairs) out << json(p).dump() << '\n';
}

std::vector<EventSentimentPair> read_dataset(std::istream& in) {
  std::vector<EventSentimentPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      pairs.push_back(json::parse(line).get<EventSentimentPair>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, "dataset line " + std::to_string(line_no) + ": " + e.what(),
                  {}, line_no);
    } catch (const Error& e) {
      throw Error(ErrorCode::Parse, "dataset line " + std::to_string(line_no) + ": " + e.what(),
                  {}, line_no);
    }
  }
  return pairs;
}

void write_skipped(std::span<const SkippedPost> skipped, std::ostream& out) {
  for (const auto& s : skipped) out << json(s).dump() << '\n';
}

}  // namespace dipsent
