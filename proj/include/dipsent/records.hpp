#pragma once

// JSON encodings of the domain types: dump records, dataset lines, run-log
// records and HTTP bodies all go through these.

#include <json.hpp>

#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "dipsent/corpus.hpp"
#include "dipsent/engine.hpp"
#include "dipsent/oracle.hpp"
#include "dipsent/rewriter.hpp"
#include "dipsent/sentiment.hpp"

namespace dipsent {

using json = nlohmann::json;

void to_json(json& j, SentimentClass c);
void from_json(const json& j, SentimentClass& c);
void to_json(json& j, const ClassSet& s);
void from_json(const json& j, ClassSet& s);
void to_json(json& j, const SentimentProbs& p);
void from_json(const json& j, SentimentProbs& p);

void to_json(json& j, EventType t);
void from_json(const json& j, EventType& t);
void to_json(json& j, Actor a);
void from_json(const json& j, Actor& a);
void to_json(json& j, Theme t);
void from_json(const json& j, Theme& t);

// Dump records. to_json writes the `kind` discriminator; from_json ignores it.
void to_json(json& j, const EventNarrative& n);
void from_json(const json& j, EventNarrative& n);
void to_json(json& j, const Comment& c);
void from_json(const json& j, Comment& c);

void to_json(json& j, const EventSentimentPair& p);
void from_json(const json& j, EventSentimentPair& p);
void to_json(json& j, const SkippedPost& s);
void from_json(const json& j, SkippedPost& s);

void to_json(json& j, CounterfactualCategory c);
void from_json(const json& j, CounterfactualCategory& c);
void to_json(json& j, RunStatus s);
void from_json(const json& j, RunStatus& s);
void to_json(json& j, SelectionStrategy s);
void from_json(const json& j, SelectionStrategy& s);

void to_json(json& j, const TransformationRecord& r);
void from_json(const json& j, TransformationRecord& r);
void to_json(json& j, const RunError& e);
void from_json(const json& j, RunError& e);
void to_json(json& j, const Provenance& p);
void from_json(const json& j, Provenance& p);
void to_json(json& j, const CounterfactualRun& r);
void from_json(const json& j, CounterfactualRun& r);
void to_json(json& j, const AblationResult& r);
void from_json(const json& j, AblationResult& r);

void to_json(json& j, const ClassificationReport& r);

/// Accepts a single class name or an array of names.
ClassSet parse_class_set(const json& j);

void write_dataset(std::span<const EventSentimentPair> pairs, std::ostream& out);
std::vector<EventSentimentPair> read_dataset(std::istream& in);
void write_skipped(std::span<const SkippedPost> skipped, std::ostream& out);

}  // namespace dipsent
