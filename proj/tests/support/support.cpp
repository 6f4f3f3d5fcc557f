#include "support.hpp"

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dipsent/cli.hpp"
#include "dipsent/error.hpp"

namespace dipsent::test {

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string item; std::getline(ss, item, sep);) out.push_back(item);
  return out;
}

template <class F>
void for_each_row(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing fixture " + path.string());
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    f(split(line));
  }
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); }

Provenance fixture_provenance() {
  return {"2025-01-01T00:00:00.000Z", "2025-01-01T00:00:00.000Z", "fixture", "fixture", 0.1, 0};
}

TransformationRecord fixture_record(int step, CounterfactualCategory c, const std::string& before,
                                    SentimentProbs probs) {
  TransformationRecord r;
  r.step_index = step;
  r.category = c;
  r.modification = std::string(modifications_for(c).front()->key);
  r.text_before = before;
  r.text_after = before + " Revision " + std::to_string(step) + ".";
  r.predicted_probs = probs;
  r.predicted_score = compound_score(probs);
  r.predicted_class = classify(r.predicted_score);
  return r;
}

std::string padded(std::size_t n, int width) {
  std::string s = std::to_string(n);
  if (static_cast<int>(s.size()) < width) s.insert(0, width - s.size(), '0');
  return s;
}

}  // namespace

std::filesystem::path data_path(std::string_view relative) {
  return std::filesystem::path(DIPSENT_TEST_DATA_DIR) / relative;
}

std::filesystem::path fresh_dir(std::string_view name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("dipsent-test-" + std::to_string(::getpid()) + "-" + std::string(name));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

std::shared_ptr<LexiconScorer> shipped_lexicon() {
  static const auto lexicon = std::make_shared<LexiconScorer>(
      load_term_list(data_path("lexicon/positive.txt")),
      load_term_list(data_path("lexicon/negative.txt")));
  return lexicon;
}

std::shared_ptr<MockRewriter> shipped_mock(std::uint64_t seed) {
  const auto lex = shipped_lexicon();
  return std::make_shared<MockRewriter>(
      load_mock_table(data_path("mock_table.txt")),
      std::vector<std::string>(lex->positive_terms().begin(), lex->positive_terms().end()),
      std::vector<std::string>(lex->negative_terms().begin(), lex->negative_terms().end()), seed);
}

BreakdownCounts load_breakdown_counts(const std::filesystem::path& path) {
  BreakdownCounts counts;
  for_each_row(path, [&](const std::vector<std::string>& row) {
    if (row.at(0) == "order") {
      for (std::size_t i = 1; i < row.size(); ++i) counts.order.push_back(parse_category(row[i]));
    } else if (row.at(0) == "success") {
      counts.successes.emplace_back(parse_category(row.at(1)), to_size(row.at(2)));
    } else if (row.at(0) == "failure") {
      counts.failures = to_size(row.at(1));
    }
  });
  return counts;
}

std::vector<CounterfactualRun> expand_breakdown(const BreakdownCounts& counts) {
  std::vector<CounterfactualRun> runs;
  std::size_t n = 0;
  auto make_run = [&](std::optional<CounterfactualCategory> success_at) {
    CounterfactualRun run;
    run.run_id = "fx-" + padded(++n, 5);
    run.event_id = run.run_id;
    run.original_text = "Fixture event " + padded(n, 5) + ": delegations met without result.";
    run.original_class = SentimentClass::Negative;
    run.target_classes = ClassSet{SentimentClass::Neutral, SentimentClass::Positive};
    run.category_order = counts.order;
    run.provenance = fixture_provenance();
    std::string text = run.original_text;
    for (std::size_t i = 0; i < counts.order.size(); ++i) {
      const auto c = counts.order[i];
      const bool hit = success_at && *success_at == c;
      auto rec = fixture_record(static_cast<int>(i) + 1, c, text,
                                hit ? kPositiveProbs : kNegativeProbs);
      text = rec.text_after;
      run.records.push_back(std::move(rec));
      if (hit) break;
    }
    run.final_text = text;
    run.status = success_at ? RunStatus::Success : RunStatus::Failure;
    runs.push_back(std::move(run));
  };
  for (const auto& [category, count] : counts.successes) {
    for (std::size_t i = 0; i < count; ++i) make_run(category);
  }
  for (std::size_t i = 0; i < counts.failures; ++i) make_run(std::nullopt);
  return runs;
}

std::vector<AblationCount> load_ablation_counts(const std::filesystem::path& path) {
  std::vector<AblationCount> counts;
  for_each_row(path, [&](const std::vector<std::string>& row) {
    if (row.at(0) == "modification") return;
    counts.push_back({row.at(0), to_size(row.at(1)), to_size(row.at(2))});
  });
  return counts;
}

std::vector<AblationResult> expand_ablation(std::span<const AblationCount> counts) {
  std::vector<AblationResult> results;
  for (const auto& row : counts) {
    const auto& m = find_modification(row.modification);
    for (std::size_t i = 0; i < row.total; ++i) {
      AblationResult r;
      r.event_id = "abl-" + padded(i + 1, 5);
      r.modification = row.modification;
      r.category = m.category;
      r.original_text = "Ablation case " + padded(i + 1, 5) + ".";
      r.modified_text = r.original_text + " " + row.modification;
      r.original_class = SentimentClass::Negative;
      r.target_classes = ClassSet{SentimentClass::Neutral, SentimentClass::Positive};
      if (i < row.successful) {
        r.resulting_class = i % 2 ? SentimentClass::Neutral : SentimentClass::Positive;
      } else {
        r.resulting_class = SentimentClass::Negative;
      }
      r.provenance = fixture_provenance();
      results.push_back(std::move(r));
    }
  }
  return results;
}

Confusion load_confusion(const std::filesystem::path& path) {
  Confusion m{};
  for_each_row(path, [&](const std::vector<std::string>& row) {
    if (row.at(0).starts_with("true")) return;
    const auto t = static_cast<std::size_t>(parse_sentiment_class(row.at(0)));
    for (std::size_t p = 0; p < 3; ++p) m[t][p] = to_size(row.at(p + 1));
  });
  return m;
}

void expand_confusion(const Confusion& m, std::vector<SentimentClass>& predictions,
                      std::vector<SentimentClass>& labels) {
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t k = 0; k < m[t][p]; ++k) {
        labels.push_back(kAllClasses[t]);
        predictions.push_back(kAllClasses[p]);
      }
    }
  }
}

SentimentClass exact_class(long np, long nn, long alpha, long tau_num, long tau_den) {
  const long num = (np - nn) * tau_den;
  const long band = tau_num * (np + nn + 3 * alpha);
  if (num >= band) return SentimentClass::Positive;
  if (num <= -band) return SentimentClass::Negative;
  return SentimentClass::Neutral;
}

std::optional<int> exact_steps_to_leave_negative(long nn, long per_step, int max_steps,
                                                 long tau_num, long tau_den) {
  for (int k = 1; k <= max_steps; ++k) {
    if (exact_class(per_step * k, nn, 1, tau_num, tau_den) != SentimentClass::Negative) return k;
  }
  return std::nullopt;
}

std::pair<long, long> count_hits(std::string_view text, const LexiconScorer& lexicon) {
  long np = 0;
  long nn = 0;
  for (const auto& t : tokenize(text)) {
    np += lexicon.positive_terms().contains(t) ? 1 : 0;
    nn += lexicon.negative_terms().contains(t) ? 1 : 0;
  }
  return {np, nn};
}

Corpus synthetic_corpus(std::span<const int> negative_terms, std::string_view id_prefix) {
  static const char* const kFiller[] = {"delegates", "met",     "in",       "the",
                                        "capital",   "to",      "review",   "regional",
                                        "matters",   "amid",    "reports",  "of",
                                        "ongoing",   "between", "ministers"};
  constexpr std::size_t kFillerCount = std::size(kFiller);
  const auto& neg_set = shipped_lexicon()->negative_terms();
  const std::vector<std::string> neg(neg_set.begin(), neg_set.end());

  static const char* const kComments[] = {"the talks collapsed amid threats",
                                          "more tension and distrust here", "a walkout again"};
  static const std::int64_t kVotes[] = {14, 3, -2};

  Corpus corpus;
  for (std::size_t i = 0; i < negative_terms.size(); ++i) {
    EventNarrative post;
    post.id = std::string(id_prefix) + "-" + padded(i + 1, 3);
    post.title = "Synthetic event " + padded(i + 1, 3);
    std::string body;
    for (int k = 0; k < negative_terms[i]; ++k) {
      if (!body.empty()) body += ' ';
      body += kFiller[(i + static_cast<std::size_t>(k)) % kFillerCount];
      body += ' ';
      body += neg[(i * 5 + static_cast<std::size_t>(k) * 3) % neg.size()];
    }
    body += body.empty() ? "Ministers met." : ". Ministers met.";
    post.body = body;
    post.event_type = kAllEventTypes[i % std::size(kAllEventTypes)];
    post.actor_tags = {kAllActors[i % 5], kAllActors[(i + 2) % 5]};
    post.theme_tags = {kAllThemes[i % 4]};
    for (std::size_t c = 0; c < 3; ++c) {
      Comment comment;
      comment.id = post.id + "-c" + std::to_string(c + 1);
      comment.post_id = post.id;
      comment.text = kComments[c];
      comment.vote_score = kVotes[c];
      corpus.comments.push_back(std::move(comment));
    }
    corpus.posts.push_back(std::move(post));
  }
  return corpus;
}

std::vector<int> desk_scale_design() {
  std::vector<int> design;
  int crossing = 0;
  int stuck = 0;
  for (int i = 0; i < 50; ++i) {
    const int slot = i % 10;
    if (slot == 2 || slot == 5 || slot == 8) {
      design.push_back(22 + stuck++ % 9);
    } else {
      design.push_back(2 + crossing++ % 17);
    }
  }
  return design;
}

std::vector<int> three_event_design() { return {2, 6, 24}; }

SentimentProbs ScriptedOracle::predict(std::string_view) const {
  const auto i = static_cast<std::size_t>(calls++);
  return script_.at(std::min(i, script_.size() - 1));
}

SentimentProbs FailingOracle::predict(std::string_view text) const {
  if (++calls == fail_on_) throw Error(code_, "injected oracle failure");
  return inner_.predict(text);
}

std::string FailingRewriter::rewrite(std::string_view text, const ModificationType& m) const {
  if (++calls == fail_on_) throw Error(code_, "injected rewriter failure");
  return inner_.rewrite(text, m);
}

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dipsent");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  CliResult r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace dipsent::test
