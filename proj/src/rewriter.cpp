#include "dipsent/rewriter.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "dipsent/error.hpp"

namespace dipsent {

namespace {

using C = CounterfactualCategory;

constexpr std::array<ModificationType, 14> kRegistry{{
    {C::Participants, "participants.replace_lead_negotiator",
     "Replace the lead negotiator with a more dovish alternative",
     "Replace the lead negotiator with alternative"},
    {C::Participants, "participants.include_stakeholders",
     "Include additional stakeholders in the negotiations",
     "Include additional stakeholders"},
    {C::Participants, "participants.exclude_parties",
     "Exclude certain parties from the talks", "Exclude certain parties from talks"},
    {C::Process, "process.negotiation_format",
     "Change the negotiation format to be more transparent",
     "Change the negotiation format"},
    {C::Process, "process.timing", "Modify the timing of diplomatic initiatives",
     "Modify the timing of diplomatic initiatives"},
    {C::Process, "process.coercive_measures",
     "Alter the use of coercive measures (e.g., sanctions, incentives)",
     "Alter the use of coercive measures"},
    {C::Communication, "communication.tone",
     "Modify the tone of official statements (e.g., more conciliatory, more assertive)",
     "Modify the tone of official statements"},
    {C::Communication, "communication.publicity",
     "Change the level of publicity for negotiations (e.g., public vs. private talks)",
     "Change the level of publicity"},
    {C::Communication, "communication.reframe_issues",
     "Reframe key issues in different terms", "Reframe key issues in different terms"},
    {C::Substance, "substance.concessions", "Modify specific concessions offered or demanded",
     "Modify specific concessions offered"},
    {C::Substance, "substance.primary_objective",
     "Change the primary stated objective of the event", "Change the primary objective"},
    {C::Substance, "substance.agreement_scope",
     "Alter the nature or scope of any proposed agreement",
     "Alter the nature of any agreement"},
    {C::Context, "context.location", "Change the geographical location of diplomatic events",
     "Change the location of diplomatic events"},
    {C::Context, "context.symbolic_gestures",
     "Modify symbolic gestures or protocols observed between parties",
     "Modify symbolic gestures between parties"},
}};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string corrective_feedback(std::size_t source_words, std::size_t answer_words,
                                double tolerance) {
  const auto lo = static_cast<std::size_t>(
      std::ceil(static_cast<double>(source_words) * (1.0 - tolerance)));
  const auto hi = static_cast<std::size_t>(
      std::floor(static_cast<double>(source_words) * (1.0 + tolerance)));
  std::ostringstream os;
  os << "\n\nYour previous answer had " << answer_words << " words but the source has "
     << source_words << ". Rewrite it again with between " << lo << " and " << hi
     << " words.";
  return os.str();
}

}  // namespace

std::string_view to_string(CounterfactualCategory c) noexcept {
  switch (c) {
    case C::Participants: return "Participants";
    case C::Process: return "Process";
    case C::Communication: return "Communication";
    case C::Substance: return "Substance";
    case C::Context: return "Context";
  }
  return "Participants";
}

CounterfactualCategory parse_category(std::string_view name) {
  const auto wanted = lower(name);
  for (auto c : kAllCategories) {
    if (lower(to_string(c)) == wanted) return c;
  }
  throw Error(ErrorCode::Validation, "unknown category '" + std::string(name) + "'");
}

std::vector<CounterfactualCategory> default_category_order() {
  return {std::begin(kAllCategories), std::end(kAllCategories)};
}

std::span<const ModificationType> modification_registry() noexcept { return kRegistry; }

std::vector<const ModificationType*> modifications_for(CounterfactualCategory category) {
  std::vector<const ModificationType*> out;
  for (const auto& m : kRegistry) {
    if (m.category == category) out.push_back(&m);
  }
  return out;
}

const ModificationType& find_modification(std::string_view key) {
  for (const auto& m : kRegistry) {
    if (m.key == key) return m;
  }
  throw Error(ErrorCode::Configuration, "unknown modification '" + std::string(key) + "'");
}

std::string gerund_clause(std::string_view instruction) {
  const auto space = instruction.find(' ');
  std::string verb = lower(instruction.substr(0, space));
  if (!verb.empty() && verb.back() == 'e') verb.pop_back();
  verb += "ing";
  if (space == std::string_view::npos) return verb;
  return verb + std::string(instruction.substr(space));
}

PromptPair construct_prompt(std::string_view text, const ModificationType& modification) {
  if (text.empty()) {
    throw Error(ErrorCode::Validation, "cannot build a prompt for empty text");
  }
  const std::string category = lower(to_string(modification.category));
  PromptPair prompt;
  prompt.system =
      "You are an expert in diplomatic communication. You rewrite descriptions of "
      "diplomatic events to produce counterfactual versions of them. Modify only the " +
      category + " aspect of the text, applying this modification type: " +
      std::string(modification.instruction) +
      ". Maintain the core facts of the event, keep the result a plausible "
      "alternative account, and keep it of similar length to the original. Reply with "
      "the rewritten text only.";
  prompt.user = "Original text:\n" + std::string(text) + "\n\nModification type: " +
                std::string(modification.instruction) + "\nRewrite the text: change the " +
                category + " aspect by " + gerund_clause(modification.instruction) + ".";
  return prompt;
}

std::size_t whitespace_token_count(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

bool within_length_band(std::string_view input, std::string_view output, double tolerance) {
  const double in = static_cast<double>(whitespace_token_count(input));
  const double out = static_cast<double>(whitespace_token_count(output));
  return out >= in * (1.0 - tolerance) && out <= in * (1.0 + tolerance);
}

void validate(const RemoteRewriterConfig& config) {
  if (config.endpoint.empty()) {
    throw Error(ErrorCode::Configuration, "rewriter endpoint is empty");
  }
  if (config.timeout.count() <= 0 || config.max_retries < 0 || config.max_tokens <= 0) {
    throw Error(ErrorCode::Configuration,
                "rewriter timeout and max_tokens must be positive, max_retries >= 0");
  }
  if (config.length_tolerance && !(*config.length_tolerance >= 0.0)) {
    throw Error(ErrorCode::Configuration, "length tolerance must be >= 0");
  }
  split_url(config.endpoint);
}

RemoteRewriter::RemoteRewriter(RemoteRewriterConfig config,
                               std::shared_ptr<HttpTransport> transport, Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
  validate(config_);
}

std::string RemoteRewriter::rewrite(std::string_view text,
                                    const ModificationType& modification) const {
  auto prompt = construct_prompt(text, modification);
  HttpHeaders headers;
  if (!config_.api_key.empty()) {
    headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  }
  const RetryPolicy policy{config_.max_retries, config_.backoff_base, config_.jitter};
  const std::size_t source_words = whitespace_token_count(text);

  std::size_t last_words = 0;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    const nlohmann::json request = {{"system", prompt.system},
                                    {"user", prompt.user},
                                    {"max_tokens", config_.max_tokens},
                                    {"temperature", config_.temperature}};
    const auto res = post_with_retries(*transport_, config_.endpoint, request.dump(),
                                       headers, config_.timeout, policy, sleep_, "rewriter");
    std::string completion;
    try {
      completion = nlohmann::json::parse(res.body).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::OracleProtocol,
                  std::string("malformed rewriter response: ") + e.what());
    }
    completion = trim(completion);
    if (completion.empty()) {
      throw Error(ErrorCode::RewriteEmpty,
                  "rewriter returned an empty completion for " +
                      std::string(modification.key));
    }
    if (!config_.length_tolerance ||
        within_length_band(text, completion, *config_.length_tolerance)) {
      return completion;
    }
    last_words = whitespace_token_count(completion);
    prompt.user += corrective_feedback(source_words, last_words, *config_.length_tolerance);
  }
  throw Error(ErrorCode::RewriteOutOfBand,
              "rewrite for " + std::string(modification.key) + " stayed outside the length band (" +
                  std::to_string(last_words) + " vs " + std::to_string(source_words) +
                  " words) after " + std::to_string(config_.max_retries) + " retries");
}

std::string RemoteRewriter::describe() const {
  std::ostringstream os;
  os << "remote(" << config_.endpoint << ",temperature=" << config_.temperature
     << ",max_tokens=" << config_.max_tokens << ")";
  return os.str();
}

std::string remote_rewrite(std::string_view text, const ModificationType& modification,
                           const RemoteRewriterConfig& config) {
  return RemoteRewriter(config).rewrite(text, modification);
}

MockTable parse_mock_table(std::istream& in) {
  MockTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::Configuration,
                  "mock table line " + std::to_string(line_no) + " lacks '='", {}, line_no);
    }
    auto key = trim(std::string_view(line).substr(0, eq));
    auto fragment = trim(std::string_view(line).substr(eq + 1));
    if (key.empty() || fragment.empty()) {
      throw Error(ErrorCode::Configuration,
                  "mock table line " + std::to_string(line_no) + " has an empty side", {},
                  line_no);
    }
    table.insert_or_assign(std::move(key), std::move(fragment));
  }
  return table;
}

MockTable load_mock_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Configuration, "cannot open mock table " + path.string());
  return parse_mock_table(in);
}

MockRewriter::MockRewriter(MockTable table, std::vector<std::string> positive_vocab,
                           std::vector<std::string> negative_vocab, std::uint64_t seed,
                           std::string separator)
    : table_(std::move(table)),
      positive_(std::move(positive_vocab)),
      negative_(std::move(negative_vocab)),
      seed_(seed),
      separator_(std::move(separator)) {
  std::sort(positive_.begin(), positive_.end());
  std::sort(negative_.begin(), negative_.end());
}

std::string MockRewriter::rewrite(std::string_view text,
                                  const ModificationType& modification) const {
  auto it = table_.find(modification.key);
  if (it == table_.end()) {
    throw Error(ErrorCode::Configuration,
                "mock table has no fragment for " + std::string(modification.key));
  }
  const std::uint64_t text_hash = stable_hash(text);
  const std::uint64_t key_hash = stable_hash(modification.key);
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(text_hash),
                    static_cast<std::uint32_t>(text_hash >> 32),
                    static_cast<std::uint32_t>(key_hash),
                    static_cast<std::uint32_t>(key_hash >> 32)};
  std::mt19937_64 rng(seq);

  auto pick = [&](const std::vector<std::string>& vocab, std::string_view which) {
    if (vocab.empty()) {
      throw Error(ErrorCode::Configuration,
                  "mock fragment needs a " + std::string(which) + " vocabulary");
    }
    return vocab[rng() % vocab.size()];
  };

  const std::string& tmpl = it->second;
  std::string fragment;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl.compare(i, 5, "{pos}") == 0) {
      fragment += pick(positive_, "positive");
      i += 5;
    } else if (tmpl.compare(i, 5, "{neg}") == 0) {
      fragment += pick(negative_, "negative");
      i += 5;
    } else {
      fragment += tmpl[i++];
    }
  }
  if (text.empty()) return fragment;
  return std::string(text) + separator_ + fragment;
}

std::string MockRewriter::describe() const {
  return "mock(seed=" + std::to_string(seed_) + ",entries=" + std::to_string(table_.size()) +
         ")";
}

std::string mock_rewrite(std::string_view text, const ModificationType& modification,
                         const MockRewriter& mock) {
  return mock.rewrite(text, modification);
}

std::uint64_t stable_hash(std::string_view bytes) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace dipsent
