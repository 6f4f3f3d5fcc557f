#include "dipsent/oracle.hpp"

#include <json.hpp>

#include <cctype>
#include <fstream>
#include <sstream>

#include "dipsent/error.hpp"

namespace dipsent {

namespace {

bool is_token_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

LexiconScorer::LexiconScorer(std::set<std::string> positive_terms,
                             std::set<std::string> negative_terms, double alpha)
    : positive_(std::move(positive_terms)),
      negative_(std::move(negative_terms)),
      alpha_(alpha) {
  if (!(alpha_ > 0.0)) {
    throw Error(ErrorCode::Configuration, "lexicon smoothing alpha must be > 0");
  }
  std::vector<std::string> overlap;
  for (const auto& t : positive_) {
    if (negative_.contains(t)) overlap.push_back(t);
  }
  if (!overlap.empty()) {
    throw Error(ErrorCode::Configuration,
                "terms listed as both positive and negative", overlap);
  }
}

LexiconHits LexiconScorer::hits(std::string_view text) const {
  LexiconHits h;
  for (const auto& token : tokenize(text)) {
    if (positive_.contains(token)) ++h.positive;
    else if (negative_.contains(token)) ++h.negative;
  }
  return h;
}

SentimentProbs LexiconScorer::predict(std::string_view text) const {
  const auto h = hits(text);
  const double np = static_cast<double>(h.positive);
  const double nn = static_cast<double>(h.negative);
  const double denom = np + nn + 3.0 * alpha_;
  SentimentProbs p;
  p.p_pos = (np + alpha_) / denom;
  p.p_neg = (nn + alpha_) / denom;
  p.p_neu = alpha_ / denom;
  return p;
}

std::string LexiconScorer::describe() const {
  return "lexicon(alpha=" + format_number(alpha_) +
         ",positive=" + std::to_string(positive_.size()) +
         ",negative=" + std::to_string(negative_.size()) + ")";
}

SentimentProbs lexicon_predict(std::string_view text, const LexiconScorer& scorer) {
  return scorer.predict(text);
}

std::set<std::string> parse_term_list(std::istream& in) {
  std::set<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (auto& token : tokenize(line)) terms.insert(std::move(token));
  }
  return terms;
}

std::set<std::string> load_term_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::Configuration, "cannot open term list " + path.string());
  }
  return parse_term_list(in);
}

void validate(const RemoteOracleConfig& config) {
  if (config.endpoint.empty()) {
    throw Error(ErrorCode::Configuration, "oracle endpoint is empty");
  }
  if (config.timeout.count() <= 0) {
    throw Error(ErrorCode::Configuration, "oracle timeout must be positive");
  }
  if (config.max_retries < 0) {
    throw Error(ErrorCode::Configuration, "oracle max_retries must be >= 0");
  }
  split_url(config.endpoint);
}

RemoteOracle::RemoteOracle(RemoteOracleConfig config,
                           std::shared_ptr<HttpTransport> transport, Sleeper sleep)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleep_(std::move(sleep)) {
  validate(config_);
}

SentimentProbs RemoteOracle::predict(std::string_view text) const {
  const nlohmann::json request = {{"text", std::string(text)}};
  HttpHeaders headers;
  if (!config_.api_key.empty()) {
    headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  }
  const RetryPolicy policy{config_.max_retries, config_.backoff_base, config_.jitter};
  const auto res = post_with_retries(*transport_, config_.endpoint, request.dump(),
                                     headers, config_.timeout, policy, sleep_,
                                     "sentiment oracle");
  SentimentProbs probs;
  try {
    const auto body = nlohmann::json::parse(res.body);
    probs.p_neg = body.at("p_neg").get<double>();
    probs.p_neu = body.at("p_neu").get<double>();
    probs.p_pos = body.at("p_pos").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::OracleProtocol,
                std::string("malformed oracle response: ") + e.what());
  }
  try {
    validate(probs);
  } catch (const Error& e) {
    throw Error(ErrorCode::OracleProtocol,
                std::string("invalid oracle probabilities: ") + e.what());
  }
  return probs;
}

std::string RemoteOracle::describe() const {
  return "remote(" + config_.endpoint + ")";
}

SentimentProbs remote_predict(std::string_view text, const RemoteOracleConfig& config) {
  return RemoteOracle(config).predict(text);
}

ClassificationReport classification_report(std::span<const SentimentClass> predictions,
                                           std::span<const SentimentClass> labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw Error(ErrorCode::Validation,
                "predictions and labels must be non-empty and equally long");
  }
  std::array<std::size_t, 3> tp{}, predicted{}, actual{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto p = static_cast<std::size_t>(predictions[i]);
    const auto l = static_cast<std::size_t>(labels[i]);
    ++predicted[p];
    ++actual[l];
    if (p == l) ++tp[p];
  }
  ClassificationReport report;
  for (std::size_t c = 0; c < 3; ++c) {
    auto& m = report.per_class[c];
    m.support = actual[c];
    m.precision_undefined = predicted[c] == 0;
    m.recall_undefined = actual[c] == 0;
    m.precision = m.precision_undefined
                      ? 0.0
                      : static_cast<double>(tp[c]) / static_cast<double>(predicted[c]);
    m.recall = m.recall_undefined
                   ? 0.0
                   : static_cast<double>(tp[c]) / static_cast<double>(actual[c]);
    const double denom = m.precision + m.recall;
    m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
  }
  return report;
}

}  // namespace dipsent
