#include "dipsent/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dipsent/error.hpp"

#ifndef DIPSENT_DATA_DIR
#define DIPSENT_DATA_DIR "data"
#endif

namespace dipsent {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kKnownKeys = {
    {"thresholds", {"tau"}},
    {"weights", {"scheme"}},
    {"ingest", {"parallelism"}},
    {"oracle",
     {"kind", "lexicon_positive", "lexicon_negative", "alpha", "endpoint", "timeout_ms",
      "max_retries", "backoff_ms", "jitter"}},
    {"rewriter",
     {"kind", "mock_table", "endpoint", "timeout_ms", "max_retries", "backoff_ms", "jitter",
      "max_tokens", "temperature", "length_tolerance"}},
    {"engine",
     {"selection", "seed", "category_order", "targets", "precheck", "concurrency",
      "fixed_timestamp"}},
    {"service", {"bind", "port", "store"}},
};

template <class T>
T get_as(const pt::ptree& section, const std::string& key, const std::string& where) {
  try {
    return section.get<T>(key);
  } catch (const pt::ptree_error&) {
    throw Error(ErrorCode::Configuration, "invalid value for " + where + "." + key);
  }
}

ClassSet parse_class_list(const std::string& csv) {
  ClassSet set;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    set.insert(parse_sentiment_class(item.substr(b, e - b + 1)));
  }
  if (set.empty()) throw Error(ErrorCode::Configuration, "empty target class list");
  return set;
}

std::filesystem::path resolve(const std::filesystem::path& p,
                              const std::filesystem::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("DIPSENT_DATA_DIR"); env && *env) return env;
  return DIPSENT_DATA_DIR;
}

AppConfig default_config() {
  AppConfig c;
  const auto dir = data_dir();
  c.lexicon_positive = dir / "lexicon" / "positive.txt";
  c.lexicon_negative = dir / "lexicon" / "negative.txt";
  c.mock_table = dir / "mock_table.txt";
  return c;
}

AppConfig parse_config(std::istream& in, AppConfig c) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::Configuration, std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    auto known = kKnownKeys.find(section);
    if (known == kKnownKeys.end()) {
      throw Error(ErrorCode::Configuration, "unknown config section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      if (!known->second.contains(key)) {
        throw Error(ErrorCode::Configuration, "unknown config key " + section + "." + key);
      }
    }
  }

  try {
    if (auto s = tree.get_child_optional("thresholds")) {
      if (s->count("tau")) c.thresholds.tau = get_as<double>(*s, "tau", "thresholds");
    }
    if (auto s = tree.get_child_optional("weights")) {
      if (s->count("scheme")) c.weights = parse_weight_scheme(s->get<std::string>("scheme"));
    }
    if (auto s = tree.get_child_optional("ingest")) {
      if (s->count("parallelism"))
        c.ingest_parallelism = get_as<std::size_t>(*s, "parallelism", "ingest");
    }
    if (auto s = tree.get_child_optional("oracle")) {
      if (s->count("kind")) {
        const auto kind = s->get<std::string>("kind");
        if (kind == "lexicon") c.oracle_kind = OracleKind::Lexicon;
        else if (kind == "remote") c.oracle_kind = OracleKind::Remote;
        else throw Error(ErrorCode::Configuration, "oracle.kind must be lexicon or remote");
      }
      if (s->count("lexicon_positive")) c.lexicon_positive = s->get<std::string>("lexicon_positive");
      if (s->count("lexicon_negative")) c.lexicon_negative = s->get<std::string>("lexicon_negative");
      if (s->count("alpha")) c.lexicon_alpha = get_as<double>(*s, "alpha", "oracle");
      if (s->count("endpoint")) c.remote_oracle.endpoint = s->get<std::string>("endpoint");
      if (s->count("timeout_ms"))
        c.remote_oracle.timeout = std::chrono::milliseconds(get_as<long>(*s, "timeout_ms", "oracle"));
      if (s->count("max_retries")) c.remote_oracle.max_retries = get_as<int>(*s, "max_retries", "oracle");
      if (s->count("backoff_ms"))
        c.remote_oracle.backoff_base = std::chrono::milliseconds(get_as<long>(*s, "backoff_ms", "oracle"));
      if (s->count("jitter")) c.remote_oracle.jitter = get_as<bool>(*s, "jitter", "oracle");
    }
    if (auto s = tree.get_child_optional("rewriter")) {
      if (s->count("kind")) {
        const auto kind = s->get<std::string>("kind");
        if (kind == "mock") c.rewriter_kind = RewriterKind::Mock;
        else if (kind == "remote") c.rewriter_kind = RewriterKind::Remote;
        else throw Error(ErrorCode::Configuration, "rewriter.kind must be mock or remote");
      }
      if (s->count("mock_table")) c.mock_table = s->get<std::string>("mock_table");
      auto& r = c.remote_rewriter;
      if (s->count("endpoint")) r.endpoint = s->get<std::string>("endpoint");
      if (s->count("timeout_ms"))
        r.timeout = std::chrono::milliseconds(get_as<long>(*s, "timeout_ms", "rewriter"));
      if (s->count("max_retries")) r.max_retries = get_as<int>(*s, "max_retries", "rewriter");
      if (s->count("backoff_ms"))
        r.backoff_base = std::chrono::milliseconds(get_as<long>(*s, "backoff_ms", "rewriter"));
      if (s->count("jitter")) r.jitter = get_as<bool>(*s, "jitter", "rewriter");
      if (s->count("max_tokens")) r.max_tokens = get_as<int>(*s, "max_tokens", "rewriter");
      if (s->count("temperature")) r.temperature = get_as<double>(*s, "temperature", "rewriter");
      if (s->count("length_tolerance")) {
        const auto v = s->get<std::string>("length_tolerance");
        if (v == "off" || v == "none") r.length_tolerance.reset();
        else r.length_tolerance = get_as<double>(*s, "length_tolerance", "rewriter");
      }
    }
    if (auto s = tree.get_child_optional("engine")) {
      if (s->count("selection")) c.selection = parse_selection(s->get<std::string>("selection"));
      if (s->count("seed")) c.seed = get_as<std::uint64_t>(*s, "seed", "engine");
      if (s->count("category_order"))
        c.category_order = parse_category_list(s->get<std::string>("category_order"));
      if (s->count("targets")) c.targets = parse_class_list(s->get<std::string>("targets"));
      if (s->count("precheck")) c.precheck = get_as<bool>(*s, "precheck", "engine");
      if (s->count("concurrency")) c.concurrency = get_as<std::size_t>(*s, "concurrency", "engine");
      if (s->count("fixed_timestamp")) c.fixed_timestamp = s->get<std::string>("fixed_timestamp");
    }
    if (auto s = tree.get_child_optional("service")) {
      if (s->count("bind")) c.bind = s->get<std::string>("bind");
      if (s->count("port")) c.port = get_as<int>(*s, "port", "service");
      if (s->count("store")) c.store = s->get<std::string>("store");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Configuration) throw;
    throw Error(ErrorCode::Configuration, std::string("config: ") + e.what());
  }
  validate(c.thresholds);
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Configuration, "cannot open config " + path.string());
  auto c = parse_config(in);
  // Relative data paths in a config file are relative to that file.
  const auto base = path.parent_path();
  const auto defaults = default_config();
  if (c.lexicon_positive != defaults.lexicon_positive)
    c.lexicon_positive = resolve(c.lexicon_positive, base);
  if (c.lexicon_negative != defaults.lexicon_negative)
    c.lexicon_negative = resolve(c.lexicon_negative, base);
  if (c.mock_table != defaults.mock_table) c.mock_table = resolve(c.mock_table, base);
  return c;
}

void apply_environment(AppConfig& config) {
  if (const char* key = std::getenv("ORACLE_API_KEY")) config.remote_oracle.api_key = key;
  if (const char* key = std::getenv("REWRITER_API_KEY")) config.remote_rewriter.api_key = key;
}

std::vector<CounterfactualCategory> parse_category_list(const std::string& csv) {
  std::vector<CounterfactualCategory> order;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    order.push_back(parse_category(item.substr(b, e - b + 1)));
  }
  return order;
}

std::shared_ptr<LexiconScorer> make_lexicon(const AppConfig& config) {
  return std::make_shared<LexiconScorer>(load_term_list(config.lexicon_positive),
                                         load_term_list(config.lexicon_negative),
                                         config.lexicon_alpha);
}

std::shared_ptr<const SentimentOracle> make_oracle(const AppConfig& config) {
  if (config.oracle_kind == OracleKind::Remote) {
    return std::make_shared<RemoteOracle>(config.remote_oracle);
  }
  return make_lexicon(config);
}

std::shared_ptr<const Rewriter> make_rewriter(const AppConfig& config) {
  if (config.rewriter_kind == RewriterKind::Remote) {
    return std::make_shared<RemoteRewriter>(config.remote_rewriter);
  }
  const auto lexicon = make_lexicon(config);
  return std::make_shared<MockRewriter>(
      load_mock_table(config.mock_table),
      std::vector<std::string>(lexicon->positive_terms().begin(), lexicon->positive_terms().end()),
      std::vector<std::string>(lexicon->negative_terms().begin(), lexicon->negative_terms().end()),
      config.seed);
}

EngineOptions make_engine_options(const AppConfig& config) {
  EngineOptions options;
  options.thresholds = config.thresholds;
  options.selection = config.selection;
  options.seed = config.seed;
  options.precheck = config.precheck;
  if (config.fixed_timestamp) {
    options.clock = std::make_shared<FixedClock>(*config.fixed_timestamp);
  }
  return options;
}

}  // namespace dipsent
