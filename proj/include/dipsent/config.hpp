#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dipsent/engine.hpp"
#include "dipsent/oracle.hpp"
#include "dipsent/rewriter.hpp"
#include "dipsent/sentiment.hpp"

namespace dipsent {

enum class OracleKind { Lexicon, Remote };
enum class RewriterKind { Mock, Remote };

/// Everything the CLI and service need, read from an INI-style file with
/// [thresholds], [weights], [ingest], [oracle], [rewriter], [engine] and
/// [service] sections. API keys come only from the environment.
struct AppConfig {
  ClassThresholds thresholds;
  WeightScheme weights = WeightScheme::Log;
  std::size_t ingest_parallelism = 8;

  OracleKind oracle_kind = OracleKind::Lexicon;
  std::filesystem::path lexicon_positive;
  std::filesystem::path lexicon_negative;
  double lexicon_alpha = 1.0;
  RemoteOracleConfig remote_oracle;

  RewriterKind rewriter_kind = RewriterKind::Mock;
  std::filesystem::path mock_table;
  RemoteRewriterConfig remote_rewriter;

  SelectionStrategy selection = SelectionStrategy::FirstInRegistry;
  std::uint64_t seed = 0;
  std::vector<CounterfactualCategory> category_order = default_category_order();
  ClassSet targets{SentimentClass::Neutral, SentimentClass::Positive};
  bool precheck = false;
  std::size_t concurrency = 4;
  std::optional<std::string> fixed_timestamp;

  std::string bind = "127.0.0.1";
  int port = 8080;
  std::filesystem::path store = "store";
};

/// Directory holding the shipped lexicon and mock table. DIPSENT_DATA_DIR
/// overrides the compiled-in location.
std::filesystem::path data_dir();

/// Defaults with data-file paths resolved against data_dir().
AppConfig default_config();

/// Unknown sections or keys are configuration errors.
AppConfig parse_config(std::istream& in, AppConfig base = default_config());
AppConfig load_config(const std::filesystem::path& path);

/// Reads ORACLE_API_KEY and REWRITER_API_KEY.
void apply_environment(AppConfig& config);

/// Comma-separated category names.
std::vector<CounterfactualCategory> parse_category_list(const std::string& csv);

std::shared_ptr<LexiconScorer> make_lexicon(const AppConfig& config);
std::shared_ptr<const SentimentOracle> make_oracle(const AppConfig& config);
std::shared_ptr<const Rewriter> make_rewriter(const AppConfig& config);
EngineOptions make_engine_options(const AppConfig& config);

}  // namespace dipsent
