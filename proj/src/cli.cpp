#include "dipsent/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "dipsent/config.hpp"
#include "dipsent/corpus.hpp"
#include "dipsent/engine.hpp"
#include "dipsent/error.hpp"
#include "dipsent/evaluation.hpp"
#include "dipsent/records.hpp"
#include "dipsent/service.hpp"

namespace dipsent {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitItems = 1;
constexpr int kExitUsage = 2;

constexpr const char* kDryRunInstant = "1970-01-01T00:00:00.000Z";

std::atomic<bool> g_stop_requested{false};

extern "C" void on_stop_signal(int) { g_stop_requested = true; }

struct Overrides {
  std::optional<double> tau;
  std::optional<std::string> weights;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> selection;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> order;
  std::optional<std::string> targets;
  std::optional<std::size_t> concurrency;
  std::optional<std::string> fixed_timestamp;
  std::optional<std::string> oracle_endpoint;
  std::optional<std::string> rewriter_endpoint;
  bool precheck = false;
  bool mock = false;
};

ClassSet parse_class_csv(const std::string& csv) {
  ClassSet set;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) set.insert(parse_sentiment_class(item));
  }
  if (set.empty()) throw Error(ErrorCode::Configuration, "empty class list");
  return set;
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> items;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

void apply(const Overrides& o, AppConfig& c) {
  if (o.tau) c.thresholds.tau = *o.tau;
  if (o.weights) c.weights = parse_weight_scheme(*o.weights);
  if (o.parallelism) c.ingest_parallelism = *o.parallelism;
  if (o.selection) c.selection = parse_selection(*o.selection);
  if (o.seed) c.seed = *o.seed;
  if (o.order) c.category_order = parse_category_list(*o.order);
  if (o.targets) c.targets = parse_class_csv(*o.targets);
  if (o.concurrency) c.concurrency = *o.concurrency;
  if (o.fixed_timestamp) c.fixed_timestamp = *o.fixed_timestamp;
  if (o.oracle_endpoint) {
    c.remote_oracle.endpoint = *o.oracle_endpoint;
    c.oracle_kind = OracleKind::Remote;
  }
  if (o.rewriter_endpoint) {
    c.remote_rewriter.endpoint = *o.rewriter_endpoint;
    c.rewriter_kind = RewriterKind::Remote;
  }
  if (o.precheck) c.precheck = true;
  if (o.mock) {
    c.oracle_kind = OracleKind::Lexicon;
    c.rewriter_kind = RewriterKind::Mock;
  }
  validate(c.thresholds);
}

void report_error(std::ostream& err, const Error& e) {
  err << "error: " << code_name(e.code()) << ": " << e.what() << '\n';
  if (e.line()) err << "  line: " << *e.line() << '\n';
  for (const auto& id : e.ids()) err << "  id: " << id << '\n';
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

struct Clients {
  std::shared_ptr<const SentimentOracle> oracle;
  std::shared_ptr<const Rewriter> rewriter;
};

int cmd_ingest(const std::string& dump, const std::string& out_path,
               const std::string& skipped_path, std::ostream& out) {
  auto in = open_input(dump);
  const auto corpus = parse_dump(in);
  if (!out_path.empty()) {
    auto f = open_output(out_path);
    serialize_dump(corpus, f);
  }
  std::set<std::string> with_comments;
  for (const auto& c : corpus.comments) with_comments.insert(c.post_id);
  std::vector<SkippedPost> skipped;
  for (const auto& p : corpus.posts) {
    if (!with_comments.contains(p.id)) skipped.push_back({p.id, "no_comments"});
  }
  if (!skipped_path.empty()) {
    auto f = open_output(skipped_path);
    write_skipped(skipped, f);
  }
  out << "posts=" << corpus.posts.size() << " comments=" << corpus.comments.size()
      << " skipped=" << skipped.size() << '\n';
  return kExitOk;
}

int cmd_score(const AppConfig& config, const SentimentOracle& oracle, const std::string& corpus_path,
              const std::string& out_path, const std::string& skipped_path,
              const std::string& matrix_dir, std::ostream& out) {
  auto in = open_input(corpus_path);
  const auto corpus = parse_dump(in);
  DatasetOptions options;
  options.thresholds = config.thresholds;
  options.weights = config.weights;
  options.parallelism = config.ingest_parallelism;
  const auto dataset = build_event_dataset(corpus, oracle, options);
  {
    auto f = open_output(out_path);
    write_dataset(dataset.pairs, f);
  }
  if (!skipped_path.empty()) {
    auto f = open_output(skipped_path);
    write_skipped(dataset.skipped, f);
  }
  if (!matrix_dir.empty() && !dataset.pairs.empty()) {
    for (auto axis : {GroupAxis::Actor, GroupAxis::Theme}) {
      auto f = open_output(std::filesystem::path(matrix_dir) /
                           (std::string(to_string(axis)) + "_matrix.csv"));
      f << export_matrix_grid(group_sentiment_matrix(dataset.pairs, axis));
    }
  }
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& p : dataset.pairs) ++counts[static_cast<int>(p.label)];
  out << "events=" << dataset.pairs.size() << " skipped=" << dataset.skipped.size()
      << " negative=" << counts[0] << " neutral=" << counts[1] << " positive=" << counts[2]
      << '\n';
  return kExitOk;
}

int cmd_batch(const AppConfig& config, const Clients& clients, BatchMode mode,
              const std::string& dataset_path, const std::string& log_path,
              const std::string& filter, const std::vector<const ModificationType*>& mods,
              std::ostream& out) {
  auto in = open_input(dataset_path);
  const auto pairs = read_dataset(in);
  BatchOptions options;
  options.mode = mode;
  options.filter = parse_class_csv(filter);
  options.targets = config.targets;
  options.order = config.category_order;
  options.modifications = mods;
  options.engine = make_engine_options(config);
  options.concurrency = config.concurrency;
  RunLog log(log_path);
  const auto s = run_batch(pairs, *clients.rewriter, *clients.oracle, options, log);
  out << "mode=" << to_string(mode) << " matched=" << s.matched
      << " already_logged=" << s.already_logged << " written=" << s.written
      << " success=" << s.successes << " failure=" << s.failures << " error=" << s.errors
      << '\n';
  return s.errors == 0 ? kExitOk : kExitItems;
}

int cmd_report(const std::string& breakdown_log, const std::string& ablation_log,
               ReportFormat format, const std::string& out_path, std::ostream& out) {
  ReportTables tables;
  if (!breakdown_log.empty()) {
    const auto runs = read_runs(breakdown_log);
    tables.breakdown = success_breakdown(runs);
    tables.cumulative = cumulative_success_by_step(runs);
    tables.failure_share = failure_share(runs);
  }
  if (!ablation_log.empty()) {
    tables.ablation = ablation_rates(read_ablation_results(ablation_log));
  }
  const auto text = export_report(tables, format);
  if (out_path.empty()) {
    out << text;
  } else {
    auto f = open_output(out_path);
    f << text;
  }
  return kExitOk;
}

int cmd_serve(const AppConfig& config, const Clients& clients, std::ostream& out,
              std::ostream& err) {
  ServiceOptions options;
  options.engine = make_engine_options(config);
  options.category_order = config.category_order;
  options.default_targets = config.targets;
  options.max_concurrent_chains = std::max<std::size_t>(1, config.concurrency);
  auto store = std::make_shared<RunStore>(config.store);
  Service service(options, clients.oracle, clients.rewriter, store);

  int port = config.port;
  if (port == 0) {
    port = service.bind_to_any_port(config.bind);
    if (port < 0) {
      err << "error: cannot bind " << config.bind << '\n';
      return kExitUsage;
    }
  } else if (!service.bind(config.bind, port)) {
    err << "error: cannot bind " << config.bind << ':' << port << '\n';
    return kExitUsage;
  }
  out << "listening on http://" << config.bind << ':' << port << " store=" << config.store.string()
      << " runs=" << store->size() << std::endl;

  g_stop_requested = false;
  auto prev_int = std::signal(SIGINT, on_stop_signal);
  auto prev_term = std::signal(SIGTERM, on_stop_signal);
  std::atomic<bool> done{false};
  std::thread watcher([&] {
    while (!done) {
      if (g_stop_requested) {
        service.stop();
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  });
  service.listen_after_bind();
  done = true;
  watcher.join();
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diplomatic event sentiment and counterfactual toolkit", "dipsent"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides o;
  app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
  app.add_flag("--mock", o.mock, "Use the lexicon oracle and mock rewriter");
  app.add_option("--tau", o.tau, "Neutral band half-width");
  app.add_option("--weights", o.weights, "Comment weight scheme: log|linear|uniform");
  app.add_option("--parallelism", o.parallelism, "Posts scored concurrently");
  app.add_option("--selection", o.selection, "Modification selection: first|random|exhaustive");
  app.add_option("--seed", o.seed, "Seed for random selection and the mock rewriter");
  app.add_option("--order", o.order, "Comma-separated category order");
  app.add_option("--targets", o.targets, "Comma-separated target classes");
  app.add_option("--concurrency", o.concurrency, "Chains executed concurrently");
  app.add_option("--fixed-timestamp", o.fixed_timestamp, "Constant provenance timestamp");
  app.add_option("--oracle-endpoint", o.oracle_endpoint, "Remote sentiment endpoint");
  app.add_option("--rewriter-endpoint", o.rewriter_endpoint, "Remote rewrite endpoint");
  app.add_flag("--precheck", o.precheck, "Skip texts already in a target class");

  auto* ingest = app.add_subcommand("ingest", "Validate and link a raw dump");
  std::string dump_path, linked_path, ingest_skipped;
  ingest->add_option("--dump", dump_path, "Raw JSONL dump")->required();
  ingest->add_option("--out", linked_path, "Linked corpus output");
  ingest->add_option("--skipped", ingest_skipped, "Posts without comments");

  auto* score = app.add_subcommand("score", "Score a corpus into an event dataset");
  std::string corpus_path, dataset_out, score_skipped, matrix_dir;
  score->add_option("--corpus", corpus_path, "Linked corpus")->required();
  score->add_option("--out", dataset_out, "Event dataset output")->required();
  score->add_option("--skipped", score_skipped, "Skipped posts output");
  score->add_option("--matrix-dir", matrix_dir, "Directory for group matrices");

  auto* run = app.add_subcommand("run", "Sequential counterfactual runs over a dataset");
  std::string run_dataset, run_log, run_filter = "Negative";
  bool run_dry = false;
  run->add_option("--dataset", run_dataset, "Event dataset")->required();
  run->add_option("--log", run_log, "Run log (appended)")->required();
  run->add_option("--filter", run_filter, "Dataset labels to process")->capture_default_str();
  run->add_flag("--dry-run", run_dry, "Mock clients and a fixed clock");

  auto* ablate = app.add_subcommand("ablate", "Single-modification ablation over a dataset");
  std::string abl_dataset, abl_log, abl_filter = "Negative", abl_mods;
  bool abl_dry = false;
  ablate->add_option("--dataset", abl_dataset, "Event dataset")->required();
  ablate->add_option("--log", abl_log, "Ablation log (appended)")->required();
  ablate->add_option("--filter", abl_filter, "Dataset labels to process")->capture_default_str();
  ablate->add_option("--modifications", abl_mods, "Comma-separated modification keys");
  ablate->add_flag("--dry-run", abl_dry, "Mock clients and a fixed clock");

  auto* report = app.add_subcommand("report", "Tables from run and ablation logs");
  std::string rep_breakdown, rep_ablation, rep_format = "plain", rep_out;
  report->add_option("--breakdown", rep_breakdown, "Sequential run log")
      ->check(CLI::ExistingFile);
  report->add_option("--ablation", rep_ablation, "Ablation log")->check(CLI::ExistingFile);
  report->add_option("--format", rep_format, "plain|delimited|structured")->capture_default_str();
  report->add_option("--out", rep_out, "Write to a file instead of stdout");

  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  std::optional<std::string> bind;
  std::optional<int> port;
  std::optional<std::string> store;
  serve->add_option("--bind", bind, "Bind address");
  serve->add_option("--port", port, "Port, 0 for any free port");
  serve->add_option("--store", store, "Run store directory");

  for (auto* sub : {ingest, score, run, ablate, report, serve}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  // Configuration phase: anything failing here is a usage error.
  AppConfig config;
  Clients clients;
  ReportFormat format = ReportFormat::Plain;
  std::vector<const ModificationType*> mods;
  try {
    config = config_path.empty() ? default_config() : load_config(config_path);
    apply_environment(config);
    apply(o, config);
    if (bind) config.bind = *bind;
    if (port) config.port = *port;
    if (store) config.store = *store;
    const bool dry = (run->parsed() && run_dry) || (ablate->parsed() && abl_dry);
    if (dry) {
      config.oracle_kind = OracleKind::Lexicon;
      config.rewriter_kind = RewriterKind::Mock;
      if (!config.fixed_timestamp) config.fixed_timestamp = kDryRunInstant;
    }
    if (report->parsed()) {
      format = parse_report_format(rep_format);
      if (rep_breakdown.empty() && rep_ablation.empty()) {
        throw Error(ErrorCode::Configuration, "report needs --breakdown and/or --ablation");
      }
    }
    if (ablate->parsed()) {
      for (const auto& key : split_csv(abl_mods)) mods.push_back(&find_modification(key));
    }
    if (run->parsed()) parse_class_csv(run_filter);
    if (ablate->parsed()) parse_class_csv(abl_filter);
    if (score->parsed() || run->parsed() || ablate->parsed() || serve->parsed()) {
      clients.oracle = make_oracle(config);
    }
    if (run->parsed() || ablate->parsed() || serve->parsed()) {
      clients.rewriter = make_rewriter(config);
    }
  } catch (const Error& e) {
    report_error(err, e);
    err << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(dump_path, linked_path, ingest_skipped, out);
    if (score->parsed()) {
      return cmd_score(config, *clients.oracle, corpus_path, dataset_out, score_skipped,
                       matrix_dir, out);
    }
    if (run->parsed()) {
      return cmd_batch(config, clients, BatchMode::Sequential, run_dataset, run_log, run_filter,
                       {}, out);
    }
    if (ablate->parsed()) {
      return cmd_batch(config, clients, BatchMode::Ablation, abl_dataset, abl_log, abl_filter,
                       mods, out);
    }
    if (report->parsed()) return cmd_report(rep_breakdown, rep_ablation, format, rep_out, out);
    if (serve->parsed()) return cmd_serve(config, clients, out, err);
  } catch (const Error& e) {
    report_error(err, e);
    return e.code() == ErrorCode::Configuration ? kExitUsage : kExitItems;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitItems;
  }
  return kExitUsage;
}

}  // namespace dipsent
