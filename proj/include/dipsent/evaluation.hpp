#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dipsent/corpus.hpp"
#include "dipsent/engine.hpp"
#include "dipsent/rewriter.hpp"

namespace dipsent {

/// Successful runs grouped by the category of the step that reached the
/// target. Percentages are in percent units and kept at full precision.
struct SuccessBreakdown {
  struct Row {
    CounterfactualCategory category;
    std::size_t count = 0;
    double pct_of_successes = 0.0;
    double pct_of_total = 0.0;
  };
  /// Descending by count, ties in sweep order. Every category appears.
  std::vector<Row> rows;
  std::size_t total_successes = 0;
  std::size_t total_articles = 0;
  double overall_success_rate = 0.0;

  const Row* find(CounterfactualCategory c) const;
};

/// Throws Validation for an empty log or when any run has status ERROR
/// (its id is listed) or succeeded without a recorded step.
SuccessBreakdown success_breakdown(std::span<const CounterfactualRun> runs);

struct CumulativeShare {
  int step = 0;
  double share = 0.0;
};

/// share(k) = successes needing at most k steps / all successes, for k from
/// 0 to the longest category order in the log.
std::vector<CumulativeShare> cumulative_success_by_step(std::span<const CounterfactualRun> runs);

/// FAILURE runs / all runs.
double failure_share(std::span<const CounterfactualRun> runs);

struct AblationRateTable {
  struct Row {
    CounterfactualCategory category;
    std::string key;
    std::string label;
    std::size_t total_cases = 0;
    std::size_t successful = 0;
    double success_rate = 0.0;
  };
  struct CategoryRow {
    CounterfactualCategory category;
    std::size_t total_cases = 0;
    std::size_t successful = 0;
    double success_rate = 0.0;
  };
  /// Registry order; only modifications present in the results.
  std::vector<Row> rows;
  std::vector<CategoryRow> categories;

  const Row* find(std::string_view key) const;
  const CategoryRow* find(CounterfactualCategory c) const;
};

/// Rates are fractions in [0,1]. Throws Validation for empty input or any
/// errored result.
AblationRateTable ablation_rates(std::span<const AblationResult> results);

enum class ReportFormat { Plain, Delimited, Structured };
std::string_view to_string(ReportFormat f) noexcept;
/// Accepts plain|delimited|structured; throws Validation otherwise.
ReportFormat parse_report_format(std::string_view name);

struct ReportTables {
  std::optional<SuccessBreakdown> breakdown;
  std::optional<std::vector<CumulativeShare>> cumulative;
  std::optional<double> failure_share;
  std::optional<AblationRateTable> ablation;
};

/// Percentages rounded to two decimals. Byte-identical for equal input.
std::string export_report(const ReportTables& tables, ReportFormat format);

/// CSV grid: header `group,<event types...>`, one row per group, empty
/// fields for absent cells.
std::string export_matrix_grid(const GroupSentimentMatrix& matrix);

}  // namespace dipsent
