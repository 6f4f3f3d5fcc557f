#include "dipsent/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "dipsent/error.hpp"
#include "dipsent/records.hpp"

namespace dipsent {

namespace {

void validate_runs(std::span<const CounterfactualRun> runs) {
  if (runs.empty()) throw Error(ErrorCode::Validation, "run log is empty");
  std::vector<std::string> errored;
  std::vector<std::string> stepless;
  for (const auto& r : runs) {
    if (r.status == RunStatus::Error) errored.push_back(r.run_id);
    else if (r.status == RunStatus::Success && r.records.empty()) stepless.push_back(r.run_id);
  }
  if (!errored.empty()) {
    throw Error(ErrorCode::Validation,
                std::to_string(errored.size()) + " run(s) have status ERROR", errored);
  }
  if (!stepless.empty()) {
    throw Error(ErrorCode::Validation,
                std::to_string(stepless.size()) +
                    " SUCCESS run(s) have no recorded step (pre-checked runs)",
                stepless);
  }
}

double percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

double fraction(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole);
}

std::string pct2(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", pct);
  return buf;
}

double rounded2(double pct) { return std::stod(pct2(pct)); }

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

using Table = std::vector<std::vector<std::string>>;

void render_delimited(const Table& table, std::ostream& out) {
  for (const auto& row : table) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << csv_field(row[i]);
    }
    out << '\n';
  }
}

/// First `text_cols` columns left-aligned, the rest right-aligned.
void render_plain(const std::string& title, const Table& table, std::size_t text_cols,
                  std::ostream& out) {
  out << title << '\n';
  std::vector<std::size_t> width;
  for (const auto& row : table) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  for (const auto& row : table) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += "  ";
      const std::string pad(width[i] - row[i].size(), ' ');
      line += i < text_cols ? row[i] + pad : pad + row[i];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
}

struct Section {
  std::string title;
  Table table;
  std::size_t text_cols;
};

std::vector<Section> tabulate(const ReportTables& t, bool plain) {
  const std::string pc = plain ? "%" : "";
  std::vector<Section> sections;
  if (t.breakdown) {
    const auto& b = *t.breakdown;
    Section s{"Success breakdown by category", {}, 1};
    if (plain) s.table.push_back({"Category", "Count", "% of Successes", "% of Total"});
    else s.table.push_back({"category", "count", "pct_of_successes", "pct_of_total"});
    for (const auto& row : b.rows) {
      s.table.push_back({std::string(to_string(row.category)), std::to_string(row.count),
                         pct2(row.pct_of_successes) + pc, pct2(row.pct_of_total) + pc});
    }
    if (!b.rows.empty()) {
      s.table.push_back({plain ? "Total Successes" : "Total", std::to_string(b.total_successes),
                         pct2(b.total_successes ? 100.0 : 0.0) + pc,
                         pct2(100.0 * b.overall_success_rate) + pc});
      if (plain) {
        s.table.push_back({"Articles analysed", std::to_string(b.total_articles), "", ""});
      }
    }
    sections.push_back(std::move(s));
  }
  if (t.cumulative) {
    Section s{"Cumulative share of successes by step", {}, 0};
    if (plain) s.table.push_back({"Step", "Cumulative Share"});
    else s.table.push_back({"step", "cumulative_share_pct"});
    for (const auto& c : *t.cumulative) {
      s.table.push_back({std::to_string(c.step), pct2(100.0 * c.share) + pc});
    }
    sections.push_back(std::move(s));
  }
  if (t.failure_share) {
    Section s{"Unchanged articles", {}, 1};
    if (plain) s.table.push_back({"Metric", "Value"});
    else s.table.push_back({"metric", "value_pct"});
    s.table.push_back({"failure_share", pct2(100.0 * *t.failure_share) + pc});
    sections.push_back(std::move(s));
  }
  if (t.ablation) {
    const auto& a = *t.ablation;
    Section cat{"Success rate by category", {}, 1};
    if (plain) cat.table.push_back({"Category", "Total Cases", "Successful", "Success Rate"});
    else cat.table.push_back({"category", "total_cases", "successful", "success_rate_pct"});
    for (const auto& c : a.categories) {
      cat.table.push_back({std::string(to_string(c.category)), std::to_string(c.total_cases),
                           std::to_string(c.successful), pct2(100.0 * c.success_rate) + pc});
    }
    Section mod{"Success rate by modification type", {}, 2};
    if (plain) mod.table.push_back({"Category", "Modification Type", "Total", "Successful",
                                    "Success Rate"});
    else mod.table.push_back({"category", "modification", "total_cases", "successful",
                              "success_rate_pct"});
    for (const auto& r : a.rows) {
      mod.table.push_back({std::string(to_string(r.category)), r.label,
                           std::to_string(r.total_cases), std::to_string(r.successful),
                           pct2(100.0 * r.success_rate) + pc});
    }
    sections.push_back(std::move(cat));
    sections.push_back(std::move(mod));
  }
  return sections;
}

json structured(const ReportTables& t) {
  json j = json::object();
  if (t.breakdown) {
    const auto& b = *t.breakdown;
    json rows = json::array();
    for (const auto& r : b.rows) {
      rows.push_back({{"category", r.category},
                      {"count", r.count},
                      {"pct_of_successes", rounded2(r.pct_of_successes)},
                      {"pct_of_total", rounded2(r.pct_of_total)}});
    }
    j["success_breakdown"] = {{"rows", rows},
                              {"total_successes", b.total_successes},
                              {"total_articles", b.total_articles},
                              {"overall_success_rate_pct",
                               rounded2(100.0 * b.overall_success_rate)}};
  }
  if (t.cumulative) {
    json rows = json::array();
    for (const auto& c : *t.cumulative) {
      rows.push_back({{"step", c.step}, {"cumulative_share_pct", rounded2(100.0 * c.share)}});
    }
    j["cumulative_success_by_step"] = rows;
  }
  if (t.failure_share) j["failure_share_pct"] = rounded2(100.0 * *t.failure_share);
  if (t.ablation) {
    json cats = json::array();
    for (const auto& c : t.ablation->categories) {
      cats.push_back({{"category", c.category},
                      {"total_cases", c.total_cases},
                      {"successful", c.successful},
                      {"success_rate_pct", rounded2(100.0 * c.success_rate)}});
    }
    json rows = json::array();
    for (const auto& r : t.ablation->rows) {
      rows.push_back({{"category", r.category},
                      {"modification", r.key},
                      {"label", r.label},
                      {"total_cases", r.total_cases},
                      {"successful", r.successful},
                      {"success_rate_pct", rounded2(100.0 * r.success_rate)}});
    }
    j["ablation"] = {{"categories", cats}, {"modifications", rows}};
  }
  return j;
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

const SuccessBreakdown::Row* SuccessBreakdown::find(CounterfactualCategory c) const {
  for (const auto& r : rows) {
    if (r.category == c) return &r;
  }
  return nullptr;
}

SuccessBreakdown success_breakdown(std::span<const CounterfactualRun> runs) {
  validate_runs(runs);
  std::array<std::size_t, std::size(kAllCategories)> counts{};
  SuccessBreakdown b;
  b.total_articles = runs.size();
  for (const auto& r : runs) {
    if (r.status != RunStatus::Success) continue;
    ++counts[static_cast<std::size_t>(r.records.back().category)];
    ++b.total_successes;
  }
  for (auto c : kAllCategories) {
    const auto n = counts[static_cast<std::size_t>(c)];
    b.rows.push_back({c, n, percent(n, b.total_successes), percent(n, b.total_articles)});
  }
  std::stable_sort(b.rows.begin(), b.rows.end(),
                   [](const auto& x, const auto& y) { return x.count > y.count; });
  b.overall_success_rate = fraction(b.total_successes, b.total_articles);
  return b;
}

std::vector<CumulativeShare> cumulative_success_by_step(std::span<const CounterfactualRun> runs) {
  validate_runs(runs);
  std::size_t max_steps = 0;
  for (const auto& r : runs) max_steps = std::max(max_steps, r.category_order.size());
  std::vector<std::size_t> at_step(max_steps + 1, 0);
  std::size_t successes = 0;
  for (const auto& r : runs) {
    if (r.status != RunStatus::Success) continue;
    ++at_step[std::min(r.records.size(), max_steps)];
    ++successes;
  }
  std::vector<CumulativeShare> out;
  std::size_t running = 0;
  for (std::size_t k = 0; k <= max_steps; ++k) {
    running += at_step[k];
    out.push_back({static_cast<int>(k), fraction(running, successes)});
  }
  return out;
}

double failure_share(std::span<const CounterfactualRun> runs) {
  validate_runs(runs);
  const auto failures = std::count_if(runs.begin(), runs.end(), [](const auto& r) {
    return r.status == RunStatus::Failure;
  });
  return fraction(static_cast<std::size_t>(failures), runs.size());
}

const AblationRateTable::Row* AblationRateTable::find(std::string_view key) const {
  for (const auto& r : rows) {
    if (r.key == key) return &r;
  }
  return nullptr;
}

const AblationRateTable::CategoryRow* AblationRateTable::find(CounterfactualCategory c) const {
  for (const auto& r : categories) {
    if (r.category == c) return &r;
  }
  return nullptr;
}

AblationRateTable ablation_rates(std::span<const AblationResult> results) {
  if (results.empty()) throw Error(ErrorCode::Validation, "no ablation results");
  std::vector<std::string> errored;
  for (const auto& r : results) {
    if (r.error) errored.push_back(r.event_id.value_or("?") + "/" + r.modification);
  }
  if (!errored.empty()) {
    throw Error(ErrorCode::Validation,
                std::to_string(errored.size()) + " ablation result(s) carry errors", errored);
  }

  const auto registry = modification_registry();
  std::vector<std::size_t> total(registry.size(), 0), hits(registry.size(), 0);
  for (const auto& r : results) {
    const auto& m = find_modification(r.modification);
    const auto idx = static_cast<std::size_t>(&m - registry.data());
    ++total[idx];
    if (r.success()) ++hits[idx];
  }

  AblationRateTable t;
  for (auto c : kAllCategories) {
    AblationRateTable::CategoryRow cat{c};
    for (std::size_t i = 0; i < registry.size(); ++i) {
      if (registry[i].category != c || total[i] == 0) continue;
      t.rows.push_back({c, std::string(registry[i].key), std::string(registry[i].label),
                        total[i], hits[i], fraction(hits[i], total[i])});
      cat.total_cases += total[i];
      cat.successful += hits[i];
    }
    if (cat.total_cases == 0) continue;
    cat.success_rate = fraction(cat.successful, cat.total_cases);
    t.categories.push_back(cat);
  }
  return t;
}

std::string_view to_string(ReportFormat f) noexcept {
  switch (f) {
    case ReportFormat::Plain: return "plain";
    case ReportFormat::Delimited: return "delimited";
    case ReportFormat::Structured: return "structured";
  }
  return "plain";
}

ReportFormat parse_report_format(std::string_view name) {
  for (auto f : {ReportFormat::Plain, ReportFormat::Delimited, ReportFormat::Structured}) {
    if (to_string(f) == name) return f;
  }
  throw Error(ErrorCode::Validation, "unknown report format '" + std::string(name) + "'");
}

std::string export_report(const ReportTables& tables, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::Structured:
      out << structured(tables).dump(2) << '\n';
      break;
    case ReportFormat::Delimited: {
      bool first = true;
      for (const auto& s : tabulate(tables, false)) {
        if (!first) out << '\n';
        first = false;
        render_delimited(s.table, out);
      }
      break;
    }
    case ReportFormat::Plain: {
      bool first = true;
      for (const auto& s : tabulate(tables, true)) {
        if (!first) out << '\n';
        first = false;
        render_plain(s.title, s.table, s.text_cols, out);
      }
      break;
    }
  }
  return out.str();
}

std::string export_matrix_grid(const GroupSentimentMatrix& matrix) {
  std::ostringstream out;
  out << to_string(matrix.axis);
  for (auto c : matrix.cols) out << ',' << to_string(c);
  out << '\n';
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    out << csv_field(matrix.rows[r]);
    for (std::size_t c = 0; c < matrix.cols.size(); ++c) {
      out << ',';
      if (matrix.cells[r][c]) out << shortest(*matrix.cells[r][c]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dipsent
