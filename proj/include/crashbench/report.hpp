#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crashbench/metrics.hpp"

namespace crashbench {

/// One table cell source: a named value with its display format.
struct ColumnSpec {
  enum class Format { decimal3, percent1, seconds2, integer };
  enum class Best { none, max, min };

  std::string key;     // value key in TableRow::values
  std::string header;
  Format format = Format::decimal3;
  Best best = Best::none;
  /// Columns sharing a non-empty family compete against each other within a
  /// row (the per-group bolding of multi-model tables); columns without a
  /// family compete down their own column across rows.
  std::string family;
};

struct TableSpec {
  std::string id;  // kaggle | longtail | pga | latency | ssl_ablation
  std::vector<ColumnSpec> columns;
  std::string label_header = "";

  /// Built-in single-report specs by table id.
  static TableSpec builtin(const std::string& id);
  /// Long-tail layout for several models side by side, with per-group
  /// best-in-family marking for AUC/F1/EWR.
  static TableSpec longtail_comparison(
      const std::vector<std::string>& model_names);
};

struct TableRow {
  std::string label;
  std::map<std::string, std::optional<double>> values;
};

struct RenderedTable {
  std::string text;
  std::string csv;
};

/// Deterministic column-aligned text plus a CSV carrying identical values at
/// the same precision. Best-per-spec cells are wrapped in '*' when at least
/// two candidates compete. Missing referenced metrics raise ValidationError
/// naming the table and column.
RenderedTable render_table(const std::vector<TableRow>& rows,
                           const TableSpec& spec);

/// Row adapters from metric reports.
TableRow kaggle_row(const std::string& model_name, const MetricsReport& report);
std::vector<TableRow> longtail_rows(const MetricsReport& report);
std::vector<TableRow> longtail_comparison_rows(
    const std::vector<std::pair<std::string, MetricsReport>>& reports);

/// Per-group metric deltas between two reports over the same manifest.
/// Higher-is-better regressions are marked with '!'.
RenderedTable compare_models(const std::string& base_name,
                             const MetricsReport& base,
                             const std::string& other_name,
                             const MetricsReport& other);

/// Generic row input for pga/latency/ssl_ablation tables:
/// {"rows":[{"label":..., "values":{key: number|null}}]}
std::vector<TableRow> load_rows_json(const std::filesystem::path& path);

}  // namespace crashbench
