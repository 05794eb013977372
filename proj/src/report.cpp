#include "crashbench/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "jsonl.hpp"

namespace crashbench {

using jsonl::json;

namespace {

std::string format_value(const std::optional<double>& v,
                         ColumnSpec::Format format) {
  if (!v.has_value()) return "-";
  char buf[40];
  switch (format) {
    case ColumnSpec::Format::decimal3:
      std::snprintf(buf, sizeof(buf), "%.3f", *v);
      break;
    case ColumnSpec::Format::percent1:
      std::snprintf(buf, sizeof(buf), "%.1f%%", *v * 100.0);
      break;
    case ColumnSpec::Format::seconds2:
      std::snprintf(buf, sizeof(buf), "%.2f", *v);
      break;
    case ColumnSpec::Format::integer:
      std::snprintf(buf, sizeof(buf), "%lld",
                    static_cast<long long>(std::llround(*v)));
      break;
  }
  return buf;
}

}  // namespace

TableSpec TableSpec::builtin(const std::string& id) {
  using F = ColumnSpec::Format;
  using B = ColumnSpec::Best;
  TableSpec spec;
  spec.id = id;
  if (id == "kaggle") {
    spec.label_header = "Model";
    spec.columns = {{"ap_05", "AP@0.5s", F::decimal3, B::max, ""},
                    {"ap_10", "AP@1.0s", F::decimal3, B::max, ""},
                    {"ap_15", "AP@1.5s", F::decimal3, B::max, ""},
                    {"map", "mAP", F::decimal3, B::max, ""},
                    {"fpr", "FPR", F::percent1, B::min, ""}};
  } else if (id == "longtail") {
    spec.label_header = "Group";
    spec.columns = {{"auc", "AUC", F::decimal3, B::none, ""},
                    {"f1", "F1", F::decimal3, B::none, ""},
                    {"ewr", "EWR", F::percent1, B::none, ""},
                    {"tta", "TTA", F::seconds2, B::none, ""}};
  } else if (id == "pga") {
    spec.label_header = "Model";
    spec.columns = {{"pga", "PGA", F::percent1, B::max, ""},
                    {"delta_rand", "dRand", F::percent1, B::max, ""}};
  } else if (id == "latency") {
    spec.label_header = "Model";
    spec.columns = {{"prep_mean_ms", "Prep-mean", F::seconds2, B::none, ""},
                    {"prep_p50_ms", "Prep-p50", F::seconds2, B::none, ""},
                    {"prep_p99_ms", "Prep-p99", F::seconds2, B::none, ""},
                    {"infer_mean_ms", "Infer-mean", F::seconds2, B::none, ""},
                    {"infer_p50_ms", "Infer-p50", F::seconds2, B::none, ""},
                    {"infer_p99_ms", "Infer-p99", F::seconds2, B::none, ""},
                    {"total_ms", "Total", F::seconds2, B::min, ""}};
  } else if (id == "ssl_ablation") {
    spec.label_header = "Model";
    spec.columns = {{"ssl", "SSL", F::integer, B::none, ""},
                    {"kd", "KD", F::integer, B::none, ""},
                    {"ap", "AP", F::decimal3, B::max, ""},
                    {"f1", "F1", F::decimal3, B::max, ""},
                    {"fpr", "FPR", F::percent1, B::min, ""}};
  } else {
    throw ValidationError("unknown table id '" + id + "'");
  }
  return spec;
}

TableSpec TableSpec::longtail_comparison(
    const std::vector<std::string>& model_names) {
  using F = ColumnSpec::Format;
  using B = ColumnSpec::Best;
  TableSpec spec;
  spec.id = "longtail";
  spec.label_header = "Group";
  for (const auto& model : model_names) {
    spec.columns.push_back(
        {model + ".auc", model + " AUC", F::decimal3, B::max, "auc"});
    spec.columns.push_back(
        {model + ".f1", model + " F1", F::decimal3, B::max, "f1"});
    spec.columns.push_back(
        {model + ".ewr", model + " EWR", F::percent1, B::max, "ewr"});
    spec.columns.push_back(
        {model + ".tta", model + " TTA", F::seconds2, B::none, "tta-"});
  }
  return spec;
}

RenderedTable render_table(const std::vector<TableRow>& rows,
                           const TableSpec& spec) {
  if (rows.empty()) throw ValidationError("render_table: no rows");
  for (const auto& row : rows) {
    for (const auto& col : spec.columns) {
      if (!row.values.count(col.key)) {
        throw ValidationError("table '" + spec.id + "', column '" + col.key +
                              "': metric missing in row '" + row.label + "'");
      }
    }
  }

  const size_t n_rows = rows.size();
  const size_t n_cols = spec.columns.size();

  // bold[r][c]: cell marked as best per the spec rules. Column-wise marking
  // needs at least two rows, family-wise at least two columns in the family.
  std::vector<std::vector<bool>> bold(n_rows, std::vector<bool>(n_cols, false));
  for (size_t c = 0; c < n_cols; ++c) {
    const auto& col = spec.columns[c];
    if (col.best == ColumnSpec::Best::none || !col.family.empty()) continue;
    if (n_rows < 2) continue;
    std::optional<double> best;
    for (const auto& row : rows) {
      const auto& v = row.values.at(col.key);
      if (!v.has_value()) continue;
      if (!best || (col.best == ColumnSpec::Best::max ? *v > *best
                                                      : *v < *best)) {
        best = *v;
      }
    }
    if (!best) continue;
    for (size_t r = 0; r < n_rows; ++r) {
      const auto& v = rows[r].values.at(col.key);
      bold[r][c] = v.has_value() && *v == *best;
    }
  }
  // Family-wise: best across same-family columns within each row.
  for (size_t r = 0; r < n_rows; ++r) {
    std::map<std::string, std::vector<size_t>> families;
    for (size_t c = 0; c < n_cols; ++c) {
      const auto& col = spec.columns[c];
      if (col.best != ColumnSpec::Best::none && !col.family.empty()) {
        families[col.family].push_back(c);
      }
    }
    for (const auto& [family, cols] : families) {
      if (cols.size() < 2) continue;
      std::optional<double> best;
      for (size_t c : cols) {
        const auto& v = rows[r].values.at(spec.columns[c].key);
        if (!v.has_value()) continue;
        const bool better =
            spec.columns[c].best == ColumnSpec::Best::max ? (!best || *v > *best)
                                                          : (!best || *v < *best);
        if (better) best = *v;
      }
      if (!best) continue;
      for (size_t c : cols) {
        const auto& v = rows[r].values.at(spec.columns[c].key);
        bold[r][c] = v.has_value() && *v == *best;
      }
    }
  }

  // Format all cells.
  std::vector<std::vector<std::string>> cells(n_rows);
  std::vector<std::vector<std::string>> csv_cells(n_rows);
  for (size_t r = 0; r < n_rows; ++r) {
    for (size_t c = 0; c < n_cols; ++c) {
      const std::string value =
          format_value(rows[r].values.at(spec.columns[c].key),
                       spec.columns[c].format);
      csv_cells[r].push_back(value);
      cells[r].push_back(bold[r][c] ? "*" + value + "*" : value);
    }
  }

  std::vector<size_t> widths(n_cols + 1, 0);
  widths[0] = spec.label_header.size();
  for (const auto& row : rows) widths[0] = std::max(widths[0], row.label.size());
  for (size_t c = 0; c < n_cols; ++c) {
    widths[c + 1] = spec.columns[c].header.size();
    for (size_t r = 0; r < n_rows; ++r) {
      widths[c + 1] = std::max(widths[c + 1], cells[r][c].size());
    }
  }

  std::ostringstream text;
  auto pad = [&](const std::string& s, size_t w) {
    text << s << std::string(w - s.size(), ' ');
  };
  pad(spec.label_header, widths[0]);
  for (size_t c = 0; c < n_cols; ++c) {
    text << "  ";
    pad(spec.columns[c].header, widths[c + 1]);
  }
  text << "\n";
  size_t total = widths[0];
  for (size_t c = 0; c < n_cols; ++c) total += 2 + widths[c + 1];
  text << std::string(total, '-') << "\n";
  for (size_t r = 0; r < n_rows; ++r) {
    pad(rows[r].label, widths[0]);
    for (size_t c = 0; c < n_cols; ++c) {
      text << "  ";
      pad(cells[r][c], widths[c + 1]);
    }
    text << "\n";
  }

  std::ostringstream csv;
  csv << (spec.label_header.empty() ? "label" : spec.label_header);
  for (const auto& col : spec.columns) csv << "," << col.header;
  csv << "\n";
  for (size_t r = 0; r < n_rows; ++r) {
    csv << rows[r].label;
    for (size_t c = 0; c < n_cols; ++c) csv << "," << csv_cells[r][c];
    csv << "\n";
  }

  return {text.str(), csv.str()};
}

TableRow kaggle_row(const std::string& model_name,
                    const MetricsReport& report) {
  TableRow row;
  row.label = model_name;
  row.values["ap_05"] = report.kaggle.ap_at[0];
  row.values["ap_10"] = report.kaggle.ap_at[1];
  row.values["ap_15"] = report.kaggle.ap_at[2];
  row.values["map"] = report.kaggle.map;
  row.values["fpr"] = report.kaggle.fpr;
  return row;
}

namespace {

void fill_longtail_values(TableRow* row, const std::string& prefix,
                          const GroupMetrics& m) {
  row->values[prefix + "auc"] = m.auc;
  row->values[prefix + "f1"] = m.f1;
  row->values[prefix + "ewr"] = m.ewr;
  row->values[prefix + "tta"] = m.mtta_s;
}

std::string group_label(Group g) {
  std::string name = to_string(g);
  name[0] = static_cast<char>(std::toupper(name[0]));
  return name;
}

}  // namespace

std::vector<TableRow> longtail_rows(const MetricsReport& report) {
  std::vector<TableRow> rows;
  for (const auto& [group, metrics] : report.groups) {
    TableRow row;
    row.label = group_label(group);
    fill_longtail_values(&row, "", metrics);
    rows.push_back(std::move(row));
  }
  TableRow overall;
  overall.label = "Overall";
  fill_longtail_values(&overall, "", report.overall);
  rows.push_back(std::move(overall));
  return rows;
}

std::vector<TableRow> longtail_comparison_rows(
    const std::vector<std::pair<std::string, MetricsReport>>& reports) {
  if (reports.empty()) throw ValidationError("no reports to compare");
  std::vector<TableRow> rows;
  const auto& first = reports.front().second;
  for (size_t g = 0; g <= first.groups.size(); ++g) {
    const bool overall = g == first.groups.size();
    TableRow row;
    row.label = overall ? "Overall" : group_label(first.groups[g].first);
    for (const auto& [model, report] : reports) {
      if (!overall && (report.groups.size() != first.groups.size() ||
                       report.groups[g].first != first.groups[g].first)) {
        throw ValidationError("reports cover different group sets");
      }
      fill_longtail_values(&row, model + ".",
                           overall ? report.overall : report.groups[g].second);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

RenderedTable compare_models(const std::string& base_name,
                             const MetricsReport& base,
                             const std::string& other_name,
                             const MetricsReport& other) {
  if (base.manifest_name != other.manifest_name ||
      base.clip_counts != other.clip_counts) {
    throw ValidationError("cannot compare reports over different manifests (" +
                          base.manifest_name + " vs " + other.manifest_name +
                          ")");
  }
  if (base.groups.size() != other.groups.size()) {
    throw ValidationError("cannot compare reports with different group sets");
  }

  struct MetricFmt {
    const char* key;
    const char* header;
    ColumnSpec::Format format;
    bool higher_better;
  };
  const std::vector<MetricFmt> metrics = {
      {"auc", "AUC", ColumnSpec::Format::decimal3, true},
      {"f1", "F1", ColumnSpec::Format::decimal3, true},
      {"ewr", "EWR", ColumnSpec::Format::percent1, true},
      {"tta", "TTA", ColumnSpec::Format::seconds2, false /* neutral */}};

  auto get = [](const GroupMetrics& m, const std::string& key) {
    if (key == "auc") return m.auc;
    if (key == "f1") return m.f1;
    if (key == "ewr") return m.ewr;
    return m.mtta_s;
  };

  auto delta_cell = [&](const std::optional<double>& a,
                        const std::optional<double>& b, const MetricFmt& fmt) {
    if (!a.has_value() || !b.has_value()) return std::string("-");
    const double delta = *b - *a;
    char buf[32];
    if (fmt.format == ColumnSpec::Format::percent1) {
      std::snprintf(buf, sizeof(buf), "%+.1f", delta * 100.0);
    } else if (fmt.format == ColumnSpec::Format::seconds2) {
      std::snprintf(buf, sizeof(buf), "%+.2f", delta);
    } else {
      std::snprintf(buf, sizeof(buf), "%+.3f", delta);
    }
    std::string cell = format_value(a, fmt.format) + " -> " +
                       format_value(b, fmt.format) + " (" + buf + ")";
    if (fmt.higher_better && delta < 0.0) cell += "!";
    return cell;
  };

  std::ostringstream text, csv;
  text << "Comparison: " << base_name << " -> " << other_name << " on "
       << base.manifest_name << "\n";
  csv << "group";
  for (const auto& m : metrics) csv << "," << m.header;
  csv << "\n";

  std::vector<std::pair<std::string, std::pair<const GroupMetrics*,
                                               const GroupMetrics*>>> rows;
  for (size_t g = 0; g < base.groups.size(); ++g) {
    if (base.groups[g].first != other.groups[g].first) {
      throw ValidationError("cannot compare reports with different group sets");
    }
    rows.emplace_back(group_label(base.groups[g].first),
                      std::make_pair(&base.groups[g].second,
                                     &other.groups[g].second));
  }
  rows.emplace_back("Overall", std::make_pair(&base.overall, &other.overall));

  size_t label_w = 7;
  for (const auto& r : rows) label_w = std::max(label_w, r.first.size());
  std::vector<std::vector<std::string>> cells;
  std::vector<size_t> widths(metrics.size());
  for (size_t i = 0; i < metrics.size(); ++i) {
    widths[i] = std::string(metrics[i].header).size();
  }
  for (const auto& r : rows) {
    std::vector<std::string> line;
    for (size_t i = 0; i < metrics.size(); ++i) {
      line.push_back(delta_cell(get(*r.second.first, metrics[i].key),
                                get(*r.second.second, metrics[i].key),
                                metrics[i]));
      widths[i] = std::max(widths[i], line.back().size());
    }
    cells.push_back(std::move(line));
  }

  text << std::string(label_w, ' ');
  for (size_t i = 0; i < metrics.size(); ++i) {
    text << "  " << metrics[i].header
         << std::string(widths[i] - std::string(metrics[i].header).size(), ' ');
  }
  text << "\n";
  for (size_t r = 0; r < rows.size(); ++r) {
    text << rows[r].first << std::string(label_w - rows[r].first.size(), ' ');
    csv << rows[r].first;
    for (size_t i = 0; i < metrics.size(); ++i) {
      text << "  " << cells[r][i]
           << std::string(widths[i] - cells[r][i].size(), ' ');
      csv << ",\"" << cells[r][i] << "\"";
    }
    text << "\n";
    csv << "\n";
  }
  return {text.str(), csv.str()};
}

std::vector<TableRow> load_rows_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) throw ValidationError("cannot open " + path.string());
  json obj = json::parse(in, nullptr, false);
  if (obj.is_discarded()) {
    throw ValidationError(path.string() + ": JSON parse error");
  }
  std::vector<TableRow> rows;
  for (const auto& r : obj.at("rows")) {
    TableRow row;
    row.label = r.at("label").get<std::string>();
    for (const auto& [key, value] : r.at("values").items()) {
      if (value.is_null()) {
        row.values[key] = std::nullopt;
      } else {
        row.values[key] = value.get<double>();
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace crashbench
