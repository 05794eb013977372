#include "crashbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "jsonl.hpp"

namespace crashbench {

using jsonl::json;

std::optional<double> ClipOutcome::first_alert_at(double threshold) const {
  for (const auto& e : entries) {
    if (e.score >= threshold) return e.t;
  }
  return std::nullopt;
}

ClipOutcome compute_outcome(const ClipRecord& clip, const ScoreTrace& trace,
                            double threshold,
                            std::span<const double> lead_times) {
  ClipOutcome out;
  out.clip_id = clip.clip_id;
  out.label = clip.label;
  out.group = clip.group;
  out.event_time_s = clip.event_time_s;
  out.build_threshold = threshold;
  out.entries = trace.entries;
  out.peak_score = trace.peak_score();
  out.first_alert_time_s = out.first_alert_at(threshold);

  for (double tau : lead_times) {
    if (!clip.positive()) {
      out.eligible_peaks[tau] = out.peak_score;
      continue;
    }
    const double cutoff = *clip.event_time_s - tau;
    double peak = 0.0;
    for (const auto& e : trace.entries) {
      if (e.t <= cutoff) peak = std::max(peak, e.score);
    }
    out.eligible_peaks[tau] = peak;
  }
  return out;
}

double average_precision(std::span<const std::pair<double, bool>> scored) {
  std::int64_t total_pos = 0;
  for (const auto& [score, is_pos] : scored) total_pos += is_pos ? 1 : 0;
  if (total_pos == 0) {
    throw ValidationError("AP undefined: no positive examples");
  }

  std::vector<std::pair<double, bool>> sorted(scored.begin(), scored.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  double ap = 0.0;
  std::int64_t seen = 0, seen_pos = 0;
  size_t i = 0;
  while (i < sorted.size()) {
    size_t j = i;
    std::int64_t group_pos = 0;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      group_pos += sorted[j].second ? 1 : 0;
      ++j;
    }
    seen += static_cast<std::int64_t>(j - i);
    seen_pos += group_pos;
    if (group_pos > 0) {
      const double precision =
          static_cast<double>(seen_pos) / static_cast<double>(seen);
      ap += precision * static_cast<double>(group_pos);
    }
    i = j;
  }
  return ap / static_cast<double>(total_pos);
}

double roc_auc(std::span<const std::pair<double, bool>> scored) {
  std::int64_t pos = 0, neg = 0;
  for (const auto& [score, is_pos] : scored) (is_pos ? pos : neg) += 1;
  if (pos == 0 || neg == 0) {
    throw ValidationError("AUC undefined: needs both classes");
  }

  std::vector<std::pair<double, bool>> sorted(scored.begin(), scored.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Midrank sum over positives; ranks are 1-based.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < sorted.size()) {
    size_t j = i;
    std::int64_t tied_pos = 0;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      tied_pos += sorted[j].second ? 1 : 0;
      ++j;
    }
    const double midrank = 0.5 * (static_cast<double>(i + 1) +
                                  static_cast<double>(j));
    rank_sum_pos += midrank * static_cast<double>(tied_pos);
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double wins = rank_sum_pos - p * (p + 1.0) / 2.0;
  return wins / (p * static_cast<double>(neg));
}

F1Fpr f1_fpr_at_threshold(std::span<const ClipOutcome> outcomes,
                          double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0) {
    throw ValidationError("threshold must be in (0,1)");
  }
  F1Fpr r;
  for (const auto& o : outcomes) {
    const bool predicted = o.peak_score >= threshold;
    if (o.label == Label::positive) {
      (predicted ? r.tp : r.fn) += 1;
    } else {
      (predicted ? r.fp : r.tn) += 1;
    }
  }
  if (r.tp + r.fn > 0) {
    const double precision =
        r.tp + r.fp > 0
            ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp)
            : 0.0;
    const double recall =
        static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    r.f1 = precision + recall > 0.0
               ? 2.0 * precision * recall / (precision + recall)
               : 0.0;
  }
  if (r.fp + r.tn > 0) {
    r.fpr = static_cast<double>(r.fp) / static_cast<double>(r.fp + r.tn);
  }
  return r;
}

double ap_at_tta(std::span<const ClipOutcome> outcomes, double tau) {
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    if (o.label == Label::positive) {
      if (!o.event_time_s.has_value()) {
        throw ValidationError("clip " + o.clip_id +
                              ": positive without event time in ap_at_tta");
      }
      const auto it = o.eligible_peaks.find(tau);
      const double candidate =
          it != o.eligible_peaks.end()
              ? it->second
              : [&] {
                  double peak = 0.0;
                  const double cutoff = *o.event_time_s - tau;
                  for (const auto& e : o.entries) {
                    if (e.t <= cutoff) peak = std::max(peak, e.score);
                  }
                  return peak;
                }();
      scored.emplace_back(candidate, true);
    } else {
      scored.emplace_back(o.peak_score, false);
    }
  }
  return average_precision(scored);
}

EwrMtta ewr_mtta(std::span<const ClipOutcome> outcomes, double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0) {
    throw ValidationError("threshold must be in (0,1)");
  }
  EwrMtta r;
  double lead_sum = 0.0;
  for (const auto& o : outcomes) {
    if (o.label != Label::positive) continue;
    ++r.positives;
    if (!o.event_time_s.has_value()) continue;
    const auto alert = o.first_alert_at(threshold);
    // Strict: an alert at or after the event is not an early warning.
    if (alert.has_value() && *alert < *o.event_time_s) {
      ++r.detected;
      lead_sum += *o.event_time_s - *alert;
    }
  }
  if (r.positives > 0) {
    r.ewr = static_cast<double>(r.detected) / static_cast<double>(r.positives);
  }
  if (r.detected > 0) {
    r.mtta_s = lead_sum / static_cast<double>(r.detected);
  }
  return r;
}

namespace {

GroupMetrics metrics_for(std::span<const ClipOutcome> outcomes,
                         double threshold) {
  GroupMetrics m;
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    const bool is_pos = o.label == Label::positive;
    scored.emplace_back(o.peak_score, is_pos);
    (is_pos ? m.positives : m.negatives) += 1;
  }
  if (m.positives > 0 && m.negatives > 0) m.auc = roc_auc(scored);
  const F1Fpr f = f1_fpr_at_threshold(outcomes, threshold);
  m.f1 = f.f1;
  m.fpr = f.fpr;
  if (m.positives > 0) m.ap = average_precision(scored);
  const EwrMtta e = ewr_mtta(outcomes, threshold);
  m.ewr = e.ewr;
  m.mtta_s = e.mtta_s;
  m.detected = e.detected;
  return m;
}

KaggleBlock kaggle_from_outcomes(std::span<const ClipOutcome> outcomes,
                                 double threshold) {
  KaggleBlock k;
  bool have_pos = false;
  for (const auto& o : outcomes) have_pos |= o.label == Label::positive;
  if (have_pos) {
    double sum = 0.0;
    for (size_t i = 0; i < kLeadTimes.size(); ++i) {
      const double ap = ap_at_tta(outcomes, kLeadTimes[i]);
      k.ap_at[i] = ap;
      sum += ap;
    }
    k.map = sum / 3.0;
  }
  k.fpr = f1_fpr_at_threshold(outcomes, threshold).fpr;
  return k;
}

}  // namespace

MetricsReport evaluate(const Manifest& manifest,
                       const std::vector<ScoreTrace>& traces,
                       double threshold) {
  std::map<std::string, const ScoreTrace*> by_id;
  for (const auto& t : traces) by_id[t.clip_id] = &t;

  std::vector<std::string> missing;
  for (const auto& c : manifest.clips) {
    if (!by_id.count(c.clip_id)) missing.push_back(c.clip_id);
  }
  if (!missing.empty()) {
    std::string joined;
    for (size_t i = 0; i < missing.size() && i < 10; ++i) {
      joined += (i ? ", " : "") + missing[i];
    }
    if (missing.size() > 10) joined += ", ...";
    throw ValidationError("missing traces for " +
                          std::to_string(missing.size()) + " clips: " + joined);
  }

  std::vector<ClipOutcome> outcomes;
  outcomes.reserve(manifest.clips.size());
  for (const auto& c : manifest.clips) {
    outcomes.push_back(compute_outcome(c, *by_id.at(c.clip_id), threshold));
  }

  MetricsReport report;
  report.manifest_name = manifest.name;
  report.threshold = threshold;
  report.clip_counts = manifest.group_counts();

  for (Group g : kAllGroups) {
    std::vector<ClipOutcome> members;
    for (const auto& o : outcomes) {
      if (o.group == g) members.push_back(o);
    }
    if (members.empty()) continue;
    report.groups.emplace_back(g, metrics_for(members, threshold));
  }
  report.overall = metrics_for(outcomes, threshold);
  report.kaggle = kaggle_from_outcomes(outcomes, threshold);
  return report;
}

MetricsReport evaluate_single_window(const SingleWindowFixture& fixture,
                                     double threshold) {
  MetricsReport report;
  report.manifest_name = fixture.manifest_name;
  report.model_name = fixture.model_name;
  report.threshold = threshold;
  report.mode = "single_window";

  std::vector<ClipOutcome> outcomes;
  outcomes.reserve(fixture.peaks.size());
  for (const auto& [clip_id, score, is_pos] : fixture.peaks) {
    ClipOutcome o;
    o.clip_id = clip_id;
    o.label = is_pos ? Label::positive : Label::negative;
    o.group = Group::none;
    o.peak_score = score;
    o.entries = {{0.0, score}};
    o.build_threshold = threshold;
    outcomes.push_back(std::move(o));
  }
  report.overall = metrics_for(outcomes, threshold);
  // EWR/MTTA need event times; a single-window fixture has none.
  report.overall.ewr.reset();
  report.overall.mtta_s.reset();
  report.overall.detected = 0;
  report.clip_counts[Group::none] = static_cast<int>(outcomes.size());

  double sum = 0.0;
  bool all = true;
  for (size_t i = 0; i < kLeadTimes.size(); ++i) {
    const auto it = fixture.per_lead_scores.find(kLeadTimes[i]);
    if (it == fixture.per_lead_scores.end()) {
      all = false;
      continue;
    }
    const double ap = average_precision(it->second);
    report.kaggle.ap_at[i] = ap;
    sum += ap;
  }
  if (all) report.kaggle.map = sum / 3.0;
  report.kaggle.fpr = f1_fpr_at_threshold(outcomes, threshold).fpr;
  return report;
}

SingleWindowFixture load_single_window_fixture(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) throw ValidationError("cannot open " + path.string());
  json obj = json::parse(in, nullptr, false);
  if (obj.is_discarded()) {
    throw ValidationError(path.string() + ": JSON parse error");
  }
  if (obj.value("mode", "") != "single_window") {
    throw ValidationError(path.string() +
                          ": fixture mode must be \"single_window\"");
  }
  SingleWindowFixture f;
  f.manifest_name = obj.value("manifest", "");
  f.model_name = obj.value("model", "");
  for (const auto& row : obj.at("peaks")) {
    f.peaks.emplace_back(row.at(0).get<std::string>(),
                         row.at(1).get<double>(), row.at(2).get<bool>());
  }
  for (const auto& [key, rows] : obj.at("per_lead").items()) {
    std::vector<std::pair<double, bool>> scored;
    for (const auto& row : rows) {
      scored.emplace_back(row.at(0).get<double>(), row.at(1).get<bool>());
    }
    f.per_lead_scores[std::stod(key)] = std::move(scored);
  }
  return f;
}

namespace {

std::string fmt6(const std::optional<double>& v) {
  if (!v.has_value()) return "null";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

void write_group(std::ostream& os, const GroupMetrics& m) {
  os << "{\"auc\": " << fmt6(m.auc) << ", \"f1\": " << fmt6(m.f1)
     << ", \"ewr\": " << fmt6(m.ewr) << ", \"mtta_s\": " << fmt6(m.mtta_s)
     << ", \"fpr\": " << fmt6(m.fpr) << ", \"ap\": " << fmt6(m.ap)
     << ", \"pos\": " << m.positives << ", \"neg\": " << m.negatives
     << ", \"detected\": " << m.detected << "}";
}

GroupMetrics group_from_json(const json& obj) {
  GroupMetrics m;
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return obj.at(key).get<double>();
  };
  m.auc = opt("auc");
  m.f1 = opt("f1");
  m.ewr = opt("ewr");
  m.mtta_s = opt("mtta_s");
  m.fpr = opt("fpr");
  m.ap = opt("ap");
  m.positives = obj.value("pos", 0);
  m.negatives = obj.value("neg", 0);
  m.detected = obj.value("detected", 0);
  return m;
}

}  // namespace

void save_report(const MetricsReport& report,
                 const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os.good()) throw ValidationError("cannot write " + path.string());
  os << "{\n";
  os << "  \"manifest\": " << json(report.manifest_name).dump() << ",\n";
  os << "  \"model\": " << json(report.model_name).dump() << ",\n";
  os << "  \"threshold\": " << fmt6(report.threshold) << ",\n";
  os << "  \"mode\": " << json(report.mode).dump() << ",\n";
  os << "  \"groups\": {";
  bool first = true;
  for (const auto& [group, metrics] : report.groups) {
    os << (first ? "\n" : ",\n") << "    \"" << to_string(group) << "\": ";
    write_group(os, metrics);
    first = false;
  }
  os << (first ? "" : "\n  ") << "},\n";
  os << "  \"overall\": ";
  write_group(os, report.overall);
  os << ",\n";
  os << "  \"kaggle\": {\"ap_tta_0_5\": " << fmt6(report.kaggle.ap_at[0])
     << ", \"ap_tta_1_0\": " << fmt6(report.kaggle.ap_at[1])
     << ", \"ap_tta_1_5\": " << fmt6(report.kaggle.ap_at[2])
     << ", \"map\": " << fmt6(report.kaggle.map)
     << ", \"fpr\": " << fmt6(report.kaggle.fpr) << "},\n";
  os << "  \"clip_counts\": {";
  first = true;
  for (const auto& [group, count] : report.clip_counts) {
    os << (first ? "" : ", ") << "\"" << to_string(group) << "\": " << count;
    first = false;
  }
  os << "}\n}\n";
}

MetricsReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) throw ValidationError("cannot open " + path.string());
  json obj = json::parse(in, nullptr, false);
  if (obj.is_discarded()) {
    throw ValidationError(path.string() + ": JSON parse error");
  }
  MetricsReport r;
  r.manifest_name = obj.value("manifest", "");
  r.model_name = obj.value("model", "");
  r.threshold = obj.value("threshold", 0.75);
  r.mode = obj.value("mode", "sliding");
  if (obj.contains("groups")) {
    for (Group g : kAllGroups) {
      const std::string name = to_string(g);
      if (obj.at("groups").contains(name)) {
        r.groups.emplace_back(g, group_from_json(obj.at("groups").at(name)));
      }
    }
  }
  if (obj.contains("overall")) r.overall = group_from_json(obj.at("overall"));
  if (obj.contains("kaggle")) {
    const auto& k = obj.at("kaggle");
    auto opt = [&](const char* key) -> std::optional<double> {
      if (!k.contains(key) || k.at(key).is_null()) return std::nullopt;
      return k.at(key).get<double>();
    };
    r.kaggle.ap_at[0] = opt("ap_tta_0_5");
    r.kaggle.ap_at[1] = opt("ap_tta_1_0");
    r.kaggle.ap_at[2] = opt("ap_tta_1_5");
    r.kaggle.map = opt("map");
    r.kaggle.fpr = opt("fpr");
  }
  if (obj.contains("clip_counts")) {
    for (const auto& [name, count] : obj.at("clip_counts").items()) {
      r.clip_counts[group_from_string(name)] = count.get<int>();
    }
  }
  return r;
}

}  // namespace crashbench
