#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "crashbench/manifest.hpp"
#include "crashbench/trace.hpp"

namespace crashbench {

/// Lead times (seconds) for the lead-time-constrained AP block.
constexpr std::array<double, 3> kLeadTimes = {0.5, 1.0, 1.5};

/// Per-clip evaluation summary derived from a ScoreTrace. For positives,
/// eligible_peaks[tau] is the max score over windows whose prediction time is
/// at most event_time - tau (0 when no window qualifies); negatives carry
/// their full-trace peak at every tau.
struct ClipOutcome {
  std::string clip_id;
  Label label = Label::negative;
  Group group = Group::none;
  double peak_score = 0.0;
  std::optional<double> first_alert_time_s;  // at the build threshold
  std::optional<double> event_time_s;
  std::map<double, double> eligible_peaks;
  double build_threshold = 0.75;
  // Retained so threshold-dependent quantities (first alert, EWR/FPR sweeps)
  // can be recomputed without the original trace files.
  std::vector<TraceEntry> entries;

  /// First time the trace reaches `threshold`, or nullopt.
  std::optional<double> first_alert_at(double threshold) const;
};

ClipOutcome compute_outcome(const ClipRecord& clip, const ScoreTrace& trace,
                            double threshold,
                            std::span<const double> lead_times = kLeadTimes);

struct GroupMetrics {
  std::optional<double> auc;     // null when a class is missing
  std::optional<double> f1;      // null when there are no positives
  std::optional<double> ewr;     // null when there are no positives
  std::optional<double> mtta_s;  // null when nothing was detected
  std::optional<double> fpr;     // null when there are no negatives
  std::optional<double> ap;      // null when there are no positives
  int positives = 0;
  int negatives = 0;
  int detected = 0;  // alerts strictly before the event
};

struct KaggleBlock {
  std::optional<double> ap_at[3];  // lead times 0.5 / 1.0 / 1.5 s
  std::optional<double> map;       // arithmetic mean of the three
  std::optional<double> fpr;
};

struct MetricsReport {
  std::string manifest_name;
  std::string model_name;
  double threshold = 0.75;
  std::string mode = "sliding";  // or "single_window"
  std::vector<std::pair<Group, GroupMetrics>> groups;  // manifest group order
  GroupMetrics overall;  // micro-pooled over all clips
  KaggleBlock kaggle;
  std::map<Group, int> clip_counts;
};

/// Average precision with threshold-group tie handling: items of equal score
/// enter together and each positive in the group takes the group-boundary
/// precision (the step-wise PR definition). Throws when no positive exists.
double average_precision(std::span<const std::pair<double, bool>> scored);

/// Mann-Whitney statistic P(score_pos > score_neg) + 0.5 P(tie), computed via
/// midranks. Throws on single-class input.
double roc_auc(std::span<const std::pair<double, bool>> scored);

struct F1Fpr {
  std::optional<double> f1;
  std::optional<double> fpr;
  int tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Clip predicted positive iff peak_score >= threshold.
F1Fpr f1_fpr_at_threshold(std::span<const ClipOutcome> outcomes,
                          double threshold);

/// Lead-time-constrained AP: positives score with eligible_peaks[tau],
/// negatives with their full peak.
double ap_at_tta(std::span<const ClipOutcome> outcomes, double tau);

struct EwrMtta {
  std::optional<double> ewr;
  std::optional<double> mtta_s;
  int positives = 0;
  int detected = 0;
};

/// A positive counts as detected iff its first alert at `threshold` falls
/// strictly before the event time; MTTA averages event - alert over detected
/// positives only.
EwrMtta ewr_mtta(std::span<const ClipOutcome> outcomes, double threshold);

/// Full evaluation: per-group metrics plus a micro-pooled overall row and the
/// lead-time AP block. Every manifest clip must have a trace; missing traces
/// raise a ValidationError listing the clip ids.
MetricsReport evaluate(const Manifest& manifest,
                       const std::vector<ScoreTrace>& traces,
                       double threshold);

/// Single-window (competition-style) report: AP per lead time comes from
/// separately stored per-lead-time score lists, classification metrics from
/// the peak list. Each entry is (clip_id, score, is_positive).
struct SingleWindowFixture {
  std::string manifest_name;
  std::string model_name;
  std::vector<std::tuple<std::string, double, bool>> peaks;
  std::map<double, std::vector<std::pair<double, bool>>> per_lead_scores;
};

MetricsReport evaluate_single_window(const SingleWindowFixture& fixture,
                                     double threshold);

SingleWindowFixture load_single_window_fixture(
    const std::filesystem::path& path);

/// report.json: fixed key order, floats at 6 decimal places, null for
/// undefined metrics. Byte-deterministic for identical reports.
void save_report(const MetricsReport& report,
                 const std::filesystem::path& path);
MetricsReport load_report(const std::filesystem::path& path);

}  // namespace crashbench
