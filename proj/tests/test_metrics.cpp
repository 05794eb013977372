#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>

#include "crashbench/metrics.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace crashbench;

namespace {

using Scored = std::vector<std::pair<double, bool>>;

ClipRecord positive_clip(const std::string& id, Group group = Group::animal,
                         double event = 6.0) {
  ClipRecord c;
  c.clip_id = id;
  c.group = group;
  c.label = Label::positive;
  c.duration_s = 9.0;
  c.event_time_s = event;
  c.fps = 8.0;
  c.source = Source::longtail;
  return c;
}

ClipRecord negative_clip(const std::string& id, Group group = Group::animal) {
  ClipRecord c;
  c.clip_id = id;
  c.group = group;
  c.label = Label::negative;
  c.duration_s = 9.0;
  c.fps = 8.0;
  c.source = Source::longtail;
  return c;
}

ScoreTrace stride1_trace(const std::string& id,
                         const std::function<double(double)>& f) {
  ScoreTrace t;
  t.clip_id = id;
  for (int start = 0; start <= 56; ++start) {
    const double at = (start + 15) / 8.0;
    t.entries.push_back({at, std::clamp(f(at), 0.0, 1.0)});
  }
  return t;
}

Scored random_instance(std::mt19937_64& rng, bool force_both_classes) {
  std::uniform_int_distribution<int> size_dist(2, 64);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> quant(1, 8);
  for (;;) {
    const int n = size_dist(rng);
    // Quantized scores make duplicates common.
    const double q = static_cast<double>(quant(rng)) * 4.0;
    Scored scored;
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      const bool is_pos = unit(rng) < 0.5;
      pos += is_pos;
      scored.emplace_back(std::floor(unit(rng) * q) / q, is_pos);
    }
    if (pos == 0) continue;
    if (force_both_classes && pos == n) continue;
    return scored;
  }
}

}  // namespace

TEST_CASE("average precision on the worked examples") {
  CHECK(average_precision(Scored{{0.9, true}, {0.1, false}}) == 1.0);
  CHECK(average_precision(
            Scored{{0.9, true}, {0.8, false}, {0.7, true}, {0.6, false}}) ==
        doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
  // one positive ranked below three negatives: precision 1/4 at the positive
  CHECK(average_precision(Scored{{0.8, false},
                                 {0.7, false},
                                 {0.6, false},
                                 {0.1, true}}) == 0.25);
  CHECK_THROWS_WITH_AS(average_precision(Scored{{0.5, false}}),
                       doctest::Contains("AP undefined"), ValidationError);
}

TEST_CASE("roc auc on the worked examples") {
  CHECK(roc_auc(Scored{{0.9, true}, {0.8, true}, {0.2, false}}) == 1.0);
  CHECK(roc_auc(Scored{{0.5, true}, {0.5, false}, {0.5, true}}) == 0.5);
  // pos {0.9, 0.4}, neg {0.6, 0.1}: 3 wins of 4 pairs
  CHECK(roc_auc(Scored{{0.9, true}, {0.4, true}, {0.6, false},
                       {0.1, false}}) == 0.75);
  CHECK_THROWS_AS(roc_auc(Scored{{0.9, true}}), ValidationError);
}

TEST_CASE("AP and AUC match brute force on 1000 random instances") {
  std::mt19937_64 rng(20260810);
  for (int i = 0; i < 1000; ++i) {
    const Scored scored = random_instance(rng, /*force_both_classes=*/false);
    CHECK(std::abs(average_precision(scored) -
                   oracles::average_precision_bruteforce(scored)) < 1e-12);
    const bool has_neg =
        std::any_of(scored.begin(), scored.end(),
                    [](const auto& s) { return !s.second; });
    if (has_neg) {
      CHECK(std::abs(roc_auc(scored) - oracles::roc_auc_bruteforce(scored)) <
            1e-12);
    }
  }
}

TEST_CASE("AUC is invariant under strictly increasing score transforms") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const Scored scored = random_instance(rng, /*force_both_classes=*/true);
    Scored warped = scored;
    for (auto& [score, label] : warped) {
      score = std::exp(3.0 * score) + 0.1 * score;
    }
    CHECK(roc_auc(scored) == doctest::Approx(roc_auc(warped)).epsilon(1e-12));
  }
}

TEST_CASE("f1/fpr at threshold on the worked examples") {
  std::vector<ClipOutcome> outcomes;
  auto add = [&](bool pos, double peak) {
    ClipOutcome o;
    o.clip_id = "c" + std::to_string(outcomes.size());
    o.label = pos ? Label::positive : Label::negative;
    o.peak_score = peak;
    outcomes.push_back(o);
  };
  // all positives at 0.9, all negatives at 0.1
  add(true, 0.9);
  add(true, 0.9);
  add(false, 0.1);
  const F1Fpr clean = f1_fpr_at_threshold(outcomes, 0.75);
  CHECK(*clean.f1 == 1.0);
  CHECK(*clean.fpr == 0.0);

  // 1 TP, 1 FN, 1 FP, 1 TN
  outcomes.clear();
  add(true, 0.9);
  add(true, 0.1);
  add(false, 0.9);
  add(false, 0.1);
  const F1Fpr mixed = f1_fpr_at_threshold(outcomes, 0.75);
  CHECK(*mixed.f1 == 0.5);
  CHECK(*mixed.fpr == 0.5);

  // degenerate sides are null
  outcomes.clear();
  add(false, 0.9);
  const F1Fpr neg_only = f1_fpr_at_threshold(outcomes, 0.75);
  CHECK(!neg_only.f1.has_value());
  CHECK(*neg_only.fpr == 1.0);
  outcomes.clear();
  add(true, 0.9);
  const F1Fpr pos_only = f1_fpr_at_threshold(outcomes, 0.75);
  CHECK(!pos_only.fpr.has_value());
  CHECK(*pos_only.f1 == 1.0);
}

TEST_CASE("eligible peaks: windows ending at most event - tau") {
  // event 6.0, tau 1.0 -> last eligible window ends at 5.0, start index 25
  const ClipRecord clip = positive_clip("elig");
  const ScoreTrace trace = stride1_trace("elig", [](double t) {
    return t <= 5.0 ? 0.4 : 0.9;  // scores jump after the cutoff
  });
  const ClipOutcome o = compute_outcome(clip, trace, 0.75);
  CHECK(o.peak_score == 0.9);
  CHECK(o.eligible_peaks.at(1.0) == 0.4);
  CHECK(o.eligible_peaks.at(0.5) == 0.9);  // 5.5 <= 6.0 - 0.5
  CHECK(o.eligible_peaks.at(1.5) == 0.4);
  // per-clip monotonicity in tau
  CHECK(o.eligible_peaks.at(1.5) <= o.eligible_peaks.at(1.0));
  CHECK(o.eligible_peaks.at(1.0) <= o.eligible_peaks.at(0.5));
  CHECK(o.eligible_peaks.at(0.5) <= o.peak_score);
}

TEST_CASE("ap_at_tta degrades when high scores come late") {
  std::vector<ClipOutcome> outcomes;
  // positive with late evidence only
  const ClipOutcome late = compute_outcome(
      positive_clip("late"), stride1_trace("late", [](double t) {
        return t > 5.2 ? 0.95 : 0.05;
      }),
      0.75);
  // clean positive
  const ClipOutcome early = compute_outcome(
      positive_clip("early"), stride1_trace("early", [](double) {
        return 0.9;
      }),
      0.75);
  const ClipOutcome neg = compute_outcome(
      negative_clip("neg"), stride1_trace("neg", [](double) { return 0.5; }),
      0.75);
  outcomes = {late, early, neg};
  const double ap_05 = ap_at_tta(outcomes, 0.5);
  const double ap_15 = ap_at_tta(outcomes, 1.5);
  CHECK(ap_15 < ap_05);
}

TEST_CASE("ewr/mtta arithmetic and strict boundary") {
  std::vector<ClipOutcome> outcomes;
  auto with_alert = [&](const std::string& id, double alert_t) {
    const ClipOutcome o = compute_outcome(
        positive_clip(id), stride1_trace(id, [&, alert_t](double t) {
          return t >= alert_t ? 0.9 : 0.1;
        }),
        0.75);
    outcomes.push_back(o);
  };
  with_alert("lead1", 5.0);  // lead 1.0
  with_alert("lead2", 4.0);  // lead 2.0
  // undetected: never crosses
  outcomes.push_back(compute_outcome(
      positive_clip("miss"),
      stride1_trace("miss", [](double) { return 0.2; }), 0.75));

  const EwrMtta r = ewr_mtta(outcomes, 0.75);
  CHECK(*r.ewr == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(*r.mtta_s == doctest::Approx(1.5).epsilon(1e-12));

  // alert exactly at the event is not an early warning
  std::vector<ClipOutcome> boundary = {compute_outcome(
      positive_clip("at-event"),
      stride1_trace("at-event", [](double t) { return t >= 6.0 ? 0.9 : 0.1; }),
      0.75)};
  const EwrMtta b = ewr_mtta(boundary, 0.75);
  CHECK(*b.ewr == 0.0);
  CHECK(!b.mtta_s.has_value());

  // no positives: both null
  std::vector<ClipOutcome> none = {compute_outcome(
      negative_clip("n"), stride1_trace("n", [](double) { return 0.1; }),
      0.75)};
  const EwrMtta e = ewr_mtta(none, 0.75);
  CHECK(!e.ewr.has_value());
  CHECK(!e.mtta_s.has_value());
}

TEST_CASE("EWR and FPR are non-increasing in threshold") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ClipRecord> clips;
  std::vector<ScoreTrace> traces;
  for (int i = 0; i < 60; ++i) {
    const bool pos = i % 2 == 0;
    const std::string id = "r" + std::to_string(i);
    clips.push_back(pos ? positive_clip(id) : negative_clip(id));
    const double base = unit(rng);
    traces.push_back(stride1_trace(id, [base](double t) {
      return std::clamp(base + 0.3 * std::sin(t * 2.1 + base * 7), 0.0, 1.0);
    }));
  }
  double prev_ewr = 1.0, prev_fpr = 1.0;
  for (double threshold : {0.1, 0.25, 0.4, 0.55, 0.7, 0.85}) {
    std::vector<ClipOutcome> outcomes;
    for (size_t i = 0; i < clips.size(); ++i) {
      outcomes.push_back(compute_outcome(clips[i], traces[i], threshold));
    }
    const EwrMtta e = ewr_mtta(outcomes, threshold);
    const F1Fpr f = f1_fpr_at_threshold(outcomes, threshold);
    CHECK(*e.ewr <= prev_ewr + 1e-15);
    CHECK(*f.fpr <= prev_fpr + 1e-15);
    prev_ewr = *e.ewr;
    prev_fpr = *f.fpr;
  }
}

TEST_CASE("evaluate: single group manifest equals overall") {
  Manifest m;
  m.name = "single";
  m.clips = {positive_clip("p1", Group::fog), negative_clip("n1", Group::fog)};
  std::vector<ScoreTrace> traces = {
      stride1_trace("p1", [](double t) { return t >= 5.0 ? 0.9 : 0.1; }),
      stride1_trace("n1", [](double) { return 0.2; })};
  const MetricsReport report = evaluate(m, traces, 0.75);
  REQUIRE(report.groups.size() == 1);
  CHECK(report.groups[0].first == Group::fog);
  CHECK(report.groups[0].second.auc == report.overall.auc);
  CHECK(report.groups[0].second.f1 == report.overall.f1);
  CHECK(report.groups[0].second.ewr == report.overall.ewr);
}

TEST_CASE("evaluate: missing traces error lists clip ids") {
  Manifest m;
  m.clips = {positive_clip("have"), positive_clip("gone")};
  std::vector<ScoreTrace> traces = {
      stride1_trace("have", [](double) { return 0.5; })};
  CHECK_THROWS_WITH_AS(evaluate(m, traces, 0.75), doctest::Contains("gone"),
                       ValidationError);
}

TEST_CASE("evaluate: degenerate single-class group reports null AUC") {
  Manifest m;
  m.clips = {positive_clip("only-pos", Group::snow)};
  std::vector<ScoreTrace> traces = {
      stride1_trace("only-pos", [](double) { return 0.9; })};
  const MetricsReport report = evaluate(m, traces, 0.75);
  CHECK(!report.overall.auc.has_value());
  CHECK(report.overall.f1.has_value());
}

TEST_CASE("evaluate: permutation invariance") {
  Manifest m;
  std::vector<ScoreTrace> traces;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const std::string id = "p" + std::to_string(i);
    const bool pos = i % 3 != 0;
    m.clips.push_back(pos ? positive_clip(id, kAllGroups[i % 5])
                          : negative_clip(id, kAllGroups[i % 5]));
    const double base = unit(rng);
    traces.push_back(stride1_trace(id, [base](double t) {
      return std::clamp(base * t / 9.0 + 0.05, 0.0, 1.0);
    }));
  }
  const MetricsReport a = evaluate(m, traces, 0.75);

  Manifest shuffled = m;
  std::vector<size_t> order(m.clips.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  shuffled.clips.clear();
  std::vector<ScoreTrace> shuffled_traces;
  for (size_t i : order) {
    shuffled.clips.push_back(m.clips[i]);
    shuffled_traces.push_back(traces[i]);
  }
  std::shuffle(shuffled_traces.begin(), shuffled_traces.end(), rng);
  const MetricsReport b = evaluate(shuffled, shuffled_traces, 0.75);

  CHECK(*a.overall.auc == doctest::Approx(*b.overall.auc).epsilon(1e-15));
  CHECK(*a.overall.f1 == *b.overall.f1);
  CHECK(*a.overall.ewr == *b.overall.ewr);
  CHECK(*a.kaggle.map == doctest::Approx(*b.kaggle.map).epsilon(1e-15));
}

TEST_CASE("888-clip fixture evaluates to the reference overall row") {
  const Manifest m =
      load_manifest(testutil::fixtures_dir() / "longtail_manifest.jsonl");
  const auto traces =
      load_traces(testutil::fixtures_dir() / "traces_badas20.jsonl");
  const MetricsReport report = evaluate(m, traces, 0.75);
  CHECK(report.groups.size() == 10);

  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.3f", *report.overall.auc);
  CHECK(std::string(buf) == "0.993");
  std::snprintf(buf, sizeof(buf), "%.3f", *report.overall.f1);
  CHECK(std::string(buf) == "0.964");
  std::snprintf(buf, sizeof(buf), "%.1f", *report.overall.ewr * 100.0);
  CHECK(std::string(buf) == "91.3");
  std::snprintf(buf, sizeof(buf), "%.2f", *report.overall.mtta_s);
  CHECK(std::string(buf) == "1.31");
  CHECK(report.overall.positives == 435);
  CHECK(report.overall.negatives == 453);
  CHECK(report.overall.detected == 397);
}

TEST_CASE("kaggle single-window fixture reproduces the reference AP row") {
  const auto fixture = load_single_window_fixture(
      testutil::fixtures_dir() / "kaggle_badas20.json");
  const MetricsReport report = evaluate_single_window(fixture, 0.75);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.3f", *report.kaggle.ap_at[0]);
  CHECK(std::string(buf) == "0.943");
  std::snprintf(buf, sizeof(buf), "%.3f", *report.kaggle.ap_at[1]);
  CHECK(std::string(buf) == "0.957");
  std::snprintf(buf, sizeof(buf), "%.3f", *report.kaggle.ap_at[2]);
  CHECK(std::string(buf) == "0.921");
  std::snprintf(buf, sizeof(buf), "%.3f", *report.kaggle.map);
  CHECK(std::string(buf) == "0.940");
  std::snprintf(buf, sizeof(buf), "%.1f", *report.kaggle.fpr * 100.0);
  CHECK(std::string(buf) == "4.6");
  // mAP is the arithmetic mean of the three AP values
  CHECK(*report.kaggle.map ==
        doctest::Approx((*report.kaggle.ap_at[0] + *report.kaggle.ap_at[1] +
                         *report.kaggle.ap_at[2]) /
                        3.0)
            .epsilon(1e-15));
}

TEST_CASE("report.json serialization round-trips and is byte-deterministic") {
  testutil::TempDir tmp("report_json");
  const Manifest m =
      load_manifest(testutil::fixtures_dir() / "longtail_manifest.jsonl");
  const auto traces =
      load_traces(testutil::fixtures_dir() / "traces_badas20.jsonl");
  const MetricsReport report = evaluate(m, traces, 0.75);
  save_report(report, tmp.file("a.json"));
  save_report(report, tmp.file("b.json"));
  std::ifstream fa(tmp.file("a.json")), fb(tmp.file("b.json"));
  const std::string sa((std::istreambuf_iterator<char>(fa)), {});
  const std::string sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(sa == sb);
  CHECK(sa.find("\"auc\": 0.992860") != std::string::npos);

  const MetricsReport loaded = load_report(tmp.file("a.json"));
  CHECK(loaded.groups.size() == report.groups.size());
  CHECK(*loaded.overall.f1 ==
        doctest::Approx(*report.overall.f1).epsilon(1e-6));
  CHECK(loaded.threshold == 0.75);
}
