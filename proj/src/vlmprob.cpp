#include "crashbench/vlmprob.hpp"

#include <cmath>

#include "jsonl.hpp"
#include "mathutil.hpp"

namespace crashbench {

double answer_token_probability(const AnswerLogits& logits) {
  if (!std::isfinite(logits.ell_a) || !std::isfinite(logits.ell_b)) {
    throw ValidationError("answer_token_probability: non-finite log-prob");
  }
  return stable_sigmoid(logits.ell_a - logits.ell_b);
}

double temperature_ensemble(const TemperatureTriple& triple) {
  for (double p : {triple.p_00, triple.p_03, triple.p_07}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("temperature_ensemble: probability outside [0,1]");
    }
  }
  return (triple.p_00 + triple.p_03 + triple.p_07) / 3.0;
}

CompressionDiagnostic compression_diagnostic(
    const std::vector<double>& positive_peaks,
    const std::vector<double>& negative_scores) {
  if (positive_peaks.empty() || negative_scores.empty()) {
    throw ValidationError("compression_diagnostic: empty score list");
  }
  CompressionDiagnostic d;
  double pos_sum = 0.0;
  int pos_low = 0;
  for (double p : positive_peaks) {
    pos_sum += p;
    if (p < 0.6) ++pos_low;
  }
  double neg_sum = 0.0;
  int neg_low = 0;
  for (double p : negative_scores) {
    neg_sum += p;
    if (p < 0.003) ++neg_low;
  }
  d.positive_peak_mean = pos_sum / static_cast<double>(positive_peaks.size());
  d.negative_mean = neg_sum / static_cast<double>(negative_scores.size());
  d.dynamic_range = d.positive_peak_mean - d.negative_mean;
  d.frac_negatives_below_0003 =
      static_cast<double>(neg_low) / static_cast<double>(negative_scores.size());
  d.frac_positive_peaks_below_06 =
      static_cast<double>(pos_low) / static_cast<double>(positive_peaks.size());
  return d;
}

std::vector<ScoreTrace> scores_from_logits_file(
    const std::filesystem::path& path, double fps) {
  std::vector<ScoreTrace> traces;
  jsonl::for_each_line(path, [&](size_t line_no, const jsonl::json& obj) {
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!obj.contains("clip_id")) {
      throw ValidationError(where + ": clip_id missing");
    }
    double p;
    if (obj.contains("ell_a") && obj.contains("ell_b")) {
      p = answer_token_probability(
          {obj.at("ell_a").get<double>(), obj.at("ell_b").get<double>()});
    } else if (obj.contains("p")) {
      const auto& arr = obj.at("p");
      if (!arr.is_array() || arr.size() != 3) {
        throw ValidationError(where + ": \"p\" must hold three probabilities");
      }
      p = temperature_ensemble({arr.at(0).get<double>(),
                                arr.at(1).get<double>(),
                                arr.at(2).get<double>()});
    } else {
      throw ValidationError(where +
                            ": need either ell_a/ell_b or p[3] per line");
    }
    ScoreTrace t;
    t.clip_id = obj.at("clip_id").get<std::string>();
    t.fps = fps;
    // Single-window score; stamped at the first-window prediction time.
    const double at = obj.value("t", 15.0 / fps);
    t.entries.push_back({at, p});
    traces.push_back(std::move(t));
  });
  return traces;
}

}  // namespace crashbench
