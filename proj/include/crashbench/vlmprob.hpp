#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crashbench/trace.hpp"

namespace crashbench {

/// Log-probabilities of the two answer tokens at generation position 0.
struct AnswerLogits {
  double ell_a = 0.0;
  double ell_b = 0.0;
};

/// Probabilities parsed from the model at sampling temperatures 0.0/0.3/0.7.
struct TemperatureTriple {
  double p_00 = 0.0;
  double p_03 = 0.0;
  double p_07 = 0.0;
};

struct CompressionDiagnostic {
  double positive_peak_mean = 0.0;
  double negative_mean = 0.0;
  double dynamic_range = 0.0;  // positive_peak_mean - negative_mean
  double frac_negatives_below_0003 = 0.0;
  double frac_positive_peaks_below_06 = 0.0;
};

/// Softmax over two answer-token log-probabilities, computed via the stable
/// sigmoid of their difference (the naive exp form overflows past |l|~700).
double answer_token_probability(const AnswerLogits& logits);

/// Mean of the three per-temperature probabilities.
double temperature_ensemble(const TemperatureTriple& triple);

CompressionDiagnostic compression_diagnostic(
    const std::vector<double>& positive_peaks,
    const std::vector<double>& negative_scores);

/// Reads logits.jsonl: each line carries either {"clip_id","ell_a","ell_b"}
/// or {"clip_id","p":[p00,p03,p07]}; an optional "t" sets the trace time
/// (default: the first-window prediction time 15/fps). Output mirrors
/// ScoreTrace so the metrics module ingests it directly.
std::vector<ScoreTrace> scores_from_logits_file(
    const std::filesystem::path& path, double fps = 8.0);

}  // namespace crashbench
