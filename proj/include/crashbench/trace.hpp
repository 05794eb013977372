#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace crashbench {

/// Time-ordered per-window risk probabilities for one clip.
/// Times are the prediction times of the scoring windows (seconds from clip
/// start); at stride 1 and fps 8 consecutive entries are 0.125 s apart.
struct TraceEntry {
  double t = 0.0;      // prediction_time_s of the window
  double score = 0.0;  // probability in [0,1]
};

struct ScoreTrace {
  std::string clip_id;
  double fps = 8.0;
  int stride = 1;
  std::vector<TraceEntry> entries;

  bool empty() const { return entries.empty(); }
  /// Maximum score over the whole trace; 0 for an empty trace.
  double peak_score() const;
  /// Validates score range and strict time monotonicity.
  void validate() const;
};

/// Per-clip trace file: a header line {"clip_id","fps","stride"} followed by
/// one {"t","score"} object per line. Floats round-trip exactly.
void save_trace(const ScoreTrace& trace, const std::filesystem::path& path);
ScoreTrace load_trace(const std::filesystem::path& path);

/// Combined form: one {"clip_id","fps","stride","entries":[[t,score],...]}
/// object per line. Used for multi-clip bundles (fixtures, evaluate input).
void save_traces(const std::vector<ScoreTrace>& traces,
                 const std::filesystem::path& path);
std::vector<ScoreTrace> load_traces(const std::filesystem::path& path);

}  // namespace crashbench
