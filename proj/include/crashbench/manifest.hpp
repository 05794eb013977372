#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crashbench/core.hpp"
#include "crashbench/trace.hpp"

namespace crashbench {

enum class Group {
  animal,
  pedestrian,
  intersection,
  pass_overtake,
  cyclist,
  motorcyclist,
  infrastructure,
  rain,
  snow,
  fog,
  none,
};

enum class Label { positive, negative };

enum class Source { longtail, kaggle, external, synthetic };

constexpr std::array<Group, 11> kAllGroups = {
    Group::animal,        Group::pedestrian,     Group::intersection,
    Group::pass_overtake, Group::cyclist,        Group::motorcyclist,
    Group::infrastructure, Group::rain,          Group::snow,
    Group::fog,           Group::none,
};

std::string to_string(Group g);
std::string to_string(Label l);
std::string to_string(Source s);
Group group_from_string(const std::string& s);
Label label_from_string(const std::string& s);
Source source_from_string(const std::string& s);

/// Ground-truth danger box in the 256x256 post-preprocessing frame.
struct GtBox {
  int frame_index = 0;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// One benchmark clip.
struct ClipRecord {
  std::string clip_id;
  Group group = Group::none;
  Label label = Label::negative;
  double duration_s = 0.0;
  std::optional<double> event_time_s;  // present iff positive
  double fps = 8.0;
  std::vector<GtBox> gt_boxes;
  Source source = Source::external;
  std::string extra_json;  // unknown keys, preserved for round-trip

  bool positive() const { return label == Label::positive; }
};

struct Manifest {
  std::string name;
  std::string version;
  std::vector<ClipRecord> clips;

  std::map<Group, int> group_counts() const;
  const ClipRecord* find(const std::string& clip_id) const;
};

enum class Disposition { pending, confirmed_positive, confirmed_negative };

std::string to_string(Disposition d);
Disposition disposition_from_string(const std::string& s);

/// Active-mining review queue entry. hard_negative implies a confirmed
/// negative whose peak score reached the mining threshold.
struct ReviewQueueEntry {
  std::string clip_id;
  double peak_score = 0.0;
  Disposition disposition = Disposition::pending;
  bool hard_negative = false;
};

struct LongtailViolation {
  std::string clip_id;
  std::string rule;     // "duration" | "event_time" | "post_event"
  std::string message;  // human-readable, includes the offending values
};

/// Loads a JSONL manifest, one ClipRecord per line. An optional first line
/// {"manifest_name","manifest_version"} carries metadata. Structural
/// invariant violations (missing event time, bad boxes, duplicate ids) throw
/// ValidationError naming the clip and rule; parse failures name the line.
/// Long-tail standardization deviations are reported via `warnings`, not
/// errors (see validate_longtail_standard).
Manifest load_manifest(const std::filesystem::path& path,
                       std::vector<std::string>* warnings = nullptr);

void save_manifest(const Manifest& manifest,
                   const std::filesystem::path& path);

/// Validates a single record's structural invariants; throws ValidationError.
void validate_clip(const ClipRecord& clip);

/// Checks the 9 s / event-at-6 s / 3 s post-event standardization for
/// source=longtail clips. Violations are data, not errors.
std::vector<LongtailViolation> validate_longtail_standard(
    const Manifest& manifest);

/// One pending entry per trace whose peak score reaches `threshold`, sorted
/// by descending peak. Empty traces are skipped with a warning.
std::vector<ReviewQueueEntry> mine_review_queue(
    const std::vector<ScoreTrace>& traces, double threshold,
    std::vector<std::string>* warnings = nullptr);

/// Resolves a pending entry. Confirmed negatives at or above the mining
/// threshold become hard negatives. Re-marking a non-pending entry throws.
ReviewQueueEntry mark_disposition(const ReviewQueueEntry& entry,
                                  Disposition disposition,
                                  double mining_threshold);

void save_queue(const std::vector<ReviewQueueEntry>& queue,
                const std::filesystem::path& path);
std::vector<ReviewQueueEntry> load_queue(const std::filesystem::path& path);

}  // namespace crashbench
