#include "crashbench/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "jsonl.hpp"

namespace crashbench {

using jsonl::json;

namespace {

std::string fmt_seconds(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(Group g) {
  switch (g) {
    case Group::animal: return "animal";
    case Group::pedestrian: return "pedestrian";
    case Group::intersection: return "intersection";
    case Group::pass_overtake: return "pass_overtake";
    case Group::cyclist: return "cyclist";
    case Group::motorcyclist: return "motorcyclist";
    case Group::infrastructure: return "infrastructure";
    case Group::rain: return "rain";
    case Group::snow: return "snow";
    case Group::fog: return "fog";
    case Group::none: return "none";
  }
  return "none";
}

std::string to_string(Label l) {
  return l == Label::positive ? "positive" : "negative";
}

std::string to_string(Source s) {
  switch (s) {
    case Source::longtail: return "longtail";
    case Source::kaggle: return "kaggle";
    case Source::external: return "external";
    case Source::synthetic: return "synthetic";
  }
  return "external";
}

Group group_from_string(const std::string& s) {
  for (Group g : kAllGroups) {
    if (to_string(g) == s) return g;
  }
  throw ValidationError("unknown group '" + s + "'");
}

Label label_from_string(const std::string& s) {
  if (s == "positive") return Label::positive;
  if (s == "negative") return Label::negative;
  throw ValidationError("unknown label '" + s + "'");
}

Source source_from_string(const std::string& s) {
  if (s == "longtail") return Source::longtail;
  if (s == "kaggle") return Source::kaggle;
  if (s == "external") return Source::external;
  if (s == "synthetic") return Source::synthetic;
  throw ValidationError("unknown source '" + s + "'");
}

std::string to_string(Disposition d) {
  switch (d) {
    case Disposition::pending: return "pending";
    case Disposition::confirmed_positive: return "confirmed_positive";
    case Disposition::confirmed_negative: return "confirmed_negative";
  }
  return "pending";
}

Disposition disposition_from_string(const std::string& s) {
  if (s == "pending") return Disposition::pending;
  if (s == "confirmed_positive") return Disposition::confirmed_positive;
  if (s == "confirmed_negative") return Disposition::confirmed_negative;
  throw ValidationError("unknown disposition '" + s + "'");
}

std::map<Group, int> Manifest::group_counts() const {
  std::map<Group, int> counts;
  for (const auto& c : clips) counts[c.group]++;
  return counts;
}

const ClipRecord* Manifest::find(const std::string& clip_id) const {
  for (const auto& c : clips) {
    if (c.clip_id == clip_id) return &c;
  }
  return nullptr;
}

void validate_clip(const ClipRecord& clip) {
  if (clip.clip_id.empty()) {
    throw ValidationError("clip with empty clip_id");
  }
  if (clip.duration_s <= 0.0) {
    throw ValidationError("clip " + clip.clip_id + ": duration_s must be > 0");
  }
  if (clip.fps <= 0.0) {
    throw ValidationError("clip " + clip.clip_id + ": fps must be > 0");
  }
  if (clip.positive()) {
    if (!clip.event_time_s.has_value()) {
      throw ValidationError("clip " + clip.clip_id +
                            ": positive clip missing event_time_s");
    }
    if (*clip.event_time_s <= 0.0 || *clip.event_time_s > clip.duration_s) {
      throw ValidationError(
          "clip " + clip.clip_id + ": event_time_s " +
          fmt_seconds(*clip.event_time_s) + " outside (0, duration_s=" +
          fmt_seconds(clip.duration_s) + "]");
    }
  } else if (clip.event_time_s.has_value()) {
    throw ValidationError("clip " + clip.clip_id +
                          ": negative clip carries event_time_s");
  }
  for (const auto& b : clip.gt_boxes) {
    const bool ok = b.x0 >= 0 && b.x0 < b.x1 && b.x1 <= 256 && b.y0 >= 0 &&
                    b.y0 < b.y1 && b.y1 <= 256;
    if (!ok) {
      throw ValidationError("clip " + clip.clip_id +
                            ": gt_box outside 256x256 bounds or degenerate");
    }
    if (b.frame_index < 0) {
      throw ValidationError("clip " + clip.clip_id +
                            ": gt_box frame_index negative");
    }
  }
}

namespace {

ClipRecord clip_from_json(const json& obj, const std::string& where) {
  static const std::set<std::string> known = {
      "clip_id", "group", "label", "duration_s", "event_time_s",
      "fps",     "gt_boxes", "source"};
  ClipRecord c;
  try {
    c.clip_id = obj.at("clip_id").get<std::string>();
    c.group = group_from_string(obj.at("group").get<std::string>());
    c.label = label_from_string(obj.at("label").get<std::string>());
    c.duration_s = obj.at("duration_s").get<double>();
    if (obj.contains("event_time_s") && !obj.at("event_time_s").is_null()) {
      c.event_time_s = obj.at("event_time_s").get<double>();
    }
    c.fps = obj.value("fps", 8.0);
    if (obj.contains("gt_boxes") && !obj.at("gt_boxes").is_null()) {
      for (const auto& b : obj.at("gt_boxes")) {
        c.gt_boxes.push_back({b.at(0).get<int>(), b.at(1).get<double>(),
                              b.at(2).get<double>(), b.at(3).get<double>(),
                              b.at(4).get<double>()});
      }
    }
    c.source = source_from_string(obj.at("source").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(where + ": malformed clip record: " + e.what());
  }
  json extra = json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) extra[it.key()] = it.value();
  }
  if (!extra.empty()) c.extra_json = extra.dump();
  return c;
}

json clip_to_json(const ClipRecord& c) {
  json obj;
  obj["clip_id"] = c.clip_id;
  obj["group"] = to_string(c.group);
  obj["label"] = to_string(c.label);
  obj["duration_s"] = c.duration_s;
  if (c.event_time_s.has_value()) obj["event_time_s"] = *c.event_time_s;
  obj["fps"] = c.fps;
  if (!c.gt_boxes.empty()) {
    json boxes = json::array();
    for (const auto& b : c.gt_boxes) {
      boxes.push_back({b.frame_index, b.x0, b.y0, b.x1, b.y1});
    }
    obj["gt_boxes"] = boxes;
  }
  obj["source"] = to_string(c.source);
  if (!c.extra_json.empty()) {
    json extra = json::parse(c.extra_json);
    for (auto it = extra.begin(); it != extra.end(); ++it) {
      obj[it.key()] = it.value();
    }
  }
  return obj;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path,
                       std::vector<std::string>* warnings) {
  Manifest m;
  m.name = path.stem().string();
  std::set<std::string> seen_ids;
  bool first = true;
  jsonl::for_each_line(path, [&](size_t line_no, const json& obj) {
    if (first && !obj.contains("clip_id") &&
        (obj.contains("manifest_name") || obj.contains("manifest_version"))) {
      m.name = obj.value("manifest_name", m.name);
      m.version = obj.value("manifest_version", "");
      first = false;
      return;
    }
    first = false;
    ClipRecord clip =
        clip_from_json(obj, path.string() + ":" + std::to_string(line_no));
    validate_clip(clip);
    if (!seen_ids.insert(clip.clip_id).second) {
      throw ValidationError("clip " + clip.clip_id + ": duplicate clip_id (" +
                            path.string() + ":" + std::to_string(line_no) +
                            ")");
    }
    m.clips.push_back(std::move(clip));
  });
  if (m.clips.empty() && warnings) {
    warnings->push_back("manifest " + path.string() + " has no clips");
  }
  if (warnings) {
    for (const auto& v : validate_longtail_standard(m)) {
      warnings->push_back("clip " + v.clip_id + ": " + v.message);
    }
  }
  return m;
}

void save_manifest(const Manifest& manifest,
                   const std::filesystem::path& path) {
  jsonl::Writer w(path);
  w.write({{"manifest_name", manifest.name},
           {"manifest_version", manifest.version}});
  for (const auto& c : manifest.clips) w.write(clip_to_json(c));
}

std::vector<LongtailViolation> validate_longtail_standard(
    const Manifest& manifest) {
  std::vector<LongtailViolation> out;
  for (const auto& c : manifest.clips) {
    if (c.source != Source::longtail) continue;
    if (c.duration_s != 9.0) {
      out.push_back({c.clip_id, "duration",
                     "duration " + fmt_seconds(c.duration_s) + " s != 9 s"});
    }
    if (!c.positive()) continue;
    const double event = *c.event_time_s;
    if (event != 6.0) {
      out.push_back({c.clip_id, "event_time",
                     "event_time_s " + fmt_seconds(event) + " != 6 s"});
    }
    const double post = c.duration_s - event;
    if (post < 3.0) {
      out.push_back({c.clip_id, "post_event",
                     "post-event footage " + fmt_seconds(post) + " s < 3 s"});
    }
  }
  return out;
}

std::vector<ReviewQueueEntry> mine_review_queue(
    const std::vector<ScoreTrace>& traces, double threshold,
    std::vector<std::string>* warnings) {
  if (threshold <= 0.0 || threshold >= 1.0) {
    throw ValidationError("mining threshold must be in (0,1)");
  }
  std::vector<ReviewQueueEntry> queue;
  for (const auto& trace : traces) {
    if (trace.empty()) {
      if (warnings) {
        warnings->push_back("trace " + trace.clip_id + " is empty; skipped");
      }
      continue;
    }
    const double peak = trace.peak_score();
    if (peak >= threshold) {
      queue.push_back({trace.clip_id, peak, Disposition::pending, false});
    }
  }
  std::stable_sort(queue.begin(), queue.end(),
                   [](const ReviewQueueEntry& a, const ReviewQueueEntry& b) {
                     return a.peak_score > b.peak_score;
                   });
  return queue;
}

ReviewQueueEntry mark_disposition(const ReviewQueueEntry& entry,
                                  Disposition disposition,
                                  double mining_threshold) {
  if (entry.disposition != Disposition::pending) {
    throw ValidationError("entry " + entry.clip_id +
                          " already marked " + to_string(entry.disposition));
  }
  if (disposition == Disposition::pending) {
    throw ValidationError("cannot mark entry " + entry.clip_id +
                          " back to pending");
  }
  ReviewQueueEntry out = entry;
  out.disposition = disposition;
  out.hard_negative = disposition == Disposition::confirmed_negative &&
                      entry.peak_score >= mining_threshold;
  return out;
}

void save_queue(const std::vector<ReviewQueueEntry>& queue,
                const std::filesystem::path& path) {
  jsonl::Writer w(path);
  for (const auto& e : queue) {
    w.write({{"clip_id", e.clip_id},
             {"peak_score", e.peak_score},
             {"disposition", to_string(e.disposition)},
             {"hard_negative", e.hard_negative}});
  }
}

std::vector<ReviewQueueEntry> load_queue(const std::filesystem::path& path) {
  std::vector<ReviewQueueEntry> queue;
  jsonl::for_each_line(path, [&](size_t line_no, const json& obj) {
    ReviewQueueEntry e;
    e.clip_id = obj.at("clip_id").get<std::string>();
    e.peak_score = obj.at("peak_score").get<double>();
    e.disposition =
        disposition_from_string(obj.at("disposition").get<std::string>());
    e.hard_negative = obj.at("hard_negative").get<bool>();
    if (e.hard_negative && e.disposition != Disposition::confirmed_negative) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": hard_negative entry not confirmed_negative");
    }
    queue.push_back(std::move(e));
  });
  return queue;
}

}  // namespace crashbench
