#include "crashbench/trace.hpp"

#include <algorithm>

#include "jsonl.hpp"

namespace crashbench {

using jsonl::json;

double ScoreTrace::peak_score() const {
  double peak = 0.0;
  for (const auto& e : entries) peak = std::max(peak, e.score);
  return peak;
}

void ScoreTrace::validate() const {
  double prev = -1.0;
  for (const auto& e : entries) {
    if (e.score < 0.0 || e.score > 1.0) {
      throw ValidationError("trace " + clip_id + ": score " +
                            std::to_string(e.score) + " outside [0,1]");
    }
    if (e.t <= prev) {
      throw ValidationError("trace " + clip_id +
                            ": times not strictly increasing at t=" +
                            std::to_string(e.t));
    }
    prev = e.t;
  }
}

void save_trace(const ScoreTrace& trace, const std::filesystem::path& path) {
  jsonl::Writer w(path);
  w.write({{"clip_id", trace.clip_id}, {"fps", trace.fps},
           {"stride", trace.stride}});
  for (const auto& e : trace.entries) {
    w.write({{"t", e.t}, {"score", e.score}});
  }
}

ScoreTrace load_trace(const std::filesystem::path& path) {
  ScoreTrace trace;
  bool have_header = false;
  jsonl::for_each_line(path, [&](size_t line_no, const json& obj) {
    if (!have_header) {
      if (!obj.contains("clip_id")) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": trace header with clip_id expected");
      }
      trace.clip_id = obj.at("clip_id").get<std::string>();
      trace.fps = obj.value("fps", 8.0);
      trace.stride = obj.value("stride", 1);
      have_header = true;
      return;
    }
    trace.entries.push_back(
        {obj.at("t").get<double>(), obj.at("score").get<double>()});
  });
  if (!have_header) {
    throw ValidationError(path.string() + ": empty trace file");
  }
  trace.validate();
  return trace;
}

void save_traces(const std::vector<ScoreTrace>& traces,
                 const std::filesystem::path& path) {
  jsonl::Writer w(path);
  for (const auto& t : traces) {
    json entries = json::array();
    for (const auto& e : t.entries) entries.push_back({e.t, e.score});
    w.write({{"clip_id", t.clip_id}, {"fps", t.fps}, {"stride", t.stride},
             {"entries", entries}});
  }
}

std::vector<ScoreTrace> load_traces(const std::filesystem::path& path) {
  std::vector<ScoreTrace> traces;
  jsonl::for_each_line(path, [&](size_t line_no, const json& obj) {
    ScoreTrace t;
    if (!obj.contains("clip_id")) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": clip_id missing");
    }
    t.clip_id = obj.at("clip_id").get<std::string>();
    t.fps = obj.value("fps", 8.0);
    t.stride = obj.value("stride", 1);
    for (const auto& pair : obj.at("entries")) {
      t.entries.push_back(
          {pair.at(0).get<double>(), pair.at(1).get<double>()});
    }
    t.validate();
    traces.push_back(std::move(t));
  });
  return traces;
}

}  // namespace crashbench
