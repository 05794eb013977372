#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crashbench/core.hpp"
#include "crashbench/scorer.hpp"
#include "crashbench/trace.hpp"

namespace crashbench {

/// Per-channel normalization applied after resize and scaling to [0,1].
struct PreprocessConfig {
  std::array<double, 3> mean = {0.0, 0.0, 0.0};
  std::array<double, 3> stddev = {1.0, 1.0, 1.0};
};

/// Counts preprocess_frame invocations; incremented inside the preprocessor
/// itself so the O(1)-per-step claim is measured, not assumed.
struct PreprocessStats {
  std::int64_t calls = 0;
};

/// Bilinear resize to 256x256 (half-pixel centers), scale to [0,1], then
/// (x - mean) / std per channel. Throws on zero-sized frames.
Frame preprocess_frame(const RawFrame& raw, const PreprocessConfig& config,
                       PreprocessStats* stats = nullptr);

/// Ordered raw-frame supplier for one clip.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::string clip_id() const = 0;
  virtual double fps() const = 0;
  /// Next frame in order, or nullopt at end of stream.
  virtual std::optional<RawFrame> next() = 0;
};

/// Frames from `%06d.ppm` files in a directory, starting at index 0.
class DirectoryFrameSource : public FrameSource {
 public:
  DirectoryFrameSource(std::string directory, std::string clip_id,
                       double fps = 8.0);
  std::string clip_id() const override { return clip_id_; }
  double fps() const override { return fps_; }
  std::optional<RawFrame> next() override;

 private:
  std::string directory_;
  std::string clip_id_;
  double fps_;
  int next_index_ = 0;
};

/// Deterministic procedural frames; pattern in {"noise","gradient","constant"}.
class SyntheticFrameSource : public FrameSource {
 public:
  SyntheticFrameSource(std::string clip_id, int frame_count,
                       std::uint64_t seed, double fps = 8.0,
                       std::string pattern = "noise", int height = 256,
                       int width = 256);
  std::string clip_id() const override { return clip_id_; }
  double fps() const override { return fps_; }
  std::optional<RawFrame> next() override;

  /// The frame that next() would return at `index`; pure function.
  RawFrame frame_at(int index) const;

 private:
  std::string clip_id_;
  int frame_count_;
  std::uint64_t seed_;
  double fps_;
  std::string pattern_;
  int height_, width_;
  int next_index_ = 0;
};

/// Replays a pre-decoded frame vector (testing aid).
class VectorFrameSource : public FrameSource {
 public:
  VectorFrameSource(std::string clip_id, std::vector<RawFrame> frames,
                    double fps = 8.0);
  std::string clip_id() const override { return clip_id_; }
  double fps() const override { return fps_; }
  std::optional<RawFrame> next() override;

 private:
  std::string clip_id_;
  std::vector<RawFrame> frames_;
  double fps_;
  size_t next_index_ = 0;
};

/// Fixed-capacity queue of the 16 most recent preprocessed frames. Pushing
/// frame k evicts frame k-16; window materialization shares frames, it never
/// copies or re-preprocesses.
class RollingBuffer {
 public:
  void push(std::shared_ptr<const Frame> frame);
  bool full() const { return frames_.size() == Window::kFrames; }
  std::int64_t start_frame_index() const { return start_frame_index_; }
  int fill_count() const { return static_cast<int>(frames_.size()); }
  /// Requires full(); the shared 16-frame window ending at the newest frame.
  Window window(const std::string& clip_id, double fps) const;

 private:
  std::deque<std::shared_ptr<const Frame>> frames_;
  std::int64_t start_frame_index_ = 0;  // index of the oldest held frame
  std::int64_t pushed_ = 0;
};

struct AlertEvent {
  std::string clip_id;
  double alert_time_s = 0.0;  // prediction_time of the triggering window
  double score = 0.0;
  double threshold = 0.0;
};

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
};

/// Wall-clock decomposition per scored window (monotonic clock). A window's
/// preprocessing time covers the frames consumed since the previous score,
/// so per-window total = preprocessing + inference and the totals add up.
struct LatencyReport {
  LatencyStats preprocessing;
  LatencyStats inference;
  std::int64_t windows_measured = 0;
  std::int64_t frames_preprocessed = 0;   // PreprocessStats.calls
  double preprocessing_total_ms = 0.0;
  double inference_total_ms = 0.0;
  double total_ms() const { return preprocessing_total_ms + inference_total_ms; }
};

struct StreamOptions {
  double threshold = 0.75;
  int stride = 1;
  PreprocessConfig preprocess;
  /// Latching by default: at most one alert per clip. With re_arm, alerting
  /// resumes once prediction_time >= last alert + refractory_s.
  bool re_arm = false;
  double refractory_s = 0.0;
  /// Observer for every materialized window (streaming/batch equivalence
  /// checks, attention producers). May be empty.
  std::function<void(const Window&)> on_window;
};

struct StreamResult {
  ScoreTrace trace;
  std::vector<AlertEvent> alerts;
  LatencyReport latency;
  bool complete = true;   // false when the scorer aborted the stream
  std::string error;      // diagnostic when !complete
};

/// Streams a clip: preprocesses each arriving frame exactly once into the
/// rolling buffer, scores a window every `stride` frames once 16 frames are
/// buffered, emits alerts at the first score >= threshold. A scorer failure
/// returns the partial trace flagged incomplete.
StreamResult run_stream(FrameSource& source, Scorer& scorer,
                        const StreamOptions& options);

/// Oracle path: preprocesses the fully decoded clip, then slices all windows
/// directly. Fewer than 16 frames yields an empty list.
std::vector<Window> batch_extract_windows(const std::vector<RawFrame>& frames,
                                          int stride,
                                          const PreprocessConfig& config,
                                          const std::string& clip_id = "",
                                          double fps = 8.0,
                                          PreprocessStats* stats = nullptr);

void save_latency_report(const LatencyReport& report,
                         const std::filesystem::path& path);
void save_alerts(const std::vector<AlertEvent>& alerts,
                 const std::filesystem::path& path);

}  // namespace crashbench
