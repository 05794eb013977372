#include "crashbench/streaming.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "crashbench/imageops.hpp"
#include "jsonl.hpp"

namespace crashbench {

Frame preprocess_frame(const RawFrame& raw, const PreprocessConfig& config,
                       PreprocessStats* stats) {
  if (raw.empty()) {
    throw ValidationError("preprocess_frame: zero-sized frame");
  }
  if (raw.data.size() != static_cast<size_t>(raw.height) * raw.width * 3) {
    throw ValidationError("preprocess_frame: frame buffer size mismatch");
  }
  if (stats) ++stats->calls;

  // u8 -> float staging so the resampler runs on floats end to end.
  std::vector<float> staged(raw.data.size());
  for (size_t i = 0; i < raw.data.size(); ++i) {
    staged[i] = static_cast<float>(raw.data[i]);
  }

  Frame out;
  out.height = 256;
  out.width = 256;
  out.data.resize(256 * 256 * 3);
  bilinear_resize(staged.data(), raw.height, raw.width, 3, out.data.data(),
                  256, 256);

  const std::array<float, 3> mean = {static_cast<float>(config.mean[0]),
                                     static_cast<float>(config.mean[1]),
                                     static_cast<float>(config.mean[2])};
  const std::array<float, 3> inv_std = {
      static_cast<float>(1.0 / config.stddev[0]),
      static_cast<float>(1.0 / config.stddev[1]),
      static_cast<float>(1.0 / config.stddev[2])};
  for (size_t i = 0; i < out.data.size(); i += 3) {
    for (int ch = 0; ch < 3; ++ch) {
      const float scaled = out.data[i + ch] / 255.0f;
      out.data[i + ch] = (scaled - mean[ch]) * inv_std[ch];
    }
  }
  return out;
}

DirectoryFrameSource::DirectoryFrameSource(std::string directory,
                                           std::string clip_id, double fps)
    : directory_(std::move(directory)),
      clip_id_(std::move(clip_id)),
      fps_(fps) {
  if (fps_ <= 0.0) throw ValidationError("frame source fps must be > 0");
}

std::optional<RawFrame> DirectoryFrameSource::next() {
  char name[32];
  std::snprintf(name, sizeof(name), "%06d.ppm", next_index_);
  const auto path = std::filesystem::path(directory_) / name;
  if (!std::filesystem::exists(path)) return std::nullopt;
  ++next_index_;
  return read_ppm(path);
}

namespace {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

SyntheticFrameSource::SyntheticFrameSource(std::string clip_id,
                                           int frame_count, std::uint64_t seed,
                                           double fps, std::string pattern,
                                           int height, int width)
    : clip_id_(std::move(clip_id)),
      frame_count_(frame_count),
      seed_(seed),
      fps_(fps),
      pattern_(std::move(pattern)),
      height_(height),
      width_(width) {
  if (fps_ <= 0.0) throw ValidationError("frame source fps must be > 0");
  if (height_ < 1 || width_ < 1) {
    throw ValidationError("synthetic frames need height, width >= 1");
  }
  if (pattern_ != "noise" && pattern_ != "gradient" && pattern_ != "constant") {
    throw ValidationError("unknown synthetic pattern '" + pattern_ + "'");
  }
}

RawFrame SyntheticFrameSource::frame_at(int index) const {
  RawFrame frame;
  frame.height = height_;
  frame.width = width_;
  frame.data.resize(static_cast<size_t>(height_) * width_ * 3);
  if (pattern_ == "constant") {
    std::fill(frame.data.begin(), frame.data.end(),
              static_cast<std::uint8_t>(seed_ & 0xFF));
    return frame;
  }
  if (pattern_ == "gradient") {
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        const size_t at = (static_cast<size_t>(y) * width_ + x) * 3;
        frame.data[at + 0] = static_cast<std::uint8_t>((x + index) & 0xFF);
        frame.data[at + 1] = static_cast<std::uint8_t>((y + index) & 0xFF);
        frame.data[at + 2] = static_cast<std::uint8_t>(index & 0xFF);
      }
    }
    return frame;
  }
  // noise: one splitmix64 stream per frame, 8 bytes per draw
  std::uint64_t state = splitmix64(
      seed_ ^ (0xA0761D6478BD642Full * (static_cast<std::uint64_t>(index) + 1)));
  size_t i = 0;
  while (i < frame.data.size()) {
    state = splitmix64(state);
    std::uint64_t v = state;
    for (int b = 0; b < 8 && i < frame.data.size(); ++b, ++i) {
      frame.data[i] = static_cast<std::uint8_t>(v & 0xFF);
      v >>= 8;
    }
  }
  return frame;
}

std::optional<RawFrame> SyntheticFrameSource::next() {
  if (next_index_ >= frame_count_) return std::nullopt;
  return frame_at(next_index_++);
}

VectorFrameSource::VectorFrameSource(std::string clip_id,
                                     std::vector<RawFrame> frames, double fps)
    : clip_id_(std::move(clip_id)), frames_(std::move(frames)), fps_(fps) {}

std::optional<RawFrame> VectorFrameSource::next() {
  if (next_index_ >= frames_.size()) return std::nullopt;
  return frames_[next_index_++];
}

void RollingBuffer::push(std::shared_ptr<const Frame> frame) {
  frames_.push_back(std::move(frame));
  if (frames_.size() > Window::kFrames) {
    frames_.pop_front();
    ++start_frame_index_;
  }
  ++pushed_;
}

Window RollingBuffer::window(const std::string& clip_id, double fps) const {
  if (!full()) {
    throw ValidationError("rolling buffer not full; no window available");
  }
  Window w;
  for (int i = 0; i < Window::kFrames; ++i) w.frames[i] = frames_[i];
  w.start_frame_index = start_frame_index_;
  w.fps = fps;
  w.clip_id = clip_id;
  return w;
}

namespace {

LatencyStats stats_from(std::vector<double> samples_ms) {
  LatencyStats s;
  if (samples_ms.empty()) return s;
  double total = 0.0;
  for (double v : samples_ms) total += v;
  s.mean_ms = total / static_cast<double>(samples_ms.size());
  std::sort(samples_ms.begin(), samples_ms.end());
  // Nearest-rank percentiles.
  auto at = [&](double q) {
    const size_t n = samples_ms.size();
    size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    return samples_ms[std::min(rank - 1, n - 1)];
  };
  s.p50_ms = at(0.50);
  s.p99_ms = at(0.99);
  return s;
}

}  // namespace

StreamResult run_stream(FrameSource& source, Scorer& scorer,
                        const StreamOptions& options) {
  if (options.stride < 1) throw ValidationError("stride must be >= 1");
  if (options.threshold <= 0.0 || options.threshold >= 1.0) {
    throw ValidationError("threshold must be in (0,1)");
  }

  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0)
        .count();
  };

  StreamResult result;
  result.trace.clip_id = source.clip_id();
  result.trace.fps = source.fps();
  result.trace.stride = options.stride;

  RollingBuffer buffer;
  PreprocessStats pp_stats;
  std::vector<double> prep_ms, infer_ms;
  double pending_prep_ms = 0.0;  // preprocessing since the last scored window
  std::int64_t frames_pushed = 0;
  bool alert_armed = true;
  double last_alert_time = -std::numeric_limits<double>::infinity();
  const double fps = source.fps();

  for (;;) {
    auto raw = source.next();
    if (!raw.has_value()) break;

    const auto prep_start = clock::now();
    auto frame = std::make_shared<const Frame>(
        preprocess_frame(*raw, options.preprocess, &pp_stats));
    pending_prep_ms += ms_since(prep_start);
    buffer.push(std::move(frame));
    ++frames_pushed;

    if (frames_pushed < Window::kFrames) continue;
    const std::int64_t start = frames_pushed - Window::kFrames;
    if (start % options.stride != 0) continue;

    Window window = buffer.window(result.trace.clip_id, fps);
    if (options.on_window) options.on_window(window);
    const double t = window.prediction_time_s();

    double score = 0.0;
    const auto infer_start = clock::now();
    try {
      score = scorer.score(window);
    } catch (const std::exception& e) {
      result.complete = false;
      result.error = e.what();
      break;
    }
    infer_ms.push_back(ms_since(infer_start));
    prep_ms.push_back(pending_prep_ms);
    pending_prep_ms = 0.0;

    if (score < 0.0 || score > 1.0) {
      result.complete = false;
      result.error = "scorer returned " + std::to_string(score) +
                     " outside [0,1]";
      break;
    }
    result.trace.entries.push_back({t, score});

    if (options.re_arm && !alert_armed &&
        t >= last_alert_time + options.refractory_s) {
      alert_armed = true;
    }
    if (alert_armed && score >= options.threshold) {
      result.alerts.push_back(
          {result.trace.clip_id, t, score, options.threshold});
      alert_armed = false;
      last_alert_time = t;
    }
  }

  result.latency.windows_measured = static_cast<std::int64_t>(infer_ms.size());
  result.latency.frames_preprocessed = pp_stats.calls;
  for (double v : prep_ms) result.latency.preprocessing_total_ms += v;
  for (double v : infer_ms) result.latency.inference_total_ms += v;
  result.latency.preprocessing = stats_from(std::move(prep_ms));
  result.latency.inference = stats_from(std::move(infer_ms));
  return result;
}

std::vector<Window> batch_extract_windows(const std::vector<RawFrame>& frames,
                                          int stride,
                                          const PreprocessConfig& config,
                                          const std::string& clip_id,
                                          double fps,
                                          PreprocessStats* stats) {
  if (stride < 1) throw ValidationError("stride must be >= 1");
  std::vector<Window> windows;
  if (frames.size() < Window::kFrames) return windows;

  std::vector<std::shared_ptr<const Frame>> preprocessed;
  preprocessed.reserve(frames.size());
  for (const auto& raw : frames) {
    preprocessed.push_back(
        std::make_shared<const Frame>(preprocess_frame(raw, config, stats)));
  }
  const std::int64_t last_start =
      static_cast<std::int64_t>(frames.size()) - Window::kFrames;
  for (std::int64_t start = 0; start <= last_start; start += stride) {
    Window w;
    for (int i = 0; i < Window::kFrames; ++i) {
      w.frames[i] = preprocessed[static_cast<size_t>(start + i)];
    }
    w.start_frame_index = start;
    w.fps = fps;
    w.clip_id = clip_id;
    windows.push_back(std::move(w));
  }
  return windows;
}

void save_latency_report(const LatencyReport& report,
                         const std::filesystem::path& path) {
  jsonl::json obj;
  obj["windows_measured"] = report.windows_measured;
  obj["frames_preprocessed"] = report.frames_preprocessed;
  obj["preprocessing"] = {{"mean_ms", report.preprocessing.mean_ms},
                          {"p50_ms", report.preprocessing.p50_ms},
                          {"p99_ms", report.preprocessing.p99_ms},
                          {"total_ms", report.preprocessing_total_ms}};
  obj["inference"] = {{"mean_ms", report.inference.mean_ms},
                      {"p50_ms", report.inference.p50_ms},
                      {"p99_ms", report.inference.p99_ms},
                      {"total_ms", report.inference_total_ms}};
  obj["total_ms"] = report.total_ms();
  std::ofstream out(path);
  if (!out.good()) throw ValidationError("cannot write " + path.string());
  out << obj.dump(2) << "\n";
}

void save_alerts(const std::vector<AlertEvent>& alerts,
                 const std::filesystem::path& path) {
  jsonl::Writer w(path);
  for (const auto& a : alerts) {
    w.write({{"clip_id", a.clip_id},
             {"alert_time_s", a.alert_time_s},
             {"score", a.score},
             {"threshold", a.threshold}});
  }
}

}  // namespace crashbench
