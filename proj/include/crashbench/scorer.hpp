#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "crashbench/core.hpp"
#include "crashbench/trace.hpp"

namespace crashbench {

/// A 16-frame block of preprocessed 256x256x3 frames. Frames are shared with
/// the rolling buffer / batch extractor; windows never copy pixel data.
struct Window {
  static constexpr int kFrames = 16;
  std::array<std::shared_ptr<const Frame>, kFrames> frames;
  std::int64_t start_frame_index = 0;
  double fps = 8.0;
  std::string clip_id;

  /// Timestamp of the last frame: the moment this window's score is known.
  double prediction_time_s() const {
    return static_cast<double>(start_frame_index + kFrames - 1) / fps;
  }
};

/// Risk scorer: maps a window to a collision probability. One instance is
/// driven by one stream at a time; construction is cheap, so parallel
/// evaluation creates an instance per worker.
class Scorer {
 public:
  virtual ~Scorer() = default;
  /// Deterministic probability in [0,1] for this instance and window.
  virtual double score(const Window& window) = 0;
  virtual std::string name() const = 0;
};

class ConstantScorer : public Scorer {
 public:
  explicit ConstantScorer(double value);
  double score(const Window& window) override;
  std::string name() const override { return "constant"; }

 private:
  double value_;
};

/// 0 before event_time - rise, 1 at event_time, linear in between, evaluated
/// at the window's prediction time.
class RampScorer : public Scorer {
 public:
  RampScorer(double event_time_s, double rise_duration_s);
  double score(const Window& window) override;
  std::string name() const override { return "ramp"; }

  static double ramp_value(double t, double event_time_s,
                           double rise_duration_s);

 private:
  double event_time_s_;
  double rise_duration_s_;
};

/// Ramp plus clipped Gaussian noise. Deterministic: the noise is a pure
/// function of (seed, start_frame_index), so rescoring a window reproduces
/// the same value bit for bit.
class NoisyRampScorer : public Scorer {
 public:
  NoisyRampScorer(std::uint64_t seed, double sigma, double event_time_s = 6.0,
                  double rise_duration_s = 2.0);
  double score(const Window& window) override;
  std::string name() const override { return "noisyramp"; }

 private:
  std::uint64_t seed_;
  double sigma_;
  double event_time_s_;
  double rise_duration_s_;
};

/// Replays a stored trace. The queried prediction time must match a trace
/// entry within 1e-9 s; a miss reports the nearest available time.
class ReplayScorer : public Scorer {
 public:
  explicit ReplayScorer(ScoreTrace trace);
  static ReplayScorer from_file(const std::string& path);
  double score(const Window& window) override;
  std::string name() const override { return "replay"; }

 private:
  ScoreTrace trace_;
};

/// Drives an external scorer over a line-delimited JSON protocol on the
/// child's stdin/stdout.
///
/// Request:  {"id":u64,"start_frame":u64,"shape":[16,256,256,3],
///            "data":"<base64 little-endian f32>"}
///           When send_pixels is false, "data" is omitted and "clip_id" is
///           sent instead (replayer backends).
/// Reply:    {"id":u64,"score":float} with score in [0,1]; ids must match;
///           out-of-order replies are permitted.
/// Backend exit or a malformed line aborts the stream with a BackendError
/// carrying the diagnostic.
class SubprocessScorer : public Scorer {
 public:
  explicit SubprocessScorer(std::string command, bool send_pixels = true);
  ~SubprocessScorer() override;
  SubprocessScorer(const SubprocessScorer&) = delete;
  SubprocessScorer& operator=(const SubprocessScorer&) = delete;

  double score(const Window& window) override;
  std::string name() const override { return "subprocess"; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Parses a scorer spec string:
///   constant:<p> | ramp:event=<s>,rise=<s> |
///   noisyramp:seed=<n>,sigma=<s>[,event=<s>,rise=<s>] |
///   replay:<trace file> | subprocess:<command>
std::unique_ptr<Scorer> make_scorer(const std::string& spec,
                                    bool subprocess_send_pixels = true);

namespace detail {
std::string base64_encode(const std::uint8_t* data, size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);
}  // namespace detail

}  // namespace crashbench
