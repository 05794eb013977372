#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "crashbench/imageops.hpp"
#include "crashbench/scorer.hpp"
#include "crashbench/streaming.hpp"
#include "testutil.hpp"

using namespace crashbench;

namespace {

RawFrame constant_frame(int h, int w, std::uint8_t value) {
  RawFrame f;
  f.height = h;
  f.width = w;
  f.data.assign(static_cast<size_t>(h) * w * 3, value);
  return f;
}

std::vector<RawFrame> synthetic_frames(int count, std::uint64_t seed,
                                       int h = 256, int w = 256) {
  SyntheticFrameSource src("syn", count, seed, 8.0, "noise", h, w);
  std::vector<RawFrame> frames;
  for (int i = 0; i < count; ++i) frames.push_back(src.frame_at(i));
  return frames;
}

bool frames_identical(const Frame& a, const Frame& b) {
  return a.height == b.height && a.width == b.width &&
         a.data.size() == b.data.size() &&
         std::memcmp(a.data.data(), b.data.data(),
                     a.data.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("same-size preprocess with identity normalization is raw/255") {
  RawFrame raw = constant_frame(256, 256, 0);
  std::mt19937_64 rng(1);
  for (auto& b : raw.data) b = static_cast<std::uint8_t>(rng());
  const Frame out = preprocess_frame(raw, {});
  for (size_t i = 0; i < raw.data.size(); ++i) {
    CHECK(out.data[i] == static_cast<float>(raw.data[i]) / 255.0f);
  }
}

TEST_CASE("resize of a constant frame is constant, normalization applied") {
  const RawFrame raw = constant_frame(512, 512, 255);
  PreprocessConfig config;
  config.mean = {0.5, 0.25, 0.0};
  config.stddev = {2.0, 1.0, 0.5};
  const Frame out = preprocess_frame(raw, config);
  for (size_t i = 0; i < out.data.size(); i += 3) {
    CHECK(out.data[i + 0] == ((1.0f - 0.5f) / 2.0f));
    CHECK(out.data[i + 1] == ((1.0f - 0.25f) / 1.0f));
    CHECK(out.data[i + 2] == ((1.0f - 0.0f) / 0.5f));
  }
}

TEST_CASE("bilinear checkerboard midpoint values") {
  // 2x2 checkerboard {0,255}: at the exact source midpoint the bilinear
  // surface is 127.5. A 255-wide output hits the midpoint exactly at pixel
  // 127 under half-pixel centers: (127.5)*(2/255) - 0.5 = 0.5.
  std::vector<float> src = {0.0f, 255.0f, 255.0f, 0.0f};
  std::vector<float> odd(255 * 255);
  bilinear_resize(src.data(), 2, 2, 1, odd.data(), 255, 255);
  CHECK(odd[127 * 255 + 127] == 127.5f);

  // The 256-wide output straddles the midpoint; both center pixels sit a
  // half source-step away, so they agree and sit near 127.5.
  std::vector<float> even(256 * 256);
  bilinear_resize(src.data(), 2, 2, 1, even.data(), 256, 256);
  CHECK(even[127 * 256 + 127] == even[128 * 256 + 128]);
  CHECK(std::abs(even[127 * 256 + 127] - 127.5f) < 0.2f);
  // Normalized: center of the upsampled checkerboard is 0.5 within 1e-3.
  CHECK(std::abs(even[127 * 256 + 127] / 255.0f - 0.5f) < 1e-3f);
}

TEST_CASE("zero-sized frame is rejected") {
  CHECK_THROWS_AS(preprocess_frame(RawFrame{}, {}), ValidationError);
}

TEST_CASE("72-frame clip at stride 1 gives 57 windows at the right times") {
  SyntheticFrameSource source("clip72", 72, 42);
  RampScorer scorer(6.0, 2.0);
  StreamOptions opts;
  const StreamResult result = run_stream(source, scorer, opts);
  CHECK(result.complete);
  REQUIRE(result.trace.entries.size() == 57);
  CHECK(result.trace.entries.front().t == 1.875);
  CHECK(result.trace.entries.back().t == 8.875);
  // Strictly increasing by stride/fps.
  for (size_t i = 1; i < result.trace.entries.size(); ++i) {
    CHECK(result.trace.entries[i].t - result.trace.entries[i - 1].t ==
          doctest::Approx(0.125).epsilon(1e-12));
  }
}

TEST_CASE("ramp crossing alerts at 5.5 s with 0.5 s lead") {
  SyntheticFrameSource source("ramp", 72, 1);
  RampScorer scorer(6.0, 2.0);
  StreamOptions opts;
  opts.threshold = 0.75;
  const StreamResult result = run_stream(source, scorer, opts);
  REQUIRE(result.alerts.size() == 1);
  CHECK(result.alerts[0].alert_time_s == 5.5);
  CHECK(result.alerts[0].score == 0.75);
  // Alert minimality: nothing earlier reaches the threshold.
  for (const auto& e : result.trace.entries) {
    if (e.t < 5.5) CHECK(e.score < 0.75);
  }
}

TEST_CASE("15-frame clip never fills the buffer") {
  SyntheticFrameSource source("short", 15, 9);
  ConstantScorer scorer(0.9);
  const StreamResult result = run_stream(source, scorer, {});
  CHECK(result.complete);
  CHECK(result.trace.entries.empty());
  CHECK(result.alerts.empty());
  CHECK(result.latency.windows_measured == 0);
  CHECK(result.latency.frames_preprocessed == 15);
}

TEST_CASE("batch window counts") {
  CHECK(batch_extract_windows(synthetic_frames(16, 1), 1, {}).size() == 1);
  CHECK(batch_extract_windows(synthetic_frames(72, 1), 1, {}).size() == 57);
  const auto strided = batch_extract_windows(synthetic_frames(72, 1), 8, {});
  REQUIRE(strided.size() == 8);
  for (size_t i = 0; i < strided.size(); ++i) {
    CHECK(strided[i].start_frame_index == static_cast<std::int64_t>(8 * i));
  }
  CHECK(batch_extract_windows(synthetic_frames(15, 1), 1, {}).empty());
}

TEST_CASE("streaming windows are bit-identical to batch extraction") {
  for (const int stride : {1, 2, 8}) {
    const int frames = 72;
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(stride);
    const auto raws = synthetic_frames(frames, seed);

    std::vector<Window> streamed;
    VectorFrameSource source("eq", raws);
    ConstantScorer scorer(0.1);
    StreamOptions opts;
    opts.stride = stride;
    opts.on_window = [&](const Window& w) { streamed.push_back(w); };
    const StreamResult result = run_stream(source, scorer, opts);
    CHECK(result.complete);

    const auto batch = batch_extract_windows(raws, stride, {}, "eq");
    REQUIRE(streamed.size() == batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      CHECK(streamed[i].start_frame_index == batch[i].start_frame_index);
      for (int f = 0; f < Window::kFrames; ++f) {
        CHECK(frames_identical(*streamed[i].frames[f], *batch[i].frames[f]));
      }
    }
  }
}

TEST_CASE("preprocessing cost is one call per frame, not per window") {
  SyntheticFrameSource source("o1", 120, 5);
  ConstantScorer scorer(0.2);
  StreamOptions opts;
  opts.stride = 1;
  const StreamResult result = run_stream(source, scorer, opts);
  CHECK(result.latency.frames_preprocessed == 120);
  CHECK(result.latency.windows_measured == 105);
  // 105 windows x 16 frames would be 1680 calls without the rolling buffer.
}

TEST_CASE("latency totals add up") {
  SyntheticFrameSource source("lat", 40, 3);
  ConstantScorer scorer(0.2);
  const StreamResult result = run_stream(source, scorer, {});
  CHECK(result.latency.total_ms() ==
        result.latency.preprocessing_total_ms +
            result.latency.inference_total_ms);
  CHECK(result.latency.preprocessing.mean_ms >= 0.0);
  CHECK(result.latency.preprocessing.p99_ms >=
        result.latency.preprocessing.p50_ms);
}

TEST_CASE("scorer failure yields a partial trace flagged incomplete") {
  ScoreTrace partial;  // replay trace only covers the first two windows
  partial.clip_id = "fail";
  partial.entries = {{1.875, 0.1}, {2.0, 0.2}};
  ReplayScorer scorer(partial);
  SyntheticFrameSource source("fail", 40, 2);
  const StreamResult result = run_stream(source, scorer, {});
  CHECK(!result.complete);
  CHECK(result.trace.entries.size() == 2);
  CHECK(!result.error.empty());
}

TEST_CASE("re-arm emits again after the refractory period") {
  SyntheticFrameSource source("rearm", 72, 4);
  ConstantScorer scorer(0.9);
  StreamOptions latched;
  latched.threshold = 0.75;
  CHECK(run_stream(source, scorer, latched).alerts.size() == 1);

  SyntheticFrameSource source2("rearm2", 72, 4);
  StreamOptions rearm;
  rearm.threshold = 0.75;
  rearm.re_arm = true;
  rearm.refractory_s = 2.0;
  const StreamResult result = run_stream(source2, scorer, rearm);
  // Alerts at 1.875, then every 2 s of prediction time: 3.875, 5.875, 7.875.
  REQUIRE(result.alerts.size() == 4);
  CHECK(result.alerts[0].alert_time_s == 1.875);
  CHECK(result.alerts[1].alert_time_s == 3.875);
}

TEST_CASE("rolling buffer evicts the oldest frame") {
  RollingBuffer buffer;
  auto frame_with = [](float v) {
    Frame f;
    f.height = 1;
    f.width = 1;
    f.data = {v, v, v};
    return std::make_shared<const Frame>(f);
  };
  for (int i = 0; i < 20; ++i) buffer.push(frame_with(static_cast<float>(i)));
  CHECK(buffer.full());
  CHECK(buffer.start_frame_index() == 4);
  const Window w = buffer.window("rb", 8.0);
  CHECK(w.frames[0]->data[0] == 4.0f);
  CHECK(w.frames[15]->data[0] == 19.0f);
}

TEST_CASE("ppm round-trip preserves bytes") {
  testutil::TempDir tmp("ppm");
  const auto frames = synthetic_frames(1, 77, 32, 48);
  write_ppm(frames[0], tmp.file("f.ppm"));
  const RawFrame back = read_ppm(tmp.file("f.ppm"));
  CHECK(back.height == 32);
  CHECK(back.width == 48);
  CHECK(back.data == frames[0].data);
}

TEST_CASE("directory source reads %06d.ppm in order") {
  testutil::TempDir tmp("dirsrc");
  const auto frames = synthetic_frames(3, 9, 16, 16);
  write_ppm(frames[0], tmp.file("000000.ppm"));
  write_ppm(frames[1], tmp.file("000001.ppm"));
  write_ppm(frames[2], tmp.file("000002.ppm"));
  DirectoryFrameSource source(tmp.path().string(), "dir");
  int count = 0;
  while (auto f = source.next()) {
    CHECK(f->data == frames[count].data);
    ++count;
  }
  CHECK(count == 3);
}
