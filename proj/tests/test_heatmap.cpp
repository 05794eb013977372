#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "crashbench/heatmap.hpp"
#include "crashbench/imageops.hpp"
#include "testutil.hpp"

using namespace crashbench;

namespace {

AttentionStack constant_stack(int layers, float value, int t_tok = 8) {
  AttentionStack stack;
  stack.t_tok = t_tok;
  for (int l = 0; l < layers; ++l) {
    stack.layer_ids.push_back(12 + l);
    stack.layers.emplace_back(static_cast<size_t>(t_tok) * 16 * 16, value);
  }
  return stack;
}

}  // namespace

TEST_CASE("temporal weights sum to 1 with constant consecutive ratio") {
  const auto w = temporal_weights(16, 2.0);
  REQUIRE(w.size() == 16);
  double sum = 0.0;
  for (double v : w) sum += v;
  CHECK(std::abs(sum - 1.0) < 1e-12);
  const double ratio = std::exp(0.5);
  for (size_t t = 1; t < w.size(); ++t) {
    CHECK(std::abs(w[t] / w[t - 1] - ratio) < 1e-12);
    CHECK(w[t] > w[t - 1]);
  }
  // w15 / w7 = e^4
  CHECK(w[15] / w[7] == doctest::Approx(std::exp(4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(temporal_weights(16, 0.0), ValidationError);
  CHECK_THROWS_AS(temporal_weights(0, 2.0), ValidationError);
}

TEST_CASE("aggregate_raw: uniform attention gives a constant stack") {
  const int t_tok = 2;
  const int tokens = t_tok * 256;
  RawAttention raw;
  raw.t_tok = t_tok;
  RawAttention::Layer layer;
  layer.layer_id = 12;
  layer.heads = 2;
  layer.tokens = tokens;
  layer.weights.assign(static_cast<size_t>(2) * tokens * tokens,
                       1.0f / tokens);
  raw.layers.push_back(layer);

  const AttentionStack stack = aggregate_raw(raw);
  REQUIRE(stack.layers.size() == 1);
  for (float v : stack.layers[0]) {
    CHECK(v == doctest::Approx(1.0 / tokens).epsilon(1e-6));
  }
}

TEST_CASE("aggregate_raw: delta attention lands on the attended token") {
  const int t_tok = 1;
  const int tokens = 256;
  RawAttention raw;
  raw.t_tok = t_tok;
  RawAttention::Layer layer;
  layer.layer_id = 15;
  layer.heads = 1;
  layer.tokens = tokens;
  layer.weights.assign(static_cast<size_t>(tokens) * tokens, 0.0f);
  // every query attends 100% to key token (r=4, c=4) -> index 4*16+4
  const int target = 4 * 16 + 4;
  for (int q = 0; q < tokens; ++q) {
    layer.weights[static_cast<size_t>(q) * tokens + target] = 1.0f;
  }
  raw.layers.push_back(layer);
  const AttentionStack stack = aggregate_raw(raw);
  for (int k = 0; k < tokens; ++k) {
    if (k == target) {
      CHECK(stack.layers[0][k] == doctest::Approx(1.0));
    } else {
      CHECK(stack.layers[0][k] == 0.0f);
    }
  }
}

TEST_CASE("aggregate_raw rejects non-stochastic rows and bad shapes") {
  RawAttention raw;
  raw.t_tok = 1;
  RawAttention::Layer layer;
  layer.layer_id = 12;
  layer.heads = 1;
  layer.tokens = 256;
  layer.weights.assign(256 * 256, 0.0f);  // rows sum to 0
  raw.layers.push_back(layer);
  CHECK_THROWS_AS(aggregate_raw(raw), ValidationError);

  raw.layers[0].tokens = 300;  // inconsistent with 1x16x16 layout
  raw.layers[0].weights.assign(300 * 300, 1.0f / 300);
  CHECK_THROWS_AS(aggregate_raw(raw), ValidationError);
}

TEST_CASE("constant stack composes to the all-zero heatmap") {
  const Heatmap h = compose_heatmap(constant_stack(3, 0.25f));
  for (float v : h.values) CHECK(v == 0.0f);
  CHECK(h.peak_row == 0);
  CHECK(h.peak_col == 0);
}

TEST_CASE("single hot cell peaks on the pixel block of patch (4,4)") {
  AttentionStack stack = constant_stack(1, 0.0f);
  // last temporal position, spatial cell (4,4)
  stack.layers[0][7 * 256 + 4 * 16 + 4] = 1.0f;
  const Heatmap h = compose_heatmap(stack);
  // Patch center (4.5/16) maps to pixel coordinate 72 on the boundary of
  // pixels 71 and 72; bilinear upsampling gives a 4-way tie on the 2x2 block
  // {71,72}^2 and the row-major tie-break selects (71,71).
  CHECK(h.peak_row == 71);
  CHECK(h.peak_col == 71);
  CHECK(h.at(71, 71) == 1.0f);
  CHECK(h.at(71, 72) == 1.0f);
  CHECK(h.at(72, 71) == 1.0f);
  CHECK(h.at(72, 72) == 1.0f);
  CHECK(h.at(0, 0) == 0.0f);
}

TEST_CASE("two identical layers compose to the same heatmap as one") {
  AttentionStack one = constant_stack(1, 0.0f);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  for (auto& v : one.layers[0]) v = unit(rng);
  AttentionStack two = one;
  two.layer_ids.push_back(13);
  two.layers.push_back(one.layers[0]);

  const Heatmap h1 = compose_heatmap(one);
  const Heatmap h2 = compose_heatmap(two);
  CHECK(h1.values == h2.values);
  CHECK(h1.peak_row == h2.peak_row);
  CHECK(h1.peak_col == h2.peak_col);
}

TEST_CASE("heatmap is invariant under positive rescaling of the stack") {
  AttentionStack stack = constant_stack(2, 0.0f);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  for (auto& layer : stack.layers) {
    for (auto& v : layer) v = unit(rng);
  }
  AttentionStack scaled = stack;
  for (auto& layer : scaled.layers) {
    for (auto& v : layer) v *= 37.5f;
  }
  const Heatmap a = compose_heatmap(stack);
  const Heatmap b = compose_heatmap(scaled);
  CHECK(a.peak_row == b.peak_row);
  CHECK(a.peak_col == b.peak_col);
  for (size_t i = 0; i < a.values.size(); ++i) {
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-5));
  }
}

TEST_CASE("peak is invariant under adding a constant to the stack") {
  AttentionStack stack = constant_stack(1, 0.0f);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> unit(0.0f, 0.5f);
  for (auto& v : stack.layers[0]) v = unit(rng);
  const Heatmap a = compose_heatmap(stack);
  for (auto& v : stack.layers[0]) v += 0.25f;
  const Heatmap b = compose_heatmap(stack);
  CHECK(a.peak_row == b.peak_row);
  CHECK(a.peak_col == b.peak_col);
}

TEST_CASE("pointing game hit rules") {
  Heatmap h;
  h.values.assign(256 * 256, 0.0f);
  h.peak_row = 100;
  h.peak_col = 100;
  CHECK(pointing_game(h, {{0, 90, 90, 110, 110}}));
  h.peak_row = 0;
  h.peak_col = 0;
  CHECK(!pointing_game(h, {{0, 90, 90, 110, 110}}));
  // edges are inclusive
  h.peak_row = 110;
  h.peak_col = 90;
  CHECK(pointing_game(h, {{0, 90, 90, 110, 110}}));
  CHECK_THROWS_WITH_AS(pointing_game(h, {}), doctest::Contains("PGA"),
                       ValidationError);
}

TEST_CASE("uniform heatmap peaks at the origin by the tie rule") {
  AttentionStack stack = constant_stack(1, 0.5f);
  const Heatmap h = compose_heatmap(stack);
  CHECK(h.peak_row == 0);
  CHECK(h.peak_col == 0);
  CHECK(pointing_game(h, {{0, 0, 0, 10, 10}}));
  CHECK(!pointing_game(h, {{0, 90, 90, 110, 110}}));
}

TEST_CASE("pointing game is invariant under monotone pixel transforms") {
  AttentionStack stack = constant_stack(1, 0.0f);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  for (auto& v : stack.layers[0]) v = unit(rng);
  Heatmap h = compose_heatmap(stack);
  const std::vector<GtBox> boxes = {{0, 60, 60, 200, 200}};
  const bool before = pointing_game(h, boxes);
  for (auto& v : h.values) v = std::sqrt(v) * 0.5f + 0.1f;
  // peak location unchanged by strictly increasing transform
  const bool after = pointing_game(h, boxes);
  CHECK(before == after);
}

TEST_CASE("pga_accuracy: all peaks inside boxes gives 100%") {
  std::vector<PgaSample> samples;
  for (int i = 0; i < 4; ++i) {
    PgaSample s;
    s.clip_id = "c" + std::to_string(i);
    s.heatmap.values.assign(256 * 256, 0.0f);
    s.heatmap.peak_row = 128;
    s.heatmap.peak_col = 128;
    s.boxes = {{0, 100, 100, 150, 150}};
    samples.push_back(std::move(s));
  }
  const PgaResult r = pga_accuracy(samples);
  CHECK(r.pga == 1.0);
  CHECK(r.hits == 4);
  CHECK(r.delta_vs_random ==
        doctest::Approx(1.0 - r.random_baseline).epsilon(1e-12));
}

TEST_CASE("pga fixture: stored peaks give 72.1% on 1000 clips") {
  // 721 of 1000 synthetic clips have their stored peak inside the box.
  std::vector<PgaSample> samples;
  for (int i = 0; i < 1000; ++i) {
    PgaSample s;
    s.clip_id = "fx" + std::to_string(i);
    s.heatmap.values.assign(256 * 256, 0.0f);
    if (i < 721) {
      s.heatmap.peak_row = 100 + i % 20;
      s.heatmap.peak_col = 100 + i % 20;
    } else {
      s.heatmap.peak_row = 10;
      s.heatmap.peak_col = 10;
    }
    s.boxes = {{0, 90, 90, 130, 130}};
    samples.push_back(std::move(s));
  }
  const PgaResult r = pga_accuracy(samples);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.1f", r.pga * 100.0);
  CHECK(std::string(buf) == "72.1");
}

TEST_CASE("random baseline on the coverage fixture is exactly 11.5%") {
  std::ifstream in(testutil::fixtures_dir() / "pga_boxes.json");
  REQUIRE(in.good());
  nlohmann::json fixture = nlohmann::json::parse(in);
  std::vector<std::vector<GtBox>> boxes;
  for (const auto& clip : fixture.at("clips")) {
    std::vector<GtBox> clip_boxes;
    for (const auto& b : clip.at("boxes")) {
      clip_boxes.push_back({b.at(0).get<int>(), b.at(1).get<double>(),
                            b.at(2).get<double>(), b.at(3).get<double>(),
                            b.at(4).get<double>()});
    }
    boxes.push_back(std::move(clip_boxes));
  }
  REQUIRE(boxes.size() == 25);
  CHECK(pga_random_baseline(boxes) == doctest::Approx(0.115).epsilon(1e-12));
}

TEST_CASE("baseline handles overlapping boxes via the union") {
  // Two identical boxes must not double-count.
  std::vector<std::vector<GtBox>> boxes = {
      {{0, 0, 0, 128, 128}, {0, 0, 0, 128, 128}}};
  CHECK(pga_random_baseline(boxes) ==
        doctest::Approx(128.0 * 128.0 / 65536.0).epsilon(1e-12));
  // Two disjoint boxes add up.
  boxes = {{{0, 0, 0, 64, 64}, {0, 128, 128, 192, 192}}};
  CHECK(pga_random_baseline(boxes) ==
        doctest::Approx(2.0 * 64.0 * 64.0 / 65536.0).epsilon(1e-12));
}

TEST_CASE("attention file round-trip") {
  testutil::TempDir tmp("attn");
  AttentionStack stack = constant_stack(3, 0.0f);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  for (auto& layer : stack.layers) {
    for (auto& v : layer) v = unit(rng);
  }
  write_attention_file(stack, tmp.file("w.attn"));
  const AttentionStack back = read_attention_file(tmp.file("w.attn"));
  CHECK(back.t_tok == stack.t_tok);
  CHECK(back.layer_ids == stack.layer_ids);
  REQUIRE(back.layers.size() == stack.layers.size());
  for (size_t l = 0; l < stack.layers.size(); ++l) {
    CHECK(back.layers[l] == stack.layers[l]);
  }

  // bad magic is rejected
  std::ofstream bad(tmp.file("bad.attn"), std::ios::binary);
  bad << "NOPE";
  bad.close();
  CHECK_THROWS_WITH_AS(read_attention_file(tmp.file("bad.attn")),
                       doctest::Contains("magic"), ValidationError);
}

TEST_CASE("heatmap pgm output rounds to 8 bits") {
  testutil::TempDir tmp("pgm_out");
  Heatmap h;
  h.values.assign(256 * 256, 0.0f);
  h.values[0] = 1.0f;
  h.values[1] = 0.5f;
  h.peak_row = 0;
  h.peak_col = 0;
  write_heatmap_pgm(h, tmp.file("h.pgm"));
  int hh = 0, ww = 0;
  const auto bytes = read_pgm(tmp.file("h.pgm"), &hh, &ww);
  CHECK(hh == 256);
  CHECK(ww == 256);
  CHECK(bytes[0] == 255);
  CHECK(bytes[1] == 128);  // round(0.5 * 255) = 128
  CHECK(bytes[2] == 0);
}
