#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "crashbench/vlmprob.hpp"
#include "testutil.hpp"

using namespace crashbench;

TEST_CASE("answer token probability on the worked examples") {
  CHECK(answer_token_probability({1.5, 1.5}) == 0.5);
  CHECK(answer_token_probability({1.0, 0.0}) ==
        doctest::Approx(0.7310585786300049).epsilon(1e-15));
  // extreme gap: no overflow, clean saturation
  const double tiny = answer_token_probability({-1000.0, 0.0});
  CHECK(tiny >= 0.0);
  CHECK(tiny < 1e-300);
  CHECK(answer_token_probability({0.0, -1000.0}) == 1.0);
  CHECK_THROWS_AS(
      answer_token_probability({std::numeric_limits<double>::infinity(), 0.0}),
      ValidationError);
  CHECK_THROWS_AS(
      answer_token_probability({0.0, std::nan("")}), ValidationError);
}

TEST_CASE("complement identity p(A,B) + p(B,A) = 1 within 1 ulp") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> logit(-40.0, 40.0);
  const double one_ulp = std::nextafter(1.0, 2.0) - 1.0;
  for (int i = 0; i < 100000; ++i) {
    const double a = logit(rng), b = logit(rng);
    const double p = answer_token_probability({a, b});
    const double q = answer_token_probability({b, a});
    CHECK(std::abs(p + q - 1.0) <= one_ulp);
  }
}

TEST_CASE("shift invariance of the softmax") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> logit(-20.0, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = logit(rng), b = logit(rng);
    const double p = answer_token_probability({a, b});
    // shifting by an exactly-representable constant keeps the difference
    const double shift = 128.0;
    const double q = answer_token_probability({a + shift, b + shift});
    CHECK(std::abs(p - q) <= 1e-15);
  }
}

TEST_CASE("sigma form agrees with naive softmax on safe inputs") {
  // Grid-quantized logits keep the difference exactly representable.
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> grid(-30 * 1024, 30 * 1024);
  int max_ulps = 0;
  for (int i = 0; i < 100000; ++i) {
    const double a = grid(rng) * 0x1.0p-10;
    const double b = grid(rng) * 0x1.0p-10;
    const double stable = answer_token_probability({a, b});
    const double ea = std::exp(a), eb = std::exp(b);
    const double naive = ea / (ea + eb);
    // count ulps between the two routes
    double lo = std::min(stable, naive), hi = std::max(stable, naive);
    int ulps = 0;
    while (lo < hi && ulps <= 4) {
      lo = std::nextafter(lo, hi);
      ++ulps;
    }
    max_ulps = std::max(max_ulps, ulps);
  }
  CHECK(max_ulps <= 1);
}

TEST_CASE("temperature ensemble is the exact mean") {
  CHECK(temperature_ensemble({0.2, 0.3, 0.4}) == 0.3);
  CHECK(temperature_ensemble({1.0, 1.0, 1.0}) == 1.0);
  CHECK(temperature_ensemble({0.25, 0.5, 0.75}) == 0.5);
  // permutation symmetry
  CHECK(temperature_ensemble({0.4, 0.2, 0.3}) ==
        temperature_ensemble({0.2, 0.3, 0.4}));
  CHECK_THROWS_AS(temperature_ensemble({1.2, 0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(temperature_ensemble({-0.1, 0.5, 0.5}), ValidationError);
}

TEST_CASE("ensemble output is bounded by its inputs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const TemperatureTriple t = {unit(rng), unit(rng), unit(rng)};
    const double p = temperature_ensemble(t);
    CHECK(p >= std::min({t.p_00, t.p_03, t.p_07}));
    CHECK(p <= std::max({t.p_00, t.p_03, t.p_07}));
  }
}

TEST_CASE("compression diagnostic on the reference pattern") {
  // collision peaks ~= 0.53 with negatives < 0.003
  std::vector<double> pos(40, 0.53);
  std::vector<double> neg(60, 0.002);
  const CompressionDiagnostic d = compression_diagnostic(pos, neg);
  CHECK(d.positive_peak_mean == doctest::Approx(0.53).epsilon(1e-12));
  CHECK(d.negative_mean == doctest::Approx(0.002).epsilon(1e-12));
  CHECK(d.frac_negatives_below_0003 == 1.0);
  CHECK(d.frac_positive_peaks_below_06 == 1.0);
  CHECK(d.dynamic_range == doctest::Approx(0.528).epsilon(1e-12));
}

TEST_CASE("compression diagnostic edge patterns") {
  // a perfectly calibrated scorer has dynamic range 1
  const CompressionDiagnostic ideal =
      compression_diagnostic({1.0, 1.0}, {0.0, 0.0});
  CHECK(ideal.dynamic_range == 1.0);

  // pos {0.4, 0.6}: mean 0.5, strictly-below-0.6 fraction is 0.5
  const CompressionDiagnostic half = compression_diagnostic({0.4, 0.6}, {0.1});
  CHECK(half.positive_peak_mean == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(half.frac_positive_peaks_below_06 == 0.5);

  CHECK_THROWS_AS(compression_diagnostic({}, {0.1}), ValidationError);
  CHECK_THROWS_AS(compression_diagnostic({0.5}, {}), ValidationError);
}

TEST_CASE("logits file converts to metric-ready traces") {
  testutil::TempDir tmp("vlm");
  std::ofstream out(tmp.file("logits.jsonl"));
  out << R"({"clip_id":"a","ell_a":1.0,"ell_b":0.0})" << "\n";
  out << R"({"clip_id":"b","p":[0.2,0.3,0.4]})" << "\n";
  out << R"({"clip_id":"c","ell_a":0.0,"ell_b":0.0,"t":3.5})" << "\n";
  out.close();

  const auto traces = scores_from_logits_file(tmp.file("logits.jsonl"), 8.0);
  REQUIRE(traces.size() == 3);
  CHECK(traces[0].clip_id == "a");
  REQUIRE(traces[0].entries.size() == 1);
  CHECK(traces[0].entries[0].t == 1.875);
  CHECK(traces[0].entries[0].score ==
        doctest::Approx(0.7310585786300049).epsilon(1e-15));
  CHECK(traces[1].entries[0].score == 0.3);
  CHECK(traces[2].entries[0].t == 3.5);
  CHECK(traces[2].entries[0].score == 0.5);
}

TEST_CASE("malformed logits lines are rejected with location") {
  testutil::TempDir tmp("vlm_bad");
  std::ofstream out(tmp.file("logits.jsonl"));
  out << R"({"clip_id":"a","ell_a":1.0,"ell_b":0.0})" << "\n";
  out << R"({"clip_id":"b"})" << "\n";
  out.close();
  CHECK_THROWS_WITH_AS(scores_from_logits_file(tmp.file("logits.jsonl")),
                       doctest::Contains(":2"), ValidationError);
}
