// Reference scoring backend for the line-delimited subprocess protocol.
// Reads one JSON request per line on stdin, writes one reply per line on
// stdout. Used by the test suite and as a template for real backends.
//
//   --constant <p>      always reply p
//   --ramp <event> <rise> [--fps <fps>]
//                       ramp score from the request's start_frame
//   --hash              full-precision score derived from start_frame
//                       (exercises 17-significant-digit round-trips)
//   --from-data         mean of the decoded f32 payload, clamped to [0,1]
//   --noise-replies     emit an unrelated reply before each real one
//                       (exercises out-of-order tolerance)
//   --die-after <n>     exit abruptly after n replies

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>

#include <json.hpp>

#include "crashbench/scorer.hpp"

using nlohmann::json;

namespace {

double hash_score(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  x ^= x >> 31;
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace

int main(int argc, char** argv) {
  std::string mode = "constant";
  double constant = 0.5;
  double event_time = 6.0, rise = 2.0, fps = 8.0;
  bool noise_replies = false;
  long die_after = -1;

  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--constant" && i + 1 < argc) {
      mode = "constant";
      constant = std::atof(argv[++i]);
    } else if (arg == "--ramp" && i + 2 < argc) {
      mode = "ramp";
      event_time = std::atof(argv[++i]);
      rise = std::atof(argv[++i]);
    } else if (arg == "--fps" && i + 1 < argc) {
      fps = std::atof(argv[++i]);
    } else if (arg == "--hash") {
      mode = "hash";
    } else if (arg == "--from-data") {
      mode = "from-data";
    } else if (arg == "--noise-replies") {
      noise_replies = true;
    } else if (arg == "--die-after" && i + 1 < argc) {
      die_after = std::atol(argv[++i]);
    } else {
      std::cerr << "scorer_backend_stub: unknown argument " << arg << "\n";
      return 2;
    }
  }

  std::string line;
  long replies = 0;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    json req = json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.contains("id")) {
      std::cerr << "scorer_backend_stub: malformed request\n";
      return 3;
    }
    const std::uint64_t id = req.at("id").get<std::uint64_t>();
    const std::uint64_t start_frame = req.value("start_frame", 0ull);

    double score = constant;
    if (mode == "ramp") {
      const double t = static_cast<double>(start_frame + 15) / fps;
      score = std::clamp((t - (event_time - rise)) / rise, 0.0, 1.0);
    } else if (mode == "hash") {
      score = hash_score(start_frame);
    } else if (mode == "from-data") {
      if (!req.contains("data")) {
        std::cerr << "scorer_backend_stub: request lacks data\n";
        return 3;
      }
      const auto raw = crashbench::detail::base64_decode(
          req.at("data").get<std::string>());
      const auto* floats = reinterpret_cast<const float*>(raw.data());
      const size_t n = raw.size() / sizeof(float);
      double sum = 0.0;
      for (size_t i = 0; i < n; ++i) sum += floats[i];
      score = n ? std::clamp(sum / static_cast<double>(n), 0.0, 1.0) : 0.0;
    }

    if (noise_replies) {
      std::cout << json{{"id", id + 1000000}, {"score", 0.25}}.dump() << "\n";
    }
    std::cout << json{{"id", id}, {"score", score}}.dump() << "\n";
    std::cout.flush();
    if (die_after >= 0 && ++replies >= die_after) return 0;
  }
  return 0;
}
