#include "crashbench/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "jsonl.hpp"

namespace crashbench {

ConstantScorer::ConstantScorer(double value) : value_(value) {
  if (value < 0.0 || value > 1.0) {
    throw ValidationError("ConstantScorer value outside [0,1]");
  }
}

double ConstantScorer::score(const Window&) { return value_; }

RampScorer::RampScorer(double event_time_s, double rise_duration_s)
    : event_time_s_(event_time_s), rise_duration_s_(rise_duration_s) {
  if (rise_duration_s <= 0.0) {
    throw ValidationError("RampScorer rise duration must be > 0");
  }
}

double RampScorer::ramp_value(double t, double event_time_s,
                              double rise_duration_s) {
  const double x = (t - (event_time_s - rise_duration_s)) / rise_duration_s;
  return std::clamp(x, 0.0, 1.0);
}

double RampScorer::score(const Window& window) {
  return ramp_value(window.prediction_time_s(), event_time_s_,
                    rise_duration_s_);
}

NoisyRampScorer::NoisyRampScorer(std::uint64_t seed, double sigma,
                                 double event_time_s, double rise_duration_s)
    : seed_(seed),
      sigma_(sigma),
      event_time_s_(event_time_s),
      rise_duration_s_(rise_duration_s) {
  if (sigma < 0.0) throw ValidationError("NoisyRampScorer sigma must be >= 0");
  if (rise_duration_s <= 0.0) {
    throw ValidationError("NoisyRampScorer rise duration must be > 0");
  }
}

double NoisyRampScorer::score(const Window& window) {
  const double base = RampScorer::ramp_value(
      window.prediction_time_s(), event_time_s_, rise_duration_s_);
  // Fresh engine per window keyed on (seed, start index): repeat calls are
  // bit-identical and windows are independent.
  std::uint64_t key = seed_ * 0x9E3779B97F4A7C15ull ^
                      (static_cast<std::uint64_t>(window.start_frame_index) +
                       0xD1B54A32D192ED03ull);
  std::mt19937_64 rng(key);
  std::normal_distribution<double> noise(0.0, sigma_ > 0.0 ? sigma_ : 1e-12);
  const double n = sigma_ > 0.0 ? noise(rng) : 0.0;
  return std::clamp(base + n, 0.0, 1.0);
}

ReplayScorer::ReplayScorer(ScoreTrace trace) : trace_(std::move(trace)) {
  trace_.validate();
}

ReplayScorer ReplayScorer::from_file(const std::string& path) {
  return ReplayScorer(load_trace(path));
}

double ReplayScorer::score(const Window& window) {
  const double t = window.prediction_time_s();
  double best_dt = std::numeric_limits<double>::infinity();
  double nearest = 0.0;
  for (const auto& e : trace_.entries) {
    const double dt = std::abs(e.t - t);
    if (dt <= 1e-9) return e.score;
    if (dt < best_dt) {
      best_dt = dt;
      nearest = e.t;
    }
  }
  throw BackendError("replay trace " + trace_.clip_id + " has no entry at t=" +
                     std::to_string(t) + " (nearest: " +
                     (trace_.entries.empty() ? std::string("none")
                                             : std::to_string(nearest)) +
                     ")");
}

namespace detail {

namespace {
constexpr char kB64[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::uint8_t* data, size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= len; i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(kB64[(v >> 6) & 63]);
    out.push_back(kB64[v & 63]);
  }
  const size_t rem = len - i;
  if (rem == 1) {
    const std::uint32_t v = data[i] << 16;
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out += "==";
  } else if (rem == 2) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(kB64[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  static std::array<int, 256> lut = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kB64[i])] = i;
    return t;
  }();
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const int v = lut[static_cast<unsigned char>(c)];
    if (v < 0) throw ValidationError("invalid base64 character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace detail

std::unique_ptr<Scorer> make_scorer(const std::string& spec,
                                    bool subprocess_send_pixels) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string args =
      colon == std::string::npos ? "" : spec.substr(colon + 1);

  auto parse_kv = [&](const std::string& text) {
    std::map<std::string, std::string> kv;
    size_t pos = 0;
    while (pos < text.size()) {
      size_t comma = text.find(',', pos);
      if (comma == std::string::npos) comma = text.size();
      const std::string item = text.substr(pos, comma - pos);
      const size_t eq = item.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("scorer spec: expected key=value in '" + item +
                              "'");
      }
      kv[item.substr(0, eq)] = item.substr(eq + 1);
      pos = comma + 1;
    }
    return kv;
  };

  if (kind == "constant") {
    if (args.empty()) throw ValidationError("constant scorer needs a value");
    return std::make_unique<ConstantScorer>(std::stod(args));
  }
  if (kind == "ramp") {
    auto kv = parse_kv(args);
    return std::make_unique<RampScorer>(std::stod(kv.at("event")),
                                        std::stod(kv.at("rise")));
  }
  if (kind == "noisyramp") {
    auto kv = parse_kv(args);
    const double event = kv.count("event") ? std::stod(kv.at("event")) : 6.0;
    const double rise = kv.count("rise") ? std::stod(kv.at("rise")) : 2.0;
    return std::make_unique<NoisyRampScorer>(std::stoull(kv.at("seed")),
                                             std::stod(kv.at("sigma")), event,
                                             rise);
  }
  if (kind == "replay") {
    if (args.empty()) throw ValidationError("replay scorer needs a file path");
    return std::make_unique<ReplayScorer>(load_trace(args));
  }
  if (kind == "subprocess") {
    if (args.empty()) throw ValidationError("subprocess scorer needs a command");
    return std::make_unique<SubprocessScorer>(args, subprocess_send_pixels);
  }
  throw ValidationError("unknown scorer spec '" + spec + "'");
}

}  // namespace crashbench
