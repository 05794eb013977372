#include "crashbench/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "crashbench/imageops.hpp"
#include "jsonl.hpp"

namespace crashbench {

void AttentionStack::validate() const {
  if (layers.empty()) throw ValidationError("attention stack has no layers");
  if (t_tok < 1) throw ValidationError("attention stack t_tok must be >= 1");
  if (frames_per_token < 1) {
    throw ValidationError("attention stack frames_per_token must be >= 1");
  }
  if (layer_ids.size() != layers.size()) {
    throw ValidationError("attention stack layer_ids/layers size mismatch");
  }
  if (!std::is_sorted(layer_ids.begin(), layer_ids.end())) {
    throw ValidationError("attention stack layer_ids must be sorted");
  }
  const size_t expected = static_cast<size_t>(t_tok) * 16 * 16;
  for (const auto& layer : layers) {
    if (layer.size() != expected) {
      throw ValidationError("attention layer has wrong element count");
    }
    for (float v : layer) {
      if (!(v >= 0.0f)) {
        throw ValidationError("attention values must be non-negative");
      }
    }
  }
}

std::vector<double> temporal_weights(int num_frames, double T) {
  if (num_frames < 1) throw ValidationError("num_frames must be >= 1");
  if (T <= 0.0) throw ValidationError("temporal weight T must be > 0");
  const double center = num_frames / 2.0 - 1.0;
  std::vector<double> w(num_frames);
  double sum = 0.0;
  for (int t = 0; t < num_frames; ++t) {
    w[t] = std::exp((t - center) / T);
    sum += w[t];
  }
  for (double& v : w) v /= sum;
  return w;
}

AttentionStack aggregate_raw(const RawAttention& raw) {
  if (raw.layers.empty()) throw ValidationError("raw attention has no layers");
  AttentionStack stack;
  stack.t_tok = raw.t_tok;
  stack.frames_per_token = raw.frames_per_token;

  const int spatial = 16 * 16;
  for (const auto& layer : raw.layers) {
    const int tokens = layer.tokens;
    if (tokens != raw.t_tok * spatial) {
      throw ValidationError("raw attention token count " +
                            std::to_string(tokens) +
                            " inconsistent with layout " +
                            std::to_string(raw.t_tok) + "x16x16");
    }
    if (layer.weights.size() !=
        static_cast<size_t>(layer.heads) * tokens * tokens) {
      throw ValidationError("raw attention weight buffer size mismatch");
    }
    // Row-stochasticity check per head.
    for (int h = 0; h < layer.heads; ++h) {
      const float* head =
          layer.weights.data() + static_cast<size_t>(h) * tokens * tokens;
      for (int q = 0; q < tokens; ++q) {
        double row = 0.0;
        for (int k = 0; k < tokens; ++k) {
          row += head[static_cast<size_t>(q) * tokens + k];
        }
        if (std::abs(row - 1.0) > 1e-4) {
          throw ValidationError(
              "attention row does not sum to 1 (layer " +
              std::to_string(layer.layer_id) + ", head " + std::to_string(h) +
              ", query " + std::to_string(q) + ")");
        }
      }
    }

    // Mean over heads and queries of attention received per key token.
    std::vector<double> received(tokens, 0.0);
    for (int h = 0; h < layer.heads; ++h) {
      const float* head =
          layer.weights.data() + static_cast<size_t>(h) * tokens * tokens;
      for (int q = 0; q < tokens; ++q) {
        const float* row = head + static_cast<size_t>(q) * tokens;
        for (int k = 0; k < tokens; ++k) received[k] += row[k];
      }
    }
    const double norm = 1.0 / (static_cast<double>(layer.heads) * tokens);
    std::vector<float> grid(received.size());
    for (size_t k = 0; k < received.size(); ++k) {
      grid[k] = static_cast<float>(received[k] * norm);
    }
    stack.layer_ids.push_back(layer.layer_id);
    stack.layers.push_back(std::move(grid));
  }
  stack.validate();
  return stack;
}

namespace {

void find_peak(const std::vector<float>& values, int* row, int* col) {
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  *row = static_cast<int>(best / 256);
  *col = static_cast<int>(best % 256);
}

}  // namespace

Heatmap compose_heatmap(const AttentionStack& stack, double T) {
  stack.validate();
  const std::vector<double> frame_w = temporal_weights(stack.num_frames(), T);

  // Token weights: average each consecutive frames_per_token group, then
  // renormalize so they sum to 1 (scale is irrelevant after min-max anyway).
  std::vector<double> token_w(stack.t_tok, 0.0);
  double token_sum = 0.0;
  for (int k = 0; k < stack.t_tok; ++k) {
    double acc = 0.0;
    for (int j = 0; j < stack.frames_per_token; ++j) {
      acc += frame_w[k * stack.frames_per_token + j];
    }
    token_w[k] = acc / stack.frames_per_token;
    token_sum += token_w[k];
  }
  for (double& v : token_w) v /= token_sum;

  // Weighted temporal sum per layer, then mean across layers.
  const int spatial = 16 * 16;
  std::vector<double> grid(spatial, 0.0);
  for (const auto& layer : stack.layers) {
    for (int k = 0; k < stack.t_tok; ++k) {
      const float* slice = layer.data() + static_cast<size_t>(k) * spatial;
      for (int i = 0; i < spatial; ++i) {
        grid[i] += token_w[k] * slice[i];
      }
    }
  }
  std::vector<float> small(spatial);
  const double inv_layers = 1.0 / static_cast<double>(stack.layers.size());
  for (int i = 0; i < spatial; ++i) {
    small[i] = static_cast<float>(grid[i] * inv_layers);
  }

  Heatmap heatmap;
  heatmap.values.resize(256 * 256);
  bilinear_resize(small.data(), 16, 16, 1, heatmap.values.data(), 256, 256);

  float lo = heatmap.values[0], hi = heatmap.values[0];
  for (float v : heatmap.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo) {
    const float inv = 1.0f / (hi - lo);
    for (float& v : heatmap.values) v = (v - lo) * inv;
  } else {
    // Constant map: normalize to zeros so degenerate inputs stay usable.
    std::fill(heatmap.values.begin(), heatmap.values.end(), 0.0f);
  }
  find_peak(heatmap.values, &heatmap.peak_row, &heatmap.peak_col);
  return heatmap;
}

bool pointing_game(const Heatmap& heatmap, const std::vector<GtBox>& boxes) {
  if (boxes.empty()) {
    throw ValidationError("clip not PGA-annotated: no ground-truth boxes");
  }
  const double row = heatmap.peak_row;
  const double col = heatmap.peak_col;
  for (const auto& b : boxes) {
    if (col >= b.x0 && col <= b.x1 && row >= b.y0 && row <= b.y1) return true;
  }
  return false;
}

double pga_random_baseline(const std::vector<std::vector<GtBox>>& boxes) {
  if (boxes.empty()) throw ValidationError("PGA baseline: empty subset");
  double total = 0.0;
  for (const auto& clip_boxes : boxes) {
    // Union area by x-sweep with y-interval union per strip.
    std::vector<double> xs;
    for (const auto& b : clip_boxes) {
      xs.push_back(b.x0);
      xs.push_back(b.x1);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    double area = 0.0;
    for (size_t i = 0; i + 1 < xs.size(); ++i) {
      const double width = xs[i + 1] - xs[i];
      if (width <= 0.0) continue;
      const double mid = 0.5 * (xs[i] + xs[i + 1]);
      std::vector<std::pair<double, double>> spans;
      for (const auto& b : clip_boxes) {
        if (b.x0 <= mid && mid <= b.x1) spans.emplace_back(b.y0, b.y1);
      }
      std::sort(spans.begin(), spans.end());
      double covered = 0.0;
      double cursor = -std::numeric_limits<double>::infinity();
      for (const auto& [y0, y1] : spans) {
        const double lo = std::max(y0, cursor);
        if (y1 > lo) {
          covered += y1 - lo;
          cursor = y1;
        }
      }
      area += width * covered;
    }
    total += area / (256.0 * 256.0);
  }
  return total / static_cast<double>(boxes.size());
}

PgaResult pga_accuracy(const std::vector<PgaSample>& samples) {
  if (samples.empty()) throw ValidationError("PGA: empty subset");
  PgaResult r;
  r.clips = static_cast<int>(samples.size());
  std::vector<std::vector<GtBox>> boxes;
  for (const auto& s : samples) {
    if (pointing_game(s.heatmap, s.boxes)) ++r.hits;
    boxes.push_back(s.boxes);
  }
  r.pga = static_cast<double>(r.hits) / static_cast<double>(r.clips);
  r.random_baseline = pga_random_baseline(boxes);
  r.delta_vs_random = r.pga - r.random_baseline;
  return r;
}

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::istream& is, const std::string& where) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (is.gcount() != 4) throw ValidationError(where + ": truncated file");
  return v;
}

}  // namespace

void write_attention_file(const AttentionStack& stack,
                          const std::filesystem::path& path) {
  stack.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os.good()) throw ValidationError("cannot write " + path.string());
  os.write("ATTN", 4);
  write_u32(os, 1);  // version
  write_u32(os, static_cast<std::uint32_t>(stack.layers.size()));
  for (size_t i = 0; i < stack.layers.size(); ++i) {
    write_u32(os, static_cast<std::uint32_t>(stack.layer_ids[i]));
    write_u32(os, static_cast<std::uint32_t>(stack.t_tok));
    write_u32(os, 16);
    write_u32(os, 16);
    os.write(reinterpret_cast<const char*>(stack.layers[i].data()),
             static_cast<std::streamsize>(stack.layers[i].size() *
                                          sizeof(float)));
  }
}

AttentionStack read_attention_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is.good()) throw ValidationError("cannot open " + path.string());
  const std::string where = path.string();
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, "ATTN", 4) != 0) {
    throw ValidationError(where + ": not an attention file (bad magic)");
  }
  const std::uint32_t version = read_u32(is, where);
  if (version != 1) {
    throw ValidationError(where + ": unsupported attention file version " +
                          std::to_string(version));
  }
  const std::uint32_t layer_count = read_u32(is, where);
  AttentionStack stack;
  stack.t_tok = 0;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const std::uint32_t layer_id = read_u32(is, where);
    const std::uint32_t t_tok = read_u32(is, where);
    const std::uint32_t h = read_u32(is, where);
    const std::uint32_t w = read_u32(is, where);
    if (h != 16 || w != 16) {
      throw ValidationError(where + ": spatial extent must be 16x16");
    }
    if (stack.t_tok == 0) {
      stack.t_tok = static_cast<int>(t_tok);
    } else if (stack.t_tok != static_cast<int>(t_tok)) {
      throw ValidationError(where + ": inconsistent t_tok across layers");
    }
    std::vector<float> values(static_cast<size_t>(t_tok) * 16 * 16);
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (is.gcount() !=
        static_cast<std::streamsize>(values.size() * sizeof(float))) {
      throw ValidationError(where + ": truncated layer data");
    }
    stack.layer_ids.push_back(static_cast<int>(layer_id));
    stack.layers.push_back(std::move(values));
  }
  if (stack.layers.empty()) {
    throw ValidationError(where + ": attention file has no layers");
  }
  stack.validate();
  return stack;
}

void write_heatmap_pgm(const Heatmap& heatmap,
                       const std::filesystem::path& path) {
  write_pgm(heatmap.values, 256, 256, path);
}

void write_heatmap_sidecar(const Heatmap& heatmap,
                           const std::filesystem::path& path,
                           const std::vector<GtBox>* boxes) {
  jsonl::json obj;
  obj["clip_id"] = heatmap.clip_id;
  obj["window_id"] = heatmap.window_id;
  obj["peak"] = {heatmap.peak_row, heatmap.peak_col};
  if (boxes != nullptr && !boxes->empty()) {
    obj["pga_hit"] = pointing_game(heatmap, *boxes);
  }
  std::ofstream os(path);
  if (!os.good()) throw ValidationError("cannot write " + path.string());
  os << obj.dump(2) << "\n";
}

}  // namespace crashbench
