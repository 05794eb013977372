#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crashbench/manifest.hpp"

namespace crashbench {

/// Per-layer attention mass received by each spatial patch at each temporal
/// token position. Spatial extent is fixed at 16x16; with 16-frame windows
/// and tubelet size 2 there are 8 temporal positions.
struct AttentionStack {
  int t_tok = 8;
  int frames_per_token = 2;
  std::vector<int> layer_ids;              // sorted ascending
  std::vector<std::vector<float>> layers;  // each t_tok*16*16, row-major

  int num_frames() const { return t_tok * frames_per_token; }
  void validate() const;
};

/// Raw per-layer attention matrices [heads, tokens, tokens] with a
/// (temporal x 16 x 16) token layout. Rows sum to 1 within 1e-4.
struct RawAttention {
  struct Layer {
    int layer_id = 0;
    int heads = 0;
    int tokens = 0;                // t_tok * 256
    std::vector<float> weights;    // heads * tokens * tokens
  };
  int t_tok = 8;
  int frames_per_token = 2;
  std::vector<Layer> layers;
};

struct Heatmap {
  std::vector<float> values;  // 256*256 in [0,1], row-major
  int peak_row = 0;           // first maximum in row-major order
  int peak_col = 0;
  std::string clip_id;
  std::string window_id;

  float at(int row, int col) const { return values[row * 256 + col]; }
};

/// Exponential temporal weights w_t = exp((t - c)/T) / sum, with the center
/// c = num_frames/2 - 1 (t zero-based). Sum is 1 and the consecutive ratio
/// is exp(1/T).
std::vector<double> temporal_weights(int num_frames = 16, double T = 2.0);

/// Mean over heads and query tokens of the attention received by each key
/// token, regrouped to [t_tok, 16, 16] per layer.
AttentionStack aggregate_raw(const RawAttention& raw);

/// Full pipeline: frame weights -> token weights (consecutive pairs averaged,
/// renormalized), weighted temporal sum per layer, mean across layers,
/// bilinear upsample to 256x256, min-max normalize. A constant map
/// normalizes to all zeros rather than NaN.
Heatmap compose_heatmap(const AttentionStack& stack, double T = 2.0);

/// Hit iff the peak pixel lies inside any box, edges inclusive. Throws when
/// the box list is empty (clip not PGA-annotated).
bool pointing_game(const Heatmap& heatmap, const std::vector<GtBox>& boxes);

struct PgaSample {
  std::string clip_id;
  Heatmap heatmap;
  std::vector<GtBox> boxes;
};

struct PgaResult {
  double pga = 0.0;              // hits / clips
  double random_baseline = 0.0;  // mean union-of-boxes area / 256^2
  double delta_vs_random = 0.0;
  int hits = 0;
  int clips = 0;
};

PgaResult pga_accuracy(const std::vector<PgaSample>& samples);

/// Mean over clips of (union-of-boxes area / 256^2): the chance a uniformly
/// random peak lands in a box.
double pga_random_baseline(const std::vector<std::vector<GtBox>>& boxes);

/// Binary attention file: magic "ATTN", u32 version=1, u32 layer_count, then
/// per layer u32 layer_id, u32 t_tok, u32 h=16, u32 w=16 and t_tok*16*16
/// little-endian f32. One file per prediction window.
void write_attention_file(const AttentionStack& stack,
                          const std::filesystem::path& path);
AttentionStack read_attention_file(const std::filesystem::path& path);

/// 8-bit PGM plus optional JSON sidecar with the peak and PGA verdict.
void write_heatmap_pgm(const Heatmap& heatmap,
                       const std::filesystem::path& path);
void write_heatmap_sidecar(const Heatmap& heatmap,
                           const std::filesystem::path& path,
                           const std::vector<GtBox>* boxes = nullptr);

}  // namespace crashbench
