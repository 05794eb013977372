#include "crashbench/imageops.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace crashbench {

void bilinear_resize(const float* src, int src_h, int src_w, int channels,
                     float* dst, int dst_h, int dst_w) {
  if (src_h <= 0 || src_w <= 0 || dst_h <= 0 || dst_w <= 0) {
    throw ValidationError("bilinear_resize: zero-sized image");
  }
  const double scale_y = static_cast<double>(src_h) / dst_h;
  const double scale_x = static_cast<double>(src_w) / dst_w;

  // Per-axis contributor tables.
  std::vector<int> x0(dst_w), x1(dst_w), y0(dst_h), y1(dst_h);
  std::vector<float> fx(dst_w), fy(dst_h);
  for (int x = 0; x < dst_w; ++x) {
    double sx = (x + 0.5) * scale_x - 0.5;
    sx = std::clamp(sx, 0.0, static_cast<double>(src_w - 1));
    const int ix = static_cast<int>(sx);
    x0[x] = ix;
    x1[x] = std::min(ix + 1, src_w - 1);
    fx[x] = static_cast<float>(sx - ix);
  }
  for (int y = 0; y < dst_h; ++y) {
    double sy = (y + 0.5) * scale_y - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(src_h - 1));
    const int iy = static_cast<int>(sy);
    y0[y] = iy;
    y1[y] = std::min(iy + 1, src_h - 1);
    fy[y] = static_cast<float>(sy - iy);
  }

  for (int y = 0; y < dst_h; ++y) {
    const float* row0 = src + static_cast<size_t>(y0[y]) * src_w * channels;
    const float* row1 = src + static_cast<size_t>(y1[y]) * src_w * channels;
    float* out = dst + static_cast<size_t>(y) * dst_w * channels;
    for (int x = 0; x < dst_w; ++x) {
      const float* a = row0 + static_cast<size_t>(x0[x]) * channels;
      const float* b = row0 + static_cast<size_t>(x1[x]) * channels;
      const float* c = row1 + static_cast<size_t>(x0[x]) * channels;
      const float* d = row1 + static_cast<size_t>(x1[x]) * channels;
      for (int ch = 0; ch < channels; ++ch) {
        const float top = a[ch] + fx[x] * (b[ch] - a[ch]);
        const float bot = c[ch] + fx[x] * (d[ch] - c[ch]);
        out[static_cast<size_t>(x) * channels + ch] =
            top + fy[y] * (bot - top);
      }
    }
  }
}

namespace {

// Skips whitespace and '#' comment lines in a PNM header.
int read_pnm_int(std::istream& in) {
  int c = in.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#') {
      while (c != '\n' && c != EOF) c = in.get();
    }
    c = in.get();
  }
  int value = 0;
  bool any = false;
  while (std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw ValidationError("malformed PNM header");
  return value;
}

}  // namespace

RawFrame read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw ValidationError("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") {
    throw ValidationError(path.string() + ": not a binary PPM (P6)");
  }
  RawFrame frame;
  frame.width = read_pnm_int(in);
  frame.height = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (maxval != 255) {
    throw ValidationError(path.string() + ": only maxval 255 supported");
  }
  frame.data.resize(static_cast<size_t>(frame.width) * frame.height * 3);
  in.read(reinterpret_cast<char*>(frame.data.data()),
          static_cast<std::streamsize>(frame.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(frame.data.size())) {
    throw ValidationError(path.string() + ": truncated pixel data");
  }
  return frame;
}

void write_ppm(const RawFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw ValidationError("cannot write " + path.string());
  out << "P6\n" << frame.width << " " << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.data.data()),
            static_cast<std::streamsize>(frame.data.size()));
}

void write_pgm(const std::vector<float>& values, int h, int w,
               const std::filesystem::path& path) {
  if (values.size() != static_cast<size_t>(h) * w) {
    throw ValidationError("write_pgm: size mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw ValidationError("cannot write " + path.string());
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<std::uint8_t> bytes(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    const float v = std::clamp(values[i], 0.0f, 1.0f);
    bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, int* h,
                                   int* w) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw ValidationError("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") {
    throw ValidationError(path.string() + ": not a binary PGM (P5)");
  }
  *w = read_pnm_int(in);
  *h = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (maxval != 255) {
    throw ValidationError(path.string() + ": only maxval 255 supported");
  }
  std::vector<std::uint8_t> data(static_cast<size_t>(*w) * *h);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) {
    throw ValidationError(path.string() + ": truncated pixel data");
  }
  return data;
}

}  // namespace crashbench
