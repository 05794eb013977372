#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace crashbench {

// Input / validation problems. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Backend / runtime problems (subprocess death, malformed replies, scorer
// failure). The CLI maps these to exit code 3.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Decoded 8-bit frame, interleaved RGB, row-major.
struct RawFrame {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // height * width * 3

  bool empty() const { return height <= 0 || width <= 0 || data.empty(); }
};

// Preprocessed frame: 256x256x3 normalized floats, interleaved, row-major.
struct Frame {
  int height = 0;
  int width = 0;
  std::vector<float> data;  // height * width * 3
};

}  // namespace crashbench
