#pragma once

// Internal line-delimited JSON helpers.

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "crashbench/core.hpp"

namespace crashbench::jsonl {

using json = nlohmann::json;

// Calls fn(line_number, parsed) for every non-empty line. Parse failures
// throw ValidationError with the file and 1-based line number.
inline void for_each_line(const std::filesystem::path& path,
                          const std::function<void(size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in.good()) {
    throw ValidationError("cannot open " + path.string());
  }
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": JSON parse error");
    }
    fn(line_no, obj);
  }
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path) {
    if (!out_.good()) {
      throw ValidationError("cannot write " + path.string());
    }
  }
  void write(const json& obj) { out_ << obj.dump() << "\n"; }

 private:
  std::ofstream out_;
};

}  // namespace crashbench::jsonl
