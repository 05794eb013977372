#pragma once

// Shared test helpers.

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

namespace testutil {

// Unique scratch directory per test binary, wiped on construction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("crashbench_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path fixtures_dir() { return FIXTURES_DIR; }

}  // namespace testutil
