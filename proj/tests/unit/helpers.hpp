#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include <doctest.h>
#include <torch/torch.h>

namespace testing {

/// Fresh per-process scratch directory.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mvf-unit-" + std::to_string(::getpid())) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double max_abs(const torch::Tensor& t) { return t.abs().max().item<double>(); }

inline bool same(const torch::Tensor& a, const torch::Tensor& b) { return a.sizes() == b.sizes() && a.equal(b); }

}  // namespace testing
