// Optical flow estimators behind one interface. A flow field is a (2,H,W)
// float tensor holding (u, v) displacements from source to target, sampled at
// source pixel positions.
#pragma once

#include <memory>
#include <string>

#include <torch/torch.h>

namespace mvf::flow {

struct FramePair {
  const torch::Tensor& source;  // (3,H,W)
  const torch::Tensor& target;  // (3,H,W)
  int source_index = 0;
  int target_index = 0;
};

class FlowEstimator {
 public:
  virtual ~FlowEstimator() = default;
  virtual std::string name() const = 0;
  /// Implementations must be safe to call concurrently.
  virtual torch::Tensor estimate(const FramePair& pair) const = 0;
};

struct BuiltinFlowOptions {
  int levels = 3;
  int iterations = 30;
  int warps = 2;
  double smoothness = 0.05;
};

/// Coarse-to-fine Horn-Schunck with backward warping between levels:
/// brightness constancy plus quadratic smoothness, solved by Jacobi
/// fixed-point iterations.
class BuiltinFlow : public FlowEstimator {
 public:
  explicit BuiltinFlow(BuiltinFlowOptions options = {}) : options_(options) {}
  std::string name() const override { return "builtin"; }
  torch::Tensor estimate(const FramePair& pair) const override;
  /// Grayscale convenience entry point; `x`, `y` are (H,W).
  torch::Tensor estimate_gray(const torch::Tensor& x, const torch::Tensor& y) const;

  const BuiltinFlowOptions& options() const { return options_; }

 private:
  BuiltinFlowOptions options_;
};

/// Reads flow_%04d_%04d.flo (source, target) files from one directory.
class PrecomputedFlow : public FlowEstimator {
 public:
  explicit PrecomputedFlow(std::string directory) : directory_(std::move(directory)) {}
  std::string name() const override { return "precomputed"; }
  torch::Tensor estimate(const FramePair& pair) const override;
  std::string path_for(int source_index, int target_index) const;

 private:
  std::string directory_;
};

/// Memoizes another estimator on disk, keyed by a content hash of both frames.
class CachedFlow : public FlowEstimator {
 public:
  CachedFlow(std::shared_ptr<const FlowEstimator> inner, std::string cache_dir, std::string salt = {});
  std::string name() const override { return inner_->name() + "+cache"; }
  torch::Tensor estimate(const FramePair& pair) const override;

 private:
  std::shared_ptr<const FlowEstimator> inner_;
  std::string cache_dir_;
  std::string salt_;
};

/// Middlebury .flo: float32 magic 202021.25, int32 width, int32 height,
/// then row-major interleaved float32 (u, v), all little-endian.
void write_flo(const std::string& path, const torch::Tensor& flow);
torch::Tensor read_flo(const std::string& path);

torch::Tensor to_gray(const torch::Tensor& frame);

}  // namespace mvf::flow
