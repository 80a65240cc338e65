// Output heads: frame-level detection, full-resolution localization, and the
// per-scale camera-model classifiers used only while pretraining.
#pragma once

#include <vector>

#include <torch/torch.h>

#include "fir.hpp"

namespace mvf::heads {

class DetectionHeadImpl : public torch::nn::Module {
 public:
  explicit DetectionHeadImpl(int64_t embed_dim);
  /// (B,D_e,g,g) -> (B) logits
  torch::Tensor forward(const torch::Tensor& grid);
  /// (B) probabilities in (0,1)
  torch::Tensor detect(const torch::Tensor& grid);

 private:
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::Conv2d conv2_{nullptr};
  torch::nn::Linear fc1_{nullptr};
  torch::nn::Linear fc2_{nullptr};
};
TORCH_MODULE(DetectionHead);

class LocalizationHeadImpl : public torch::nn::Module {
 public:
  LocalizationHeadImpl(int64_t fused_channels, int64_t embed_dim);
  /// Mask logits (B,1,H,W): G bilinearly resized to xi's grid, concatenated
  /// with xi, convolved, then resized x8 to the frame.
  torch::Tensor forward(const torch::Tensor& grid, const torch::Tensor& xi, int64_t height, int64_t width);
  /// (B,H,W) mask in [0,1]
  torch::Tensor localize(const torch::Tensor& grid, const torch::Tensor& xi, int64_t height, int64_t width);

  torch::nn::Conv2d final_conv{nullptr};

 private:
  torch::nn::Conv2d conv1_{nullptr};
  BatchRenorm norm1_{nullptr};
  torch::nn::Conv2d conv2_{nullptr};
};
TORCH_MODULE(LocalizationHead);

/// Max over pixels; the detection score of localization-only methods.
double score_from_mask(const torch::Tensor& mask);

/// One linear classifier per pretraining scale, shared across grid cells.
class PretrainHeadsImpl : public torch::nn::Module {
 public:
  PretrainHeadsImpl(int64_t in_channels, int64_t classes, std::vector<int> scales);
  /// Pools F onto every scale's 2^k grid; returns (B,C,2^k,2^k) logits per scale.
  std::vector<torch::Tensor> forward(const torch::Tensor& features);
  /// Logits from already-pooled grids psi^(k), one per configured scale.
  std::vector<torch::Tensor> logits(const std::vector<torch::Tensor>& pooled);

  const std::vector<int>& scales() const { return scales_; }
  int64_t classes() const { return classes_; }

 private:
  std::vector<int> scales_;
  int64_t classes_;
  std::vector<torch::nn::Conv2d> classifiers_;
};
TORCH_MODULE(PretrainHeads);

}  // namespace mvf::heads
