#include "heads.hpp"

#include "errors.hpp"
#include "fir.hpp"
#include "msh_transformer.hpp"

namespace mvf::heads {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

DetectionHeadImpl::DetectionHeadImpl(int64_t embed_dim) {
  conv1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(embed_dim, 64, 3).padding(1)));
  conv2_ = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(64, 64, 3).padding(1)));
  fc1_ = register_module("fc1", nn::Linear(64, 32));
  fc2_ = register_module("fc2", nn::Linear(32, 1));
}

torch::Tensor DetectionHeadImpl::forward(const torch::Tensor& grid) {
  if (grid.dim() != 4) throw shape_error("detection head expects (B,D,g,g)");
  auto x = torch::silu(conv1_(grid));
  if (x.size(-1) >= 2 && x.size(-2) >= 2) x = torch::max_pool2d(x, 2);
  x = torch::silu(conv2_(x));
  x = torch::adaptive_avg_pool2d(x, {1, 1}).flatten(1);
  return fc2_(torch::silu(fc1_(x))).squeeze(1);
}

torch::Tensor DetectionHeadImpl::detect(const torch::Tensor& grid) { return torch::sigmoid(forward(grid)); }

LocalizationHeadImpl::LocalizationHeadImpl(int64_t fused_channels, int64_t embed_dim) {
  conv1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(fused_channels + embed_dim, 64, 3).padding(1)));
  norm1_ = register_module("norm1", make_norm(64));
  conv2_ = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(64, 32, 3).padding(1)));
  final_conv = register_module("final", nn::Conv2d(nn::Conv2dOptions(32, 1, 1)));
}

torch::Tensor LocalizationHeadImpl::forward(const torch::Tensor& grid, const torch::Tensor& xi, int64_t height,
                                            int64_t width) {
  if (height != 8 * xi.size(-2) || width != 8 * xi.size(-1)) {
    throw shape_error("target " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not 8x the feature grid " + std::to_string(xi.size(-2)) + "x" + std::to_string(xi.size(-1)));
  }
  auto up = F::interpolate(grid, F::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{xi.size(-2), xi.size(-1)})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
  auto x = torch::cat({up, xi}, 1);
  x = torch::silu(norm1_(conv1_(x)));
  x = torch::silu(conv2_(x));
  x = final_conv(x);
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor LocalizationHeadImpl::localize(const torch::Tensor& grid, const torch::Tensor& xi, int64_t height,
                                             int64_t width) {
  return torch::sigmoid(forward(grid, xi, height, width)).squeeze(1);
}

double score_from_mask(const torch::Tensor& mask) {
  if (!mask.defined() || mask.numel() == 0) throw invalid_argument("score_from_mask: empty mask");
  return mask.max().item<double>();
}

PretrainHeadsImpl::PretrainHeadsImpl(int64_t in_channels, int64_t classes, std::vector<int> scales)
    : scales_(std::move(scales)), classes_(classes) {
  if (classes < 2) throw invalid_argument("pretraining needs at least 2 classes");
  for (int k : scales_)
    classifiers_.push_back(
        register_module("scale" + std::to_string(k), nn::Conv2d(nn::Conv2dOptions(in_channels, classes, 1))));
}

std::vector<torch::Tensor> PretrainHeadsImpl::forward(const torch::Tensor& features) {
  std::vector<torch::Tensor> pooled;
  for (int k : scales_) pooled.push_back(msh::pool_grid_any(features, k));
  return logits(pooled);
}

std::vector<torch::Tensor> PretrainHeadsImpl::logits(const std::vector<torch::Tensor>& pooled) {
  if (pooled.size() != scales_.size()) throw invalid_argument("pretrain heads: scale set mismatch");
  std::vector<torch::Tensor> out;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const int64_t side = int64_t{1} << scales_[i];
    if (pooled[i].size(-1) != side || pooled[i].size(-2) != side)
      throw shape_error("pooled grid for scale " + std::to_string(scales_[i]) + " must be " + std::to_string(side) +
                        "x" + std::to_string(side));
    out.push_back(classifiers_[i](pooled[i]));
  }
  return out;
}

}  // namespace mvf::heads
