// Fused inverted residual (FIR) block: 3x3 expand conv -> norm -> SiLU ->
// squeeze-and-excitation -> 1x1 project -> norm, with identity skip when the
// shape is preserved.
#pragma once

#include <torch/torch.h>

namespace mvf {

/// Batch renormalization: normalizes with the running statistics in both
/// training and inference, while gradients flow through the batch
/// statistics (r and d corrections clipped to [1/r_max, r_max], [-d_max, d_max]).
/// Running statistics start from the first training batch. With
/// `batch_statistics` set, training-mode forwards use plain batch
/// normalization instead (suited to i.i.d. minibatches).
class BatchRenormImpl : public torch::nn::Module {
 public:
  explicit BatchRenormImpl(int64_t channels, double momentum = 0.1, double eps = 1e-5, double r_max = 1e6,
                           double d_max = 1e6);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight, bias, running_mean, running_var, batches_tracked;
  bool batch_statistics = false;

 private:
  double momentum_, eps_, r_max_, d_max_;
};
TORCH_MODULE(BatchRenorm);

BatchRenorm make_norm(int64_t channels);

/// Sets BatchRenormImpl::batch_statistics on every normalization layer below `module`.
void use_batch_statistics(torch::nn::Module& module, bool enabled);

class SqueezeExcitationImpl : public torch::nn::Module {
 public:
  SqueezeExcitationImpl(int64_t channels, int64_t squeezed);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d reduce_{nullptr};
  torch::nn::Conv2d expand_{nullptr};
};
TORCH_MODULE(SqueezeExcitation);

class FirBlockImpl : public torch::nn::Module {
 public:
  FirBlockImpl(int64_t in, int64_t out, int64_t stride, int64_t expand = 4, bool squeeze_excite = true);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d fused_{nullptr};
  BatchRenorm norm0_{nullptr};
  SqueezeExcitation se_{nullptr};
  torch::nn::Conv2d project_{nullptr};
  BatchRenorm norm1_{nullptr};
  bool skip_ = false;
};
TORCH_MODULE(FirBlock);

/// conv3x3 -> norm -> SiLU
torch::nn::Sequential conv_norm_act(int64_t in, int64_t out, int64_t stride = 1);

}  // namespace mvf
