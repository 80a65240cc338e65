// Per-frame spatial modalities: forensic residual features F_t (constrained
// prediction-error filters followed by the FIR trunk) and RGB context C_t.
#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "fir.hpp"

namespace mvf::spatial {

inline constexpr int64_t kKernelSize = 5;
inline constexpr int64_t kCenter = kKernelSize * kKernelSize / 2;
inline constexpr int64_t kResidualChannels = 256;

/// Projects every 5x5 prediction kernel in `weights` (shape (N,1,5,5) or
/// (N,5,5)) in place: center coefficient set to 0 and the remaining 24
/// divided by their sum. A kernel whose off-center sum is below 1e-8 in
/// magnitude is reinitialized from `seed` first. Returns the number of
/// reinitialized kernels.
int project_constrained(torch::Tensor& weights, uint64_t seed = 0);

/// Largest deviation from the projection invariant over all kernels:
/// max(|center|, |offcenter_sum - 1|).
double constraint_violation(const torch::Tensor& weights);

/// Bank of learned prediction kernels; the layer output is the prediction
/// error I * (delta - phi), computed per RGB channel.
class ConstrainedConvImpl : public torch::nn::Module {
 public:
  explicit ConstrainedConvImpl(int64_t filters_per_channel);
  torch::Tensor forward(const torch::Tensor& frames);
  int project();

  torch::Tensor phi;
  int64_t filters_per_channel;

 private:
  uint64_t reinit_counter_ = 0;
};
TORCH_MODULE(ConstrainedConv);

class SpatialResidualExtractorImpl : public torch::nn::Module {
 public:
  SpatialResidualExtractorImpl(int64_t filters_per_channel, int64_t expand);
  /// (B,3,H,W) -> (B,256,H/8,W/8)
  torch::Tensor forward(const torch::Tensor& frames);
  /// Pre-trunk residual stack, (B,3*N_f,H,W).
  torch::Tensor residual(const torch::Tensor& frames);

  ConstrainedConv constrained{nullptr};

 private:
  torch::nn::Sequential stem_{nullptr};
  torch::nn::Sequential trunk_{nullptr};
};
TORCH_MODULE(SpatialResidualExtractor);

class ContextExtractorImpl : public torch::nn::Module {
 public:
  ContextExtractorImpl(int64_t out_channels, int64_t expand);
  /// (B,3,H,W) -> (B,D_c,H/8,W/8)
  torch::Tensor forward(const torch::Tensor& frames);

 private:
  torch::nn::Sequential stem_{nullptr};
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(ContextExtractor);

/// Throws unless frames are (B,3,H,W) with H and W multiples of 8.
void check_frames(const torch::Tensor& frames);

}  // namespace mvf::spatial
