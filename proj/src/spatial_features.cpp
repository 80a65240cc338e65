#include "spatial_features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "errors.hpp"
#include "log.hpp"

namespace mvf::spatial {

namespace nn = torch::nn;

void check_frames(const torch::Tensor& frames) {
  if (frames.dim() != 4 || frames.size(1) != 3) throw shape_error("frames must be (B,3,H,W)");
  if (frames.size(2) % 8 != 0 || frames.size(3) % 8 != 0) {
    throw shape_error("frame dims " + std::to_string(frames.size(2)) + "x" + std::to_string(frames.size(3)) +
                      " must be divisible by 8");
  }
}

namespace {

// Folds the float rounding residual of each off-center sum into the
// coefficients of smallest magnitude.
void settle_float_rounding(torch::Tensor& flat) {
  constexpr int64_t kTaps = kKernelSize * kKernelSize;
  float* data = flat.data_ptr<float>();
  for (int64_t k = 0; k < flat.size(0); ++k) {
    float* row = data + k * kTaps;
    std::array<int64_t, kTaps - 1> order{};
    for (int64_t i = 0, j = 0; i < kTaps; ++i)
      if (i != kCenter) order[j++] = i;
    std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) { return std::abs(row[a]) < std::abs(row[b]); });
    for (int64_t i : order) {
      double sum = 0.0;
      for (int64_t t = 0; t < kTaps; ++t) sum += row[t];
      if (sum == 1.0) break;
      row[i] = static_cast<float>(static_cast<double>(row[i]) + (1.0 - sum));
    }
  }
}

}  // namespace

int project_constrained(torch::Tensor& weights, uint64_t seed) {
  torch::NoGradGuard guard;
  if (weights.size(-1) != kKernelSize || weights.size(-2) != kKernelSize)
    throw shape_error("constrained kernels must be 5x5");
  auto flat = weights.view({-1, kKernelSize * kKernelSize});
  auto work = flat.to(torch::kFloat64);
  int reinitialized = 0;
  for (int64_t k = 0; k < work.size(0); ++k) {
    auto row = work[k];
    row[kCenter] = 0.0;
    double sum = row.sum().item<double>();
    if (std::abs(sum) < 1e-8) {
      std::mt19937_64 rng(seed + static_cast<uint64_t>(k) * 0x9E3779B97F4A7C15ULL);
      std::uniform_real_distribution<double> unit(0.5, 1.5);
      for (int64_t i = 0; i < kKernelSize * kKernelSize; ++i) row[i] = i == kCenter ? 0.0 : unit(rng);
      sum = row.sum().item<double>();
      ++reinitialized;
      log::warn("constrained kernel " + std::to_string(k) + " had degenerate off-center sum; reinitialized");
    }
    row.div_(sum);
  }
  flat.copy_(work);
  if (flat.scalar_type() == torch::kFloat32 && flat.is_contiguous()) settle_float_rounding(flat);
  return reinitialized;
}

double constraint_violation(const torch::Tensor& weights) {
  torch::NoGradGuard guard;
  auto flat = weights.reshape({-1, kKernelSize * kKernelSize}).to(torch::kFloat64);
  auto center = flat.select(1, kCenter).abs();
  auto off = (flat.sum(1) - flat.select(1, kCenter) - 1.0).abs();
  return std::max(center.max().item<double>(), off.max().item<double>());
}

ConstrainedConvImpl::ConstrainedConvImpl(int64_t filters_per_channel) : filters_per_channel(filters_per_channel) {
  phi = register_parameter("phi", torch::rand({3 * filters_per_channel, 1, kKernelSize, kKernelSize}));
  project();
}

int ConstrainedConvImpl::project() {
  auto w = phi.detach();
  return project_constrained(w, 0xF17E5 + reinit_counter_++);
}

torch::Tensor ConstrainedConvImpl::forward(const torch::Tensor& frames) {
  auto delta = torch::zeros_like(phi);
  delta.view({-1, kKernelSize * kKernelSize}).select(1, kCenter).fill_(1.0);
  auto padded = torch::replication_pad2d(frames, {2, 2, 2, 2});
  return torch::nn::functional::conv2d(padded, delta - phi, torch::nn::functional::Conv2dFuncOptions().groups(3));
}

SpatialResidualExtractorImpl::SpatialResidualExtractorImpl(int64_t filters_per_channel, int64_t expand) {
  constrained = register_module("constrained", ConstrainedConv(filters_per_channel));
  stem_ = register_module("stem", conv_norm_act(3 * filters_per_channel, 24));
  trunk_ = register_module("trunk", nn::Sequential(FirBlock(24, 48, 2, expand), FirBlock(48, 64, 2, expand),
                                                   FirBlock(64, 128, 2, expand),
                                                   FirBlock(128, kResidualChannels, 1, expand)));
}

torch::Tensor SpatialResidualExtractorImpl::residual(const torch::Tensor& frames) {
  check_frames(frames);
  return constrained(frames);
}

torch::Tensor SpatialResidualExtractorImpl::forward(const torch::Tensor& frames) {
  return trunk_->forward(stem_->forward(residual(frames)));
}

ContextExtractorImpl::ContextExtractorImpl(int64_t out_channels, int64_t expand) {
  stem_ = register_module("stem", conv_norm_act(3, 16));
  trunk_ = register_module("trunk", nn::Sequential(FirBlock(16, 24, 2, expand, false),
                                                   FirBlock(24, 32, 2, expand, false),
                                                   FirBlock(32, 48, 2, expand, false)));
  head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(48, out_channels, 1)));
}

torch::Tensor ContextExtractorImpl::forward(const torch::Tensor& frames) {
  check_frames(frames);
  return head_(trunk_->forward(stem_->forward(frames)));
}

}  // namespace mvf::spatial
