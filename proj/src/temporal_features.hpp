// Temporal modalities: forensic residual derivatives T_t from the
// microstructure trunk g_r, and optical-flow residuals O_t.
#pragma once

#include <array>
#include <memory>

#include <torch/torch.h>

#include "flow.hpp"

namespace mvf::temporal {

inline constexpr int64_t kTrunkChannels = 64;
inline constexpr int64_t kResidualChannels = 2 * kTrunkChannels;
inline constexpr int64_t kFlowChannels = 4;

/// Frame indices t-2..t+2 with edge frames replicated at clip boundaries.
std::array<int, 5> window_indices(int length, int t);

/// Five consecutive (3,H,W) frames centered on t.
struct TemporalWindow {
  std::array<torch::Tensor, 5> frames;
  std::array<int, 5> indices{0, 1, 2, 3, 4};

  static TemporalWindow from_clip(const torch::Tensor& clip_frames, int t);
  TemporalWindow reversed() const;
  void validate() const;
};

/// g_r: residual stem + conv/norm/SiLU + four FIR blocks (8->16->32->64), stride 8.
class TemporalTrunkImpl : public torch::nn::Module {
 public:
  explicit TemporalTrunkImpl(int64_t expand);
  torch::Tensor forward(const torch::Tensor& frames);

 private:
  torch::nn::Conv2d residual_{nullptr};
  torch::nn::Sequential compress_{nullptr};
  torch::nn::Sequential blocks_{nullptr};
};
TORCH_MODULE(TemporalTrunk);

/// [g(I_t) - g(I_{t-1})] ++ [g(I_t) - g(I_{t+1})] for one window, (128,H/8,W/8).
torch::Tensor temporal_residuals(TemporalTrunk& trunk, const TemporalWindow& win);

/// Same quantity for every frame of a clip from precomputed trunk outputs
/// g of shape (T,64,h,w); returns (T,128,h,w).
torch::Tensor temporal_residuals_clip(const torch::Tensor& trunk_out);

enum class FlowOrder {
  kFinal,    // nu(I_{t-1}, I_t) - nu(I_{t-2}, I_{t-1})
  kSwapped,  // nu(I_t, I_{t-1}) - nu(I_{t-1}, I_{t-2})
};

/// Full-resolution flow residual (4,H,W): two forward then two backward channels.
torch::Tensor flow_residuals(const TemporalWindow& win, const flow::FlowEstimator& estimator,
                             FlowOrder order = FlowOrder::kFinal);

/// Average-pools a (.,4,H,W) flow residual by 8 to the fusion grid.
torch::Tensor pool_flow_residuals(const torch::Tensor& full);

/// Pooled flow residuals for every frame of a clip, (T,4,H/8,W/8). Each
/// distinct frame pair is estimated once.
torch::Tensor flow_residuals_clip(const torch::Tensor& clip_frames, const flow::FlowEstimator& estimator,
                                  FlowOrder order = FlowOrder::kFinal);

}  // namespace mvf::temporal
