// The full detection/localization network and its ablation switches.
#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "config.hpp"
#include "flow.hpp"
#include "heads.hpp"
#include "msh_transformer.hpp"
#include "spatial_features.hpp"
#include "temporal_features.hpp"

namespace mvf {

struct AblationFlags {
  bool no_spatial_residual = false;
  bool no_rgb_context = false;
  bool no_temporal_residual = false;
  bool no_optflow_residual = false;
  bool standard_transformer = false;
  bool no_msh = false;
  bool fine_to_coarse = false;

  /// Throws on unknown names and on contradictory combinations.
  static AblationFlags parse(const std::vector<std::string>& names);
  std::vector<std::string> names() const;
  void validate() const;
  /// F, C, T, O
  std::array<bool, 4> enabled_modalities() const;
  msh::Routing routing() const;
  bool any() const;
};

struct ForwardOutput {
  torch::Tensor score_logits;  // (T)
  torch::Tensor mask_logits;   // (T,H,W)
  torch::Tensor xi;            // (T,D_xi,H/8,W/8)
  msh::HierarchyOutput hierarchy;

  torch::Tensor scores() const { return torch::sigmoid(score_logits); }
  torch::Tensor masks() const { return torch::sigmoid(mask_logits); }
};

class ForgeryNetImpl : public torch::nn::Module {
 public:
  explicit ForgeryNetImpl(const ModelConfig& cfg);

  /// xi for every frame of one clip. `flow_features` is (T,4,H/8,W/8) or
  /// undefined when the flow modality is ablated.
  torch::Tensor fuse(const torch::Tensor& frames, const torch::Tensor& flow_features);
  ForwardOutput forward(const torch::Tensor& frames, const torch::Tensor& flow_features);

  void set_ablation(const AblationFlags& flags);
  const AblationFlags& ablation() const { return ablation_; }
  const ModelConfig& config() const { return config_; }
  msh::FusionLayout layout() const;

  /// Parameters that mutate under the constrained projection.
  torch::Tensor& constrained_weights() { return spatial->constrained->phi; }
  int project_constraints() { return spatial->constrained->project(); }

  spatial::SpatialResidualExtractor spatial{nullptr};
  spatial::ContextExtractor context{nullptr};
  temporal::TemporalTrunk temporal{nullptr};
  torch::nn::Conv2d temporal_fusion{nullptr};
  msh::Hierarchy hierarchy{nullptr};
  heads::DetectionHead detection{nullptr};
  heads::LocalizationHead localization{nullptr};

 private:
  ModelConfig config_;
  AblationFlags ablation_;
};
TORCH_MODULE(ForgeryNet);

/// ablation flags carried in the config are applied on construction
ForgeryNet make_model(const ModelConfig& cfg);

/// Estimator selected by the model config. `clip_dir` locates per-clip
/// precomputed flows; the built-in estimator is disk-cached under $MVF_CACHE
/// when that variable is set.
std::shared_ptr<const flow::FlowEstimator> make_flow_estimator(const ModelConfig& cfg, const std::string& clip_dir = {});

/// Pooled flow residuals (T,4,H/8,W/8) for a clip, or zeros when the flow
/// modality is ablated.
torch::Tensor clip_flow_features(const torch::Tensor& frames, const ModelConfig& cfg,
                                 const std::string& clip_dir = {});

}  // namespace mvf
