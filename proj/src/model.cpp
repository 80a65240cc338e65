#include "model.hpp"

#include <cstdlib>

#include "errors.hpp"

namespace mvf {

AblationFlags AblationFlags::parse(const std::vector<std::string>& names) {
  AblationFlags f;
  for (const auto& n : names) {
    if (n == "no_spatial_residual") f.no_spatial_residual = true;
    else if (n == "no_rgb_context") f.no_rgb_context = true;
    else if (n == "no_temporal_residual") f.no_temporal_residual = true;
    else if (n == "no_optflow_residual") f.no_optflow_residual = true;
    else if (n == "standard_transformer") f.standard_transformer = true;
    else if (n == "no_msh") f.no_msh = true;
    else if (n == "fine_to_coarse") f.fine_to_coarse = true;
    else throw invalid_argument("unknown ablation flag: " + n);
  }
  f.validate();
  return f;
}

std::vector<std::string> AblationFlags::names() const {
  std::vector<std::string> out;
  if (no_spatial_residual) out.emplace_back("no_spatial_residual");
  if (no_rgb_context) out.emplace_back("no_rgb_context");
  if (no_temporal_residual) out.emplace_back("no_temporal_residual");
  if (no_optflow_residual) out.emplace_back("no_optflow_residual");
  if (standard_transformer) out.emplace_back("standard_transformer");
  if (no_msh) out.emplace_back("no_msh");
  if (fine_to_coarse) out.emplace_back("fine_to_coarse");
  return out;
}

void AblationFlags::validate() const {
  if (standard_transformer && fine_to_coarse)
    throw invalid_argument("contradictory ablation flags: standard_transformer + fine_to_coarse");
  if (standard_transformer && no_msh) throw invalid_argument("contradictory ablation flags: standard_transformer + no_msh");
  if (no_msh && fine_to_coarse) throw invalid_argument("contradictory ablation flags: no_msh + fine_to_coarse");
}

std::array<bool, 4> AblationFlags::enabled_modalities() const {
  return {!no_spatial_residual, !no_rgb_context, !no_temporal_residual, !no_optflow_residual};
}

msh::Routing AblationFlags::routing() const {
  if (standard_transformer) return msh::Routing::kStandardTransformer;
  if (no_msh) return msh::Routing::kFlat;
  if (fine_to_coarse) return msh::Routing::kFineToCoarse;
  return msh::Routing::kCoarseToFine;
}

bool AblationFlags::any() const { return !names().empty(); }

ForgeryNetImpl::ForgeryNetImpl(const ModelConfig& cfg) : config_(cfg) {
  spatial = register_module("spatial", spatial::SpatialResidualExtractor(cfg.constrained_filters, cfg.fir_expand));
  context = register_module("context", spatial::ContextExtractor(cfg.context_channels, cfg.fir_expand));
  temporal = register_module("temporal", temporal::TemporalTrunk(cfg.fir_expand));
  if (cfg.temporal_fusion_conv) {
    temporal_fusion = register_module(
        "temporal_fusion",
        torch::nn::Conv2d(torch::nn::Conv2dOptions(temporal::kResidualChannels, temporal::kResidualChannels, 1)));
  }
  const auto lay = layout();
  msh::HierarchyOptions ho;
  ho.in_channels = lay.total();
  ho.embed_dim = cfg.embed_dim;
  ho.heads = cfg.heads;
  ho.layers_per_scale = cfg.encoder_layers;
  ho.flat_layers = cfg.flat_encoder_layers;
  ho.scales = cfg.scales;
  ho.reference_height = cfg.reference_height;
  ho.reference_width = cfg.reference_width;
  hierarchy = register_module("hierarchy", msh::Hierarchy(ho));
  detection = register_module("detection", heads::DetectionHead(cfg.embed_dim));
  localization = register_module("localization", heads::LocalizationHead(lay.total(), cfg.embed_dim));
  set_ablation(AblationFlags::parse(cfg.ablation));
}

msh::FusionLayout ForgeryNetImpl::layout() const {
  return msh::FusionLayout{{spatial::kResidualChannels, config_.context_channels, temporal::kResidualChannels,
                            temporal::kFlowChannels}};
}

void ForgeryNetImpl::set_ablation(const AblationFlags& flags) {
  flags.validate();
  ablation_ = flags;
  config_.ablation = flags.names();
}

torch::Tensor ForgeryNetImpl::fuse(const torch::Tensor& frames, const torch::Tensor& flow_features) {
  spatial::check_frames(frames);
  const auto t = frames.size(0);
  const auto h = frames.size(2) / 8;
  const auto w = frames.size(3) / 8;
  const auto on = ablation_.enabled_modalities();
  const auto lay = layout();
  auto opts = frames.options();
  auto zeros = [&](msh::Modality m) { return torch::zeros({t, lay.width(m), h, w}, opts); };

  auto f = on[0] ? spatial(frames) : zeros(msh::Modality::kSpatialResidual);
  auto c = on[1] ? context(frames) : zeros(msh::Modality::kRgbContext);
  torch::Tensor tr;
  if (on[2]) {
    tr = temporal::temporal_residuals_clip(temporal(frames));
    if (temporal_fusion) tr = temporal_fusion(tr);
  } else {
    tr = zeros(msh::Modality::kTemporalResidual);
  }
  torch::Tensor o;
  if (on[3]) {
    if (!flow_features.defined()) throw invalid_argument("flow features are required unless no_optflow_residual is set");
    if (flow_features.size(0) != t || flow_features.size(1) != temporal::kFlowChannels || flow_features.size(2) != h ||
        flow_features.size(3) != w)
      throw shape_error("flow features must be (T,4,H/8,W/8)");
    o = flow_features.to(opts);
  } else {
    o = zeros(msh::Modality::kFlowResidual);
  }
  return msh::fuse_modalities(f, c, tr, o, on);
}

ForwardOutput ForgeryNetImpl::forward(const torch::Tensor& frames, const torch::Tensor& flow_features) {
  ForwardOutput out;
  out.xi = fuse(frames, flow_features);
  out.hierarchy = hierarchy->forward(out.xi, ablation_.routing());
  out.score_logits = detection(out.hierarchy.final);
  out.mask_logits = localization(out.hierarchy.final, out.xi, frames.size(2), frames.size(3)).squeeze(1);
  return out;
}

ForgeryNet make_model(const ModelConfig& cfg) { return ForgeryNet(cfg); }

std::shared_ptr<const flow::FlowEstimator> make_flow_estimator(const ModelConfig& cfg, const std::string& clip_dir) {
  if (cfg.flow_estimator == "precomputed") {
    std::string dir = cfg.flow_dir.empty() ? clip_dir : cfg.flow_dir;
    if (dir.empty()) throw config_error("precomputed flow needs model.flow_dir or a clip directory");
    return std::make_shared<flow::PrecomputedFlow>(dir);
  }
  if (cfg.flow_estimator != "builtin") throw config_error("unknown flow estimator: " + cfg.flow_estimator);
  flow::BuiltinFlowOptions o;
  o.levels = cfg.flow_levels;
  o.iterations = cfg.flow_iterations;
  o.smoothness = cfg.flow_smoothness;
  auto builtin = std::make_shared<flow::BuiltinFlow>(o);
  if (const char* cache = std::getenv("MVF_CACHE"); cache && *cache) {
    const std::string salt = "hs" + std::to_string(o.levels) + "_" + std::to_string(o.iterations) + "_" +
                             std::to_string(o.warps) + "_" + std::to_string(o.smoothness);
    return std::make_shared<flow::CachedFlow>(builtin, cache, salt);
  }
  return builtin;
}

torch::Tensor clip_flow_features(const torch::Tensor& frames, const ModelConfig& cfg, const std::string& clip_dir) {
  const auto flags = AblationFlags::parse(cfg.ablation);
  if (flags.no_optflow_residual)
    return torch::zeros({frames.size(0), temporal::kFlowChannels, frames.size(2) / 8, frames.size(3) / 8});
  const auto est = make_flow_estimator(cfg, clip_dir);
  const auto order = cfg.flow_order == "swapped" ? temporal::FlowOrder::kSwapped : temporal::FlowOrder::kFinal;
  return temporal::flow_residuals_clip(frames, *est, order);
}

}  // namespace mvf
