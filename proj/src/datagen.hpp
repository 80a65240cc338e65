// Deterministic synthetic data: camera-model-stamped frames for pretraining and
// manipulated clips with pixel-exact ground truth for the main task.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace mvf::datagen {

enum class ManipulationTag { kAuthentic, kSplice, kEdit, kTemporalInpaint };

std::string to_string(ManipulationTag tag);
ManipulationTag tag_from_string(const std::string& s);

enum class EditOp { kBlur, kSharpen, kContrast, kNoise };

EditOp edit_op_from_string(const std::string& s);
std::string to_string(EditOp op);

/// Re-encode ladder, ordered from mildest to harshest.
enum class Quality { kLossless, kHigh, kMedium, kStrong };

Quality quality_from_string(const std::string& s);
std::string to_string(Quality q);
/// JPEG-style quality factor used for the block-DCT quantizer (100 = lossless).
int quality_factor(Quality q);

struct CameraModelSpec {
  int model_id = 0;
  std::array<float, 9> filter_kernel{};
  double gamma = 1.0;
  double noise_std = 0.0;
  int quality = 100;
};

/// Fixed library of capture pipelines; distinct ids give distinct specs.
CameraModelSpec camera_model(int model_id);

/// filter -> gamma -> additive Gaussian noise -> block-DCT re-encode -> 8-bit.
/// `frame` is (3,H,W) float in [0,1].
torch::Tensor apply_camera(const CameraModelSpec& spec, const torch::Tensor& frame, uint64_t seed);

struct CameraDataset {
  torch::Tensor frames;  // (N,3,H,W)
  std::vector<int> model_ids;
  std::vector<CameraModelSpec> models;
};

CameraDataset make_camera_dataset(int num_models, int frames_per_model, int height, int width,
                                  uint64_t seed);

// ---- procedural scenes -------------------------------------------------------

struct Sprite {
  int width = 8;
  int height = 8;
  bool ellipse = false;
  std::array<float, 3> color{0.5f, 0.5f, 0.5f};
  uint64_t texture_seed = 0;
  float texture_amplitude = 0.15f;
  /// Top-left corner (x, y) per frame; motion is integer-pixel so the flow
  /// between any two frames is known exactly.
  std::vector<std::array<int, 2>> positions;
};

struct Scene {
  int height = 64;
  int width = 64;
  int frames = 9;
  std::array<std::array<float, 3>, 4> corner_colors{};  // TL, TR, BL, BR
  uint64_t texture_seed = 0;
  float texture_amplitude = 0.08f;
  std::vector<Sprite> sprites;
};

/// Random scene: gradient + value-noise texture + constant-velocity sprites.
Scene make_scene(int height, int width, int frames, uint64_t seed);
/// Frame t before any capture processing, (3,H,W) in [0,1].
torch::Tensor render_scene(const Scene& scene, int t);
/// Exact flow from frame `src` to frame `dst`, (2,H,W) with channels (u,v),
/// defined at source pixel positions. Background pixels carry zero flow.
torch::Tensor scene_flow(const Scene& scene, int src, int dst);

struct VideoClip {
  torch::Tensor frames;  // (T,3,H,W) float32 in [0,1]
  torch::Tensor masks;   // (T,H,W) uint8 in {0,1}
  std::vector<int> labels;
  ManipulationTag tag = ManipulationTag::kAuthentic;
  uint64_t seed = 0;

  int length() const { return static_cast<int>(frames.size(0)); }
  int height() const { return static_cast<int>(frames.size(2)); }
  int width() const { return static_cast<int>(frames.size(3)); }
};

/// Validates the clip invariants (T >= 5, H/W multiples of 32, label == any(mask)).
void validate_clip(const VideoClip& clip);

/// Renders and captures a scene through one camera pipeline. All masks zero.
VideoClip make_authentic_clip(const Scene& scene, const CameraModelSpec& camera, uint64_t seed);

struct ManipulationConfig {
  ManipulationTag tag = ManipulationTag::kEdit;
  double area_lo = 0.05;
  double area_hi = 0.2;
  std::vector<EditOp> edit_ops{EditOp::kBlur};
  uint64_t splice_source = 0;
  bool temporal_independence = false;
};

VideoClip make_manipulated_clip(const VideoClip& base, const ManipulationConfig& cfg, uint64_t seed);

/// Lossy block-DCT round trip of every frame; masks and labels are untouched.
VideoClip reencode_clip(const VideoClip& clip, Quality quality);

/// Quantizes to the 8-bit grid so frames survive a PNG round trip exactly.
torch::Tensor quantize8(const torch::Tensor& frames);

}  // namespace mvf::datagen
