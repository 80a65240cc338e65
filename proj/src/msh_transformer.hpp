// Multi-scale hierarchical transformer: fuses the four modalities into xi,
// pools xi into 2^k x 2^k embedding grids, and runs per-scale encoder stacks
// linked coarse-to-fine by resolution-aware connectors.
#pragma once

#include <array>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace mvf::msh {

// ---- modality fusion ---------------------------------------------------------

enum class Modality { kSpatialResidual = 0, kRgbContext = 1, kTemporalResidual = 2, kFlowResidual = 3 };

/// Channel layout of xi: F, C, T, O in that order.
struct FusionLayout {
  std::array<int64_t, 4> widths{256, 64, 128, 4};
  int64_t total() const { return widths[0] + widths[1] + widths[2] + widths[3]; }
  int64_t offset(Modality m) const;
  int64_t width(Modality m) const { return widths[static_cast<int>(m)]; }
};

/// Disabled modalities keep their channels but are zero-filled.
torch::Tensor fuse_modalities(const torch::Tensor& f, const torch::Tensor& c, const torch::Tensor& t,
                              const torch::Tensor& o, const std::array<bool, 4>& enabled = {true, true, true, true});

// ---- pooling and connectors --------------------------------------------------

/// Adaptive average pool of (B,D,H,W) onto a 2^k x 2^k grid. Throws when 2^k
/// exceeds either spatial dim.
torch::Tensor pool_grid(const torch::Tensor& xi, int k);

/// Adaptive average pool that also accepts grids finer than the input
/// (cells then replicate input values). Used by the pretraining heads.
torch::Tensor pool_grid_any(const torch::Tensor& x, int k);

/// (B,C,h,w) -> (B,C,2h,2w), originals at even indices, zeros elsewhere.
torch::Tensor zero_interleave(const torch::Tensor& x);

/// Separable bilinear kernel outer([.5,1,.5], [.5,1,.5]) as a (3,3) tensor.
torch::Tensor bilinear_kernel(torch::ScalarType dtype = torch::kFloat32);

/// zero_interleave followed by per-channel 3x3 bilinear filtering (zero padded).
torch::Tensor upsample2x(const torch::Tensor& x);

/// upsample2x(G_prev + psi_prev) + psi_cur
torch::Tensor connect_scales(const torch::Tensor& g_prev, const torch::Tensor& psi_prev, const torch::Tensor& psi_cur);

/// Fine-to-coarse counterpart: avg_pool2(G_prev + psi_prev) + psi_cur
torch::Tensor connect_scales_down(const torch::Tensor& g_prev, const torch::Tensor& psi_prev,
                                  const torch::Tensor& psi_cur);

/// (B,D,h,w) <-> (B,h*w,D), row-major cells.
torch::Tensor grid_to_tokens(const torch::Tensor& grid);
torch::Tensor tokens_to_grid(const torch::Tensor& tokens, int64_t h, int64_t w);

// ---- encoder -----------------------------------------------------------------

class MultiHeadSelfAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadSelfAttentionImpl(int64_t dim, int64_t heads);
  torch::Tensor forward(const torch::Tensor& tokens);

  torch::nn::Linear qkv{nullptr};
  torch::nn::Linear out{nullptr};

 private:
  int64_t heads_;
};
TORCH_MODULE(MultiHeadSelfAttention);

/// Pre-norm block: Z' = MHSA(LN(Z)) + Z ; Y = MLP(LN(Z')) + Z'.
class EncoderBlockImpl : public torch::nn::Module {
 public:
  EncoderBlockImpl(int64_t dim, int64_t heads, int64_t mlp_ratio = 2);
  torch::Tensor forward(const torch::Tensor& tokens);
  /// Zeroes the attention output projection and the last MLP layer so the
  /// block reduces to the identity.
  void zero_residual_branches();

  torch::nn::LayerNorm norm1{nullptr};
  MultiHeadSelfAttention attention{nullptr};
  torch::nn::LayerNorm norm2{nullptr};
  torch::nn::Linear mlp_in{nullptr};
  torch::nn::Linear mlp_out{nullptr};
};
TORCH_MODULE(EncoderBlock);

class EncoderStackImpl : public torch::nn::Module {
 public:
  EncoderStackImpl(int64_t dim, int64_t heads, int64_t layers);
  torch::Tensor forward(const torch::Tensor& tokens);
  void zero_residual_branches();
  std::vector<EncoderBlock> blocks;
};
TORCH_MODULE(EncoderStack);

// ---- hierarchy ---------------------------------------------------------------

enum class Routing {
  kCoarseToFine,
  kFineToCoarse,
  kStandardTransformer,  // flat encoder over fixed-kernel tokens of xi; resolution-locked
  kFlat,                 // no multi-scale hierarchy: concat of all scales at the finest grid
};

struct HierarchyOptions {
  int64_t in_channels = 452;
  int64_t embed_dim = 256;
  int64_t heads = 4;
  int64_t layers_per_scale = 2;
  int64_t flat_layers = 8;
  std::vector<int> scales{2, 3, 4, 5};
  int64_t reference_height = 256;  // frame pixels; xi is 1/8 of this
  int64_t reference_width = 256;
};

struct HierarchyOutput {
  /// Per-scale transformer outputs G^(k) as (B,D_e,2^k,2^k), indexed like
  /// `scales`. Flat routes fill only the finest entry.
  std::vector<torch::Tensor> grids;
  /// Output of the last processed scale; what the heads consume.
  torch::Tensor final;
};

class HierarchyImpl : public torch::nn::Module {
 public:
  explicit HierarchyImpl(HierarchyOptions options);

  /// psi^(k): pool xi onto the 2^k grid, then the shared D_xi -> D_e projection.
  torch::Tensor embed(const torch::Tensor& xi, int k);
  HierarchyOutput forward(const torch::Tensor& xi, Routing routing = Routing::kCoarseToFine);

  const HierarchyOptions& options() const { return options_; }
  torch::Tensor& positional(int k);
  EncoderStack& stack(int k);

  torch::nn::Linear projection{nullptr};
  EncoderStack flat_stack{nullptr};
  torch::nn::Linear flat_merge{nullptr};
  torch::Tensor flat_positional;      // (1, 4^kmax, D_e)
  torch::Tensor standard_positional;  // (1, ref tokens, D_e)

 private:
  HierarchyOutput coarse_to_fine(const torch::Tensor& xi);
  HierarchyOutput fine_to_coarse(const torch::Tensor& xi);
  HierarchyOutput standard(const torch::Tensor& xi);
  HierarchyOutput flat(const torch::Tensor& xi);
  int index_of(int k) const;

  HierarchyOptions options_;
  std::vector<torch::Tensor> positional_;
  std::vector<EncoderStack> stacks_;
  int64_t standard_grid_h_ = 0;
  int64_t standard_grid_w_ = 0;
  int64_t standard_kernel_h_ = 1;
  int64_t standard_kernel_w_ = 1;
};
TORCH_MODULE(Hierarchy);

}  // namespace mvf::msh
