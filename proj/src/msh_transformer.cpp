#include "msh_transformer.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace mvf::msh {

namespace nn = torch::nn;

int64_t FusionLayout::offset(Modality m) const {
  int64_t off = 0;
  for (int i = 0; i < static_cast<int>(m); ++i) off += widths[i];
  return off;
}

torch::Tensor fuse_modalities(const torch::Tensor& f, const torch::Tensor& c, const torch::Tensor& t,
                              const torch::Tensor& o, const std::array<bool, 4>& enabled) {
  const std::array<const torch::Tensor*, 4> parts{&f, &c, &t, &o};
  for (const auto* p : parts) {
    if (p->dim() != f.dim() || p->size(-1) != f.size(-1) || p->size(-2) != f.size(-2) ||
        (f.dim() == 4 && p->size(0) != f.size(0))) {
      throw shape_error("modalities must share batch and spatial dims");
    }
  }
  std::vector<torch::Tensor> pieces;
  for (int i = 0; i < 4; ++i) pieces.push_back(enabled[i] ? *parts[i] : torch::zeros_like(*parts[i]));
  return torch::cat(pieces, f.dim() == 4 ? 1 : 0);
}

torch::Tensor pool_grid(const torch::Tensor& xi, int k) {
  if (k < 0 || k > 12) throw invalid_argument("scale index out of range: " + std::to_string(k));
  const int64_t side = int64_t{1} << k;
  if (side > xi.size(-1) || side > xi.size(-2)) {
    throw shape_error("scale " + std::to_string(k) + " needs a " + std::to_string(side) + "x" + std::to_string(side) +
                      " grid but features are " + std::to_string(xi.size(-2)) + "x" + std::to_string(xi.size(-1)));
  }
  return torch::adaptive_avg_pool2d(xi, {side, side});
}

torch::Tensor pool_grid_any(const torch::Tensor& x, int k) {
  const int64_t side = int64_t{1} << k;
  return torch::adaptive_avg_pool2d(x, {side, side});
}

torch::Tensor zero_interleave(const torch::Tensor& x) {
  if (x.dim() != 4) throw shape_error("zero_interleave expects (B,C,h,w)");
  const auto b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  auto cols = torch::stack({x, torch::zeros_like(x)}, -1).view({b, c, h, 2 * w});
  return torch::stack({cols, torch::zeros_like(cols)}, 3).view({b, c, 2 * h, 2 * w});
}

torch::Tensor bilinear_kernel(torch::ScalarType dtype) {
  auto v = torch::tensor({0.5, 1.0, 0.5}, torch::TensorOptions().dtype(dtype));
  return torch::outer(v, v);
}

torch::Tensor upsample2x(const torch::Tensor& x) {
  const int64_t channels = x.size(1);
  auto kernel = bilinear_kernel(x.scalar_type()).to(x.device()).view({1, 1, 3, 3}).expand({channels, 1, 3, 3});
  return torch::nn::functional::conv2d(
      zero_interleave(x), kernel.contiguous(), torch::nn::functional::Conv2dFuncOptions().padding(1).groups(channels));
}

torch::Tensor connect_scales(const torch::Tensor& g_prev, const torch::Tensor& psi_prev, const torch::Tensor& psi_cur) {
  if (g_prev.sizes() != psi_prev.sizes()) throw shape_error("connector: G and psi of the previous scale differ");
  if (psi_cur.size(-1) != 2 * g_prev.size(-1) || psi_cur.size(-2) != 2 * g_prev.size(-2) ||
      psi_cur.size(1) != g_prev.size(1) || psi_cur.size(0) != g_prev.size(0)) {
    throw shape_error("connector: current scale must be twice the previous grid with equal width");
  }
  return upsample2x(g_prev + psi_prev) + psi_cur;
}

torch::Tensor connect_scales_down(const torch::Tensor& g_prev, const torch::Tensor& psi_prev,
                                  const torch::Tensor& psi_cur) {
  if (g_prev.sizes() != psi_prev.sizes()) throw shape_error("connector: G and psi of the previous scale differ");
  if (2 * psi_cur.size(-1) != g_prev.size(-1) || 2 * psi_cur.size(-2) != g_prev.size(-2))
    throw shape_error("connector: current scale must be half the previous grid");
  return torch::avg_pool2d(g_prev + psi_prev, 2) + psi_cur;
}

torch::Tensor grid_to_tokens(const torch::Tensor& grid) { return grid.flatten(2).transpose(1, 2); }

torch::Tensor tokens_to_grid(const torch::Tensor& tokens, int64_t h, int64_t w) {
  return tokens.transpose(1, 2).reshape({tokens.size(0), tokens.size(2), h, w});
}

MultiHeadSelfAttentionImpl::MultiHeadSelfAttentionImpl(int64_t dim, int64_t heads) : heads_(heads) {
  if (dim % heads != 0) throw invalid_argument("embed dim must be divisible by head count");
  qkv = register_module("qkv", nn::Linear(dim, 3 * dim));
  out = register_module("out", nn::Linear(dim, dim));
}

torch::Tensor MultiHeadSelfAttentionImpl::forward(const torch::Tensor& tokens) {
  const auto b = tokens.size(0);
  const auto n = tokens.size(1);
  const auto d = tokens.size(2);
  const auto hd = d / heads_;
  auto qkv_t = qkv(tokens).view({b, n, 3, heads_, hd}).permute({2, 0, 3, 1, 4});
  auto q = qkv_t[0];
  auto k = qkv_t[1];
  auto v = qkv_t[2];
  auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd)), -1);
  auto y = torch::matmul(attn, v).permute({0, 2, 1, 3}).reshape({b, n, d});
  return out(y);
}

EncoderBlockImpl::EncoderBlockImpl(int64_t dim, int64_t heads, int64_t mlp_ratio) {
  norm1 = register_module("norm1", nn::LayerNorm(nn::LayerNormOptions({dim})));
  attention = register_module("attention", MultiHeadSelfAttention(dim, heads));
  norm2 = register_module("norm2", nn::LayerNorm(nn::LayerNormOptions({dim})));
  mlp_in = register_module("mlp_in", nn::Linear(dim, mlp_ratio * dim));
  mlp_out = register_module("mlp_out", nn::Linear(mlp_ratio * dim, dim));
}

torch::Tensor EncoderBlockImpl::forward(const torch::Tensor& tokens) {
  auto z = attention(norm1(tokens)) + tokens;
  return mlp_out(torch::gelu(mlp_in(norm2(z)))) + z;
}

void EncoderBlockImpl::zero_residual_branches() {
  torch::NoGradGuard guard;
  attention->out->weight.zero_();
  attention->out->bias.zero_();
  mlp_out->weight.zero_();
  mlp_out->bias.zero_();
}

EncoderStackImpl::EncoderStackImpl(int64_t dim, int64_t heads, int64_t layers) {
  for (int64_t i = 0; i < layers; ++i)
    blocks.push_back(register_module("block" + std::to_string(i), EncoderBlock(dim, heads)));
}

torch::Tensor EncoderStackImpl::forward(const torch::Tensor& tokens) {
  auto x = tokens;
  for (auto& b : blocks) x = b(x);
  return x;
}

void EncoderStackImpl::zero_residual_branches() {
  for (auto& b : blocks) b->zero_residual_branches();
}

HierarchyImpl::HierarchyImpl(HierarchyOptions options) : options_(std::move(options)) {
  auto& s = options_.scales;
  if (s.empty()) throw invalid_argument("at least one scale is required");
  std::sort(s.begin(), s.end());
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] != s[i - 1] + 1) throw invalid_argument("scales must be consecutive integers");
  }
  if (s.front() < 0) throw invalid_argument("scales must be non-negative");
  const auto d = options_.embed_dim;
  projection = register_module("projection", nn::Linear(options_.in_channels, d));
  for (int k : s) {
    positional_.push_back(register_parameter("pos" + std::to_string(k), torch::randn({1, int64_t{1} << (2 * k), d}) * 0.02));
    stacks_.push_back(register_module("stack" + std::to_string(k), EncoderStack(d, options_.heads, options_.layers_per_scale)));
  }
  const int kmax = s.back();
  const int64_t side = int64_t{1} << kmax;
  flat_stack = register_module("flat_stack", EncoderStack(d, options_.heads, options_.flat_layers));
  flat_merge = register_module("flat_merge", nn::Linear(static_cast<int64_t>(s.size()) * d, d));
  flat_positional = register_parameter("flat_pos", torch::randn({1, side * side, d}) * 0.02);

  const int64_t ref_h = options_.reference_height / 8;
  const int64_t ref_w = options_.reference_width / 8;
  if (ref_h >= side && ref_w >= side && ref_h % side == 0 && ref_w % side == 0) {
    standard_kernel_h_ = ref_h / side;
    standard_kernel_w_ = ref_w / side;
    standard_grid_h_ = side;
    standard_grid_w_ = side;
  } else {
    standard_grid_h_ = ref_h;
    standard_grid_w_ = ref_w;
  }
  standard_positional =
      register_parameter("standard_pos", torch::randn({1, standard_grid_h_ * standard_grid_w_, d}) * 0.02);
}

int HierarchyImpl::index_of(int k) const {
  const auto& s = options_.scales;
  auto it = std::find(s.begin(), s.end(), k);
  if (it == s.end()) throw invalid_argument("scale " + std::to_string(k) + " is not configured");
  return static_cast<int>(it - s.begin());
}

torch::Tensor& HierarchyImpl::positional(int k) { return positional_[index_of(k)]; }
EncoderStack& HierarchyImpl::stack(int k) { return stacks_[index_of(k)]; }

torch::Tensor HierarchyImpl::embed(const torch::Tensor& xi, int k) {
  if (xi.size(1) != options_.in_channels) throw shape_error("fused features have the wrong channel count");
  auto pooled = pool_grid(xi, k);
  const auto side = pooled.size(-1);
  return tokens_to_grid(projection(grid_to_tokens(pooled)), side, side);
}

HierarchyOutput HierarchyImpl::forward(const torch::Tensor& xi, Routing routing) {
  if (xi.dim() != 4) throw shape_error("fused features must be (B,D,h,w)");
  switch (routing) {
    case Routing::kCoarseToFine: return coarse_to_fine(xi);
    case Routing::kFineToCoarse: return fine_to_coarse(xi);
    case Routing::kStandardTransformer: return standard(xi);
    case Routing::kFlat: return flat(xi);
  }
  return coarse_to_fine(xi);
}

HierarchyOutput HierarchyImpl::coarse_to_fine(const torch::Tensor& xi) {
  HierarchyOutput out;
  torch::Tensor g_prev;
  torch::Tensor psi_prev;
  for (std::size_t i = 0; i < options_.scales.size(); ++i) {
    const int k = options_.scales[i];
    auto psi = embed(xi, k);
    auto b = i == 0 ? psi : connect_scales(g_prev, psi_prev, psi);
    const auto side = psi.size(-1);
    auto g = tokens_to_grid(stacks_[i](grid_to_tokens(b) + positional_[i]), side, side);
    out.grids.push_back(g);
    g_prev = g;
    psi_prev = psi;
  }
  out.final = out.grids.back();
  return out;
}

HierarchyOutput HierarchyImpl::fine_to_coarse(const torch::Tensor& xi) {
  const auto n = options_.scales.size();
  HierarchyOutput out;
  out.grids.resize(n);
  torch::Tensor g_prev;
  torch::Tensor psi_prev;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = n - 1 - step;
    const int k = options_.scales[i];
    auto psi = embed(xi, k);
    auto b = step == 0 ? psi : connect_scales_down(g_prev, psi_prev, psi);
    const auto side = psi.size(-1);
    auto g = tokens_to_grid(stacks_[i](grid_to_tokens(b) + positional_[i]), side, side);
    out.grids[i] = g;
    g_prev = g;
    psi_prev = psi;
  }
  out.final = out.grids.front();
  return out;
}

HierarchyOutput HierarchyImpl::standard(const torch::Tensor& xi) {
  const auto want_h = standard_grid_h_ * standard_kernel_h_;
  const auto want_w = standard_grid_w_ * standard_kernel_w_;
  if (xi.size(-2) != want_h || xi.size(-1) != want_w) {
    throw shape_error("standard transformer is fixed to " + std::to_string(options_.reference_height) + "x" +
                      std::to_string(options_.reference_width) + " input; got features " +
                      std::to_string(xi.size(-2)) + "x" + std::to_string(xi.size(-1)) + " (frame " +
                      std::to_string(xi.size(-2) * 8) + "x" + std::to_string(xi.size(-1) * 8) + ")");
  }
  auto pooled = torch::avg_pool2d(xi, {standard_kernel_h_, standard_kernel_w_});
  auto tokens = projection(grid_to_tokens(pooled)) + standard_positional;
  HierarchyOutput out;
  out.grids.resize(options_.scales.size());
  out.final = tokens_to_grid(flat_stack(tokens), standard_grid_h_, standard_grid_w_);
  out.grids.back() = out.final;
  return out;
}

HierarchyOutput HierarchyImpl::flat(const torch::Tensor& xi) {
  const int kmax = options_.scales.back();
  const int64_t side = int64_t{1} << kmax;
  std::vector<torch::Tensor> parts;
  for (int k : options_.scales) {
    auto psi = embed(xi, k);
    // each fine cell (i,j) reads its enclosing coarse cell
    const int64_t rep = side / psi.size(-1);
    parts.push_back(psi.repeat_interleave(rep, 2).repeat_interleave(rep, 3));
  }
  auto merged = flat_merge(grid_to_tokens(torch::cat(parts, 1))) + flat_positional;
  HierarchyOutput out;
  out.grids.resize(options_.scales.size());
  out.final = tokens_to_grid(flat_stack(merged), side, side);
  out.grids.back() = out.final;
  return out;
}

}  // namespace mvf::msh
