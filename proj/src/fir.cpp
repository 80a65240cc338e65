#include "fir.hpp"

namespace mvf {

namespace nn = torch::nn;

BatchRenormImpl::BatchRenormImpl(int64_t channels, double momentum, double eps, double r_max, double d_max)
    : momentum_(momentum), eps_(eps), r_max_(r_max), d_max_(d_max) {
  weight = register_parameter("weight", torch::ones({channels}));
  bias = register_parameter("bias", torch::zeros({channels}));
  running_mean = register_buffer("running_mean", torch::zeros({channels}));
  running_var = register_buffer("running_var", torch::ones({channels}));
  batches_tracked = register_buffer("batches_tracked", torch::zeros({}, torch::kInt64));
}

torch::Tensor BatchRenormImpl::forward(const torch::Tensor& x) {
  const auto shape = std::vector<int64_t>{1, -1, 1, 1};
  torch::Tensor xhat;
  if (is_training()) {
    auto mean = x.mean({0, 2, 3});
    auto var = x.var({0, 2, 3}, /*unbiased=*/false);
    auto std = (var + eps_).sqrt();
    torch::NoGradGuard guard;
    if (batches_tracked.item<int64_t>() == 0) {
      running_mean.copy_(mean);
      running_var.copy_(var);
    }
    auto running_std = (running_var + eps_).sqrt();
    auto r = (std / running_std).clamp(1.0 / r_max_, r_max_);
    auto d = ((mean - running_mean) / running_std).clamp(-d_max_, d_max_);
    running_mean.mul_(1 - momentum_).add_(mean, momentum_);
    running_var.mul_(1 - momentum_).add_(var, momentum_);
    batches_tracked.add_(1);
    {
      torch::AutoGradMode enable(true);
      xhat = (x - mean.view(shape)) / std.view(shape);
      if (!batch_statistics) xhat = xhat * r.view(shape) + d.view(shape);
    }
  } else {
    xhat = (x - running_mean.view(shape)) / (running_var + eps_).sqrt().view(shape);
  }
  return xhat * weight.view(shape) + bias.view(shape);
}

BatchRenorm make_norm(int64_t channels) { return BatchRenorm(channels); }

void use_batch_statistics(torch::nn::Module& module, bool enabled) {
  for (auto& m : module.modules(/*include_self=*/true))
    if (auto* norm = dynamic_cast<BatchRenormImpl*>(m.get())) norm->batch_statistics = enabled;
}

SqueezeExcitationImpl::SqueezeExcitationImpl(int64_t channels, int64_t squeezed) {
  reduce_ = register_module("reduce", nn::Conv2d(nn::Conv2dOptions(channels, squeezed, 1)));
  expand_ = register_module("expand", nn::Conv2d(nn::Conv2dOptions(squeezed, channels, 1)));
}

torch::Tensor SqueezeExcitationImpl::forward(const torch::Tensor& x) {
  auto s = torch::adaptive_avg_pool2d(x, {1, 1});
  s = torch::sigmoid(expand_(torch::silu(reduce_(s))));
  return x * s;
}

FirBlockImpl::FirBlockImpl(int64_t in, int64_t out, int64_t stride, int64_t expand, bool squeeze_excite) {
  const int64_t hidden = in * expand;
  fused_ = register_module("fused", nn::Conv2d(nn::Conv2dOptions(in, hidden, 3).stride(stride).padding(1).bias(false)));
  norm0_ = register_module("norm0", make_norm(hidden));
  if (squeeze_excite) se_ = register_module("se", SqueezeExcitation(hidden, std::max<int64_t>(1, in / 4)));
  project_ = register_module("project", nn::Conv2d(nn::Conv2dOptions(hidden, out, 1).bias(false)));
  norm1_ = register_module("norm1", make_norm(out));
  skip_ = stride == 1 && in == out;
}

torch::Tensor FirBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::silu(norm0_(fused_(x)));
  if (se_) y = se_(y);
  y = norm1_(project_(y));
  return skip_ ? y + x : y;
}

nn::Sequential conv_norm_act(int64_t in, int64_t out, int64_t stride) {
  return nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false)),
                        make_norm(out), nn::SiLU());
}

}  // namespace mvf
