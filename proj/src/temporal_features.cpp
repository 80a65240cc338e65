#include "temporal_features.hpp"

#include <algorithm>
#include <map>

#include "errors.hpp"
#include "fir.hpp"

namespace mvf::temporal {

namespace nn = torch::nn;

std::array<int, 5> window_indices(int length, int t) {
  if (length <= 0 || t < 0 || t >= length) throw invalid_argument("frame index out of range");
  std::array<int, 5> idx{};
  for (int k = 0; k < 5; ++k) idx[k] = std::clamp(t - 2 + k, 0, length - 1);
  return idx;
}

TemporalWindow TemporalWindow::from_clip(const torch::Tensor& clip_frames, int t) {
  TemporalWindow w;
  w.indices = window_indices(static_cast<int>(clip_frames.size(0)), t);
  for (int k = 0; k < 5; ++k) w.frames[k] = clip_frames[w.indices[k]];
  return w;
}

TemporalWindow TemporalWindow::reversed() const {
  TemporalWindow w;
  for (int k = 0; k < 5; ++k) {
    w.frames[k] = frames[4 - k];
    w.indices[k] = indices[4 - k];
  }
  return w;
}

void TemporalWindow::validate() const {
  for (const auto& f : frames) {
    if (!f.defined() || f.dim() != 3 || f.size(0) != 3) throw shape_error("window frames must be (3,H,W)");
    if (f.sizes() != frames[2].sizes()) throw shape_error("window frames have mismatched shapes");
  }
}

TemporalTrunkImpl::TemporalTrunkImpl(int64_t expand) {
  residual_ = register_module("residual", nn::Conv2d(nn::Conv2dOptions(3, 3, 3).padding(1)));
  auto compress = conv_norm_act(3, 8);
  compress->extend(*conv_norm_act(8, 8));
  compress_ = register_module("compress", compress);
  blocks_ = register_module(
      "blocks", nn::Sequential(FirBlock(8, 16, 2, expand), FirBlock(16, 32, 2, expand), FirBlock(32, 64, 2, expand),
                               FirBlock(64, kTrunkChannels, 1, expand)));
}

torch::Tensor TemporalTrunkImpl::forward(const torch::Tensor& frames) {
  auto x = frames + residual_(frames);
  return blocks_->forward(compress_->forward(x));
}

torch::Tensor temporal_residuals(TemporalTrunk& trunk, const TemporalWindow& win) {
  win.validate();
  if (win.frames[2].size(1) % 8 != 0 || win.frames[2].size(2) % 8 != 0)
    throw shape_error("frame dims must be divisible by 8");
  auto g = trunk->forward(torch::stack({win.frames[1], win.frames[2], win.frames[3]}));
  return torch::cat({g[1] - g[0], g[1] - g[2]}, 0);
}

torch::Tensor temporal_residuals_clip(const torch::Tensor& trunk_out) {
  const int length = static_cast<int>(trunk_out.size(0));
  std::vector<int64_t> prev(length);
  std::vector<int64_t> next(length);
  for (int t = 0; t < length; ++t) {
    const auto idx = window_indices(length, t);
    prev[t] = idx[1];
    next[t] = idx[3];
  }
  auto opts = torch::TensorOptions().dtype(torch::kLong).device(trunk_out.device());
  auto g_prev = trunk_out.index_select(0, torch::tensor(prev, opts));
  auto g_next = trunk_out.index_select(0, torch::tensor(next, opts));
  return torch::cat({trunk_out - g_prev, trunk_out - g_next}, 1);
}

namespace {

class PairCache {
 public:
  PairCache(const flow::FlowEstimator& est, const TemporalWindow& win) : est_(est), win_(win) {}

  // Flow between window slots a -> b.
  torch::Tensor operator()(int a, int b) {
    const int src = win_.indices[a];
    const int dst = win_.indices[b];
    const auto key = std::pair{src, dst};
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    torch::Tensor f;
    if (src == dst && win_.frames[a].data_ptr() == win_.frames[b].data_ptr()) {
      f = torch::zeros({2, win_.frames[a].size(1), win_.frames[a].size(2)});
    } else {
      try {
        f = est_.estimate({win_.frames[a], win_.frames[b], src, dst});
      } catch (const std::exception& e) {
        throw Error(ErrorCode::kInternal, "flow estimation failed for frames " + std::to_string(src) + "->" +
                                              std::to_string(dst) + ": " + e.what());
      }
    }
    cache_.emplace(key, f);
    return f;
  }

 private:
  const flow::FlowEstimator& est_;
  const TemporalWindow& win_;
  std::map<std::pair<int, int>, torch::Tensor> cache_;
};

}  // namespace

torch::Tensor flow_residuals(const TemporalWindow& win, const flow::FlowEstimator& estimator, FlowOrder order) {
  torch::NoGradGuard guard;
  win.validate();
  PairCache nu(estimator, win);
  // slots: 0=t-2, 1=t-1, 2=t, 3=t+1, 4=t+2
  torch::Tensor forward;
  torch::Tensor backward;
  if (order == FlowOrder::kFinal) {
    forward = nu(1, 2) - nu(0, 1);
    backward = nu(3, 2) - nu(4, 3);
  } else {
    forward = nu(2, 1) - nu(1, 0);
    backward = nu(2, 3) - nu(3, 4);
  }
  return torch::cat({forward, backward}, 0);
}

torch::Tensor pool_flow_residuals(const torch::Tensor& full) {
  if (full.size(-1) % 8 != 0 || full.size(-2) % 8 != 0) throw shape_error("flow residual dims must be divisible by 8");
  if (full.dim() == 3) return torch::avg_pool2d(full.unsqueeze(0), 8).squeeze(0);
  return torch::avg_pool2d(full, 8);
}

torch::Tensor flow_residuals_clip(const torch::Tensor& clip_frames, const flow::FlowEstimator& estimator,
                                  FlowOrder order) {
  torch::NoGradGuard guard;
  const int length = static_cast<int>(clip_frames.size(0));
  std::map<std::pair<int, int>, torch::Tensor> flows;
  auto nu = [&](int src, int dst) {
    auto key = std::pair{src, dst};
    auto it = flows.find(key);
    if (it != flows.end()) return it->second;
    torch::Tensor f;
    if (src == dst) {
      f = torch::zeros({2, clip_frames.size(2), clip_frames.size(3)});
    } else {
      try {
        f = estimator.estimate({clip_frames[src], clip_frames[dst], src, dst});
      } catch (const std::exception& e) {
        throw Error(ErrorCode::kInternal, "flow estimation failed for frames " + std::to_string(src) + "->" +
                                              std::to_string(dst) + ": " + e.what());
      }
    }
    flows.emplace(key, f);
    return f;
  };
  std::vector<torch::Tensor> out;
  for (int t = 0; t < length; ++t) {
    const auto i = window_indices(length, t);
    torch::Tensor fwd;
    torch::Tensor bwd;
    if (order == FlowOrder::kFinal) {
      fwd = nu(i[1], i[2]) - nu(i[0], i[1]);
      bwd = nu(i[3], i[2]) - nu(i[4], i[3]);
    } else {
      fwd = nu(i[2], i[1]) - nu(i[1], i[0]);
      bwd = nu(i[2], i[3]) - nu(i[3], i[4]);
    }
    out.push_back(pool_flow_residuals(torch::cat({fwd, bwd}, 0)));
  }
  return torch::stack(out);
}

}  // namespace mvf::temporal
