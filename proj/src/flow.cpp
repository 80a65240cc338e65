#include "flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "errors.hpp"

namespace mvf::flow {

namespace {

constexpr float kFloMagic = 202021.25f;

struct Plane {
  int w = 0;
  int h = 0;
  std::vector<float> d;
  Plane() = default;
  Plane(int w_, int h_, float v = 0.f) : w(w_), h(h_), d(static_cast<std::size_t>(w_) * h_, v) {}
  float& at(int x, int y) { return d[static_cast<std::size_t>(y) * w + x]; }
  float at(int x, int y) const { return d[static_cast<std::size_t>(y) * w + x]; }
  float clamped(int x, int y) const { return at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); }
  float bilinear(float x, float y) const {
    x = std::clamp(x, 0.f, static_cast<float>(w - 1));
    y = std::clamp(y, 0.f, static_cast<float>(h - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const float fx = x - x0;
    const float fy = y - y0;
    return (at(x0, y0) * (1 - fx) + at(x1, y0) * fx) * (1 - fy) + (at(x0, y1) * (1 - fx) + at(x1, y1) * fx) * fy;
  }
};

Plane from_tensor(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat32).contiguous();
  Plane p(static_cast<int>(c.size(1)), static_cast<int>(c.size(0)));
  std::memcpy(p.d.data(), c.data_ptr<float>(), p.d.size() * sizeof(float));
  return p;
}

// 2x2 box downsample (odd trailing row/column folded in by clamping).
Plane downsample(const Plane& p) {
  Plane out((p.w + 1) / 2, (p.h + 1) / 2);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      out.at(x, y) = 0.25f * (p.clamped(2 * x, 2 * y) + p.clamped(2 * x + 1, 2 * y) + p.clamped(2 * x, 2 * y + 1) +
                              p.clamped(2 * x + 1, 2 * y + 1));
  return out;
}

// Nearest-cell upsample to (w, h) with displacement rescaling.
Plane upsample_flow(const Plane& p, int w, int h, float scale) {
  Plane out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = scale * p.clamped(x / 2, y / 2);
  return out;
}

// Horn-Schunck neighborhood average (1/6 edge neighbors, 1/12 corners).
void local_mean(const Plane& p, Plane& out) {
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) {
      out.at(x, y) = (p.clamped(x - 1, y) + p.clamped(x + 1, y) + p.clamped(x, y - 1) + p.clamped(x, y + 1)) / 6.f +
                     (p.clamped(x - 1, y - 1) + p.clamped(x + 1, y - 1) + p.clamped(x - 1, y + 1) +
                      p.clamped(x + 1, y + 1)) / 12.f;
    }
}

void refine(const Plane& src, const Plane& dst, Plane& u, Plane& v, const BuiltinFlowOptions& o) {
  const int w = src.w;
  const int h = src.h;
  const float alpha2 = static_cast<float>(o.smoothness * o.smoothness);
  Plane ix(w, h), iy(w, h), it(w, h), ubar(w, h), vbar(w, h);
  for (int warp = 0; warp < o.warps; ++warp) {
    const Plane u0 = u;
    const Plane v0 = v;
    Plane warped(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) warped.at(x, y) = dst.bilinear(x + u0.at(x, y), y + v0.at(x, y));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const float gx_s = 0.5f * (src.clamped(x + 1, y) - src.clamped(x - 1, y));
        const float gy_s = 0.5f * (src.clamped(x, y + 1) - src.clamped(x, y - 1));
        const float gx_d = 0.5f * (warped.clamped(x + 1, y) - warped.clamped(x - 1, y));
        const float gy_d = 0.5f * (warped.clamped(x, y + 1) - warped.clamped(x, y - 1));
        ix.at(x, y) = 0.5f * (gx_s + gx_d);
        iy.at(x, y) = 0.5f * (gy_s + gy_d);
        it.at(x, y) = warped.at(x, y) - src.at(x, y);
      }
    for (int iter = 0; iter < o.iterations; ++iter) {
      local_mean(u, ubar);
      local_mean(v, vbar);
      for (std::size_t i = 0; i < u.d.size(); ++i) {
        const float gx = ix.d[i];
        const float gy = iy.d[i];
        const float r = gx * (ubar.d[i] - u0.d[i]) + gy * (vbar.d[i] - v0.d[i]) + it.d[i];
        const float k = r / (alpha2 + gx * gx + gy * gy);
        u.d[i] = ubar.d[i] - gx * k;
        v.d[i] = vbar.d[i] - gy * k;
      }
    }
  }
}

uint64_t fnv1a(const void* data, std::size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 4);
  uint32_t bits;
  std::memcpy(&bits, &value, 4);
  const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                              static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw io_error("truncated .flo file");
  const uint32_t bits = static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
                        static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
  T value;
  std::memcpy(&value, &bits, 4);
  return value;
}

}  // namespace

torch::Tensor to_gray(const torch::Tensor& frame) {
  if (frame.dim() == 2) return frame.to(torch::kFloat32);
  if (frame.dim() != 3 || frame.size(0) != 3) throw shape_error("expected (3,H,W) frame");
  return (0.299 * frame[0] + 0.587 * frame[1] + 0.114 * frame[2]).to(torch::kFloat32);
}

torch::Tensor BuiltinFlow::estimate(const FramePair& pair) const {
  if (pair.source.sizes() != pair.target.sizes()) throw shape_error("flow frames differ in shape");
  return estimate_gray(to_gray(pair.source), to_gray(pair.target));
}

torch::Tensor BuiltinFlow::estimate_gray(const torch::Tensor& x, const torch::Tensor& y) const {
  torch::NoGradGuard guard;
  if (x.sizes() != y.sizes() || x.dim() != 2) throw shape_error("flow frames must be equal-size (H,W)");
  if (!torch::isfinite(x).all().item<bool>() || !torch::isfinite(y).all().item<bool>())
    throw numeric_error("non-finite pixel in flow input");

  std::vector<Plane> src{from_tensor(x)};
  std::vector<Plane> dst{from_tensor(y)};
  for (int l = 1; l < std::max(1, options_.levels); ++l) {
    if (src.back().w < 8 || src.back().h < 8) break;
    src.push_back(downsample(src.back()));
    dst.push_back(downsample(dst.back()));
  }
  Plane u(src.back().w, src.back().h);
  Plane v(src.back().w, src.back().h);
  for (int l = static_cast<int>(src.size()) - 1; l >= 0; --l) {
    if (u.w != src[l].w || u.h != src[l].h) {
      u = upsample_flow(u, src[l].w, src[l].h, 2.f);
      v = upsample_flow(v, src[l].w, src[l].h, 2.f);
    }
    refine(src[l], dst[l], u, v, options_);
  }
  auto out = torch::empty({2, x.size(0), x.size(1)});
  std::memcpy(out[0].data_ptr<float>(), u.d.data(), u.d.size() * sizeof(float));
  std::memcpy(out[1].data_ptr<float>(), v.d.data(), v.d.size() * sizeof(float));
  return out;
}

std::string PrecomputedFlow::path_for(int source_index, int target_index) const {
  char name[64];
  std::snprintf(name, sizeof name, "flow_%04d_%04d.flo", source_index, target_index);
  return (std::filesystem::path(directory_) / name).string();
}

torch::Tensor PrecomputedFlow::estimate(const FramePair& pair) const {
  if (pair.source_index == pair.target_index)
    return torch::zeros({2, pair.source.size(-2), pair.source.size(-1)});
  auto flow = read_flo(path_for(pair.source_index, pair.target_index));
  if (flow.size(1) != pair.source.size(-2) || flow.size(2) != pair.source.size(-1))
    throw shape_error("precomputed flow " + path_for(pair.source_index, pair.target_index) +
                      " does not match frame size");
  return flow;
}

CachedFlow::CachedFlow(std::shared_ptr<const FlowEstimator> inner, std::string cache_dir, std::string salt)
    : inner_(std::move(inner)), cache_dir_(std::move(cache_dir)), salt_(std::move(salt)) {
  std::filesystem::create_directories(cache_dir_);
}

torch::Tensor CachedFlow::estimate(const FramePair& pair) const {
  auto s = pair.source.to(torch::kFloat32).contiguous();
  auto t = pair.target.to(torch::kFloat32).contiguous();
  uint64_t h = fnv1a(salt_.data(), salt_.size());
  h = fnv1a(s.data_ptr<float>(), s.numel() * sizeof(float), h);
  h = fnv1a(t.data_ptr<float>(), t.numel() * sizeof(float), h);
  char name[64];
  std::snprintf(name, sizeof name, "flow_%016llx.flo", static_cast<unsigned long long>(h));
  const auto path = (std::filesystem::path(cache_dir_) / name).string();
  if (std::filesystem::exists(path)) return read_flo(path);
  auto flow = inner_->estimate(pair);
  const auto tmp = path + ".tmp" + std::to_string(reinterpret_cast<uintptr_t>(&flow));
  write_flo(tmp, flow);
  std::filesystem::rename(tmp, path);
  return flow;
}

void write_flo(const std::string& path, const torch::Tensor& flow) {
  if (flow.dim() != 3 || flow.size(0) != 2) throw shape_error("flow must be (2,H,W)");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  const auto h = static_cast<int32_t>(flow.size(1));
  const auto w = static_cast<int32_t>(flow.size(2));
  put_le(out, kFloMagic);
  put_le(out, w);
  put_le(out, h);
  auto hw2 = flow.to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  const float* p = hw2.data_ptr<float>();
  for (int64_t i = 0; i < hw2.numel(); ++i) put_le(out, p[i]);
}

torch::Tensor read_flo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw not_found("flow file not found: " + path);
  if (get_le<float>(in) != kFloMagic) throw io_error("bad .flo magic in " + path);
  const auto w = get_le<int32_t>(in);
  const auto h = get_le<int32_t>(in);
  if (w <= 0 || h <= 0 || w > (1 << 15) || h > (1 << 15)) throw io_error("bad .flo dimensions in " + path);
  auto hw2 = torch::empty({h, w, 2});
  float* p = hw2.data_ptr<float>();
  for (int64_t i = 0; i < hw2.numel(); ++i) p[i] = get_le<float>(in);
  return hw2.permute({2, 0, 1}).contiguous();
}

}  // namespace mvf::flow
