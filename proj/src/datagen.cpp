#include "datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "errors.hpp"

namespace mvf::datagen {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t mix(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL)); }

// Uniform in [-1, 1] from a lattice point.
float lattice(uint64_t seed, int x, int y) {
  const uint64_t h = mix(mix(seed, static_cast<uint64_t>(static_cast<uint32_t>(x))),
                         static_cast<uint64_t>(static_cast<uint32_t>(y)));
  return static_cast<float>((h >> 11) * (1.0 / 9007199254740992.0)) * 2.f - 1.f;
}

float value_noise(uint64_t seed, int x, int y, int spacing) {
  const auto fdiv = [](int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
  const int cx = fdiv(x, spacing);
  const int cy = fdiv(y, spacing);
  const float fx = static_cast<float>(x - cx * spacing) / spacing;
  const float fy = static_cast<float>(y - cy * spacing) / spacing;
  const float a = lattice(seed, cx, cy);
  const float b = lattice(seed, cx + 1, cy);
  const float c = lattice(seed, cx, cy + 1);
  const float d = lattice(seed, cx + 1, cy + 1);
  return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
}

void check_dims(int height, int width) {
  if (height <= 0 || width <= 0 || height % 32 != 0 || width % 32 != 0) {
    throw invalid_argument("frame size " + std::to_string(height) + "x" + std::to_string(width) +
                           " must be a positive multiple of 32");
  }
}

// Standard JPEG luminance table.
constexpr std::array<int, 64> kJpegLuma = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

std::array<float, 64> quant_table(int quality) {
  quality = std::clamp(quality, 1, 99);
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<float, 64> q{};
  for (int i = 0; i < 64; ++i) q[i] = static_cast<float>(std::max(1, (kJpegLuma[i] * scale + 50) / 100));
  return q;
}

const std::array<double, 64>& dct_basis() {
  static const std::array<double, 64> basis = [] {
    std::array<double, 64> b{};
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8);
      for (int x = 0; x < 8; ++x) b[u * 8 + x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16);
    }
    return b;
  }();
  return basis;
}

// In-place 8x8 block-DCT quantization of one float plane in [0,1].
void dct_quantize_plane(float* plane, int height, int width, int quality) {
  if (quality >= 100) return;
  const auto q = quant_table(quality);
  const auto& c = dct_basis();
  double block[64];
  double tmp[64];
  double coef[64];
  for (int by = 0; by + 8 <= height; by += 8) {
    for (int bx = 0; bx + 8 <= width; bx += 8) {
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) block[y * 8 + x] = plane[(by + y) * width + bx + x] * 255.0 - 128.0;
      // rows then columns
      for (int y = 0; y < 8; ++y)
        for (int u = 0; u < 8; ++u) {
          double s = 0;
          for (int x = 0; x < 8; ++x) s += c[u * 8 + x] * block[y * 8 + x];
          tmp[y * 8 + u] = s;
        }
      for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) {
          double s = 0;
          for (int y = 0; y < 8; ++y) s += c[v * 8 + y] * tmp[y * 8 + u];
          coef[v * 8 + u] = std::round(s / q[v * 8 + u]) * q[v * 8 + u];
        }
      for (int y = 0; y < 8; ++y)
        for (int u = 0; u < 8; ++u) {
          double s = 0;
          for (int v = 0; v < 8; ++v) s += c[v * 8 + y] * coef[v * 8 + u];
          tmp[y * 8 + u] = s;
        }
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          double s = 0;
          for (int u = 0; u < 8; ++u) s += c[u * 8 + x] * tmp[y * 8 + u];
          plane[(by + y) * width + bx + x] = static_cast<float>((s + 128.0) / 255.0);
        }
    }
  }
}

torch::Tensor filter3x3(const torch::Tensor& frame, const std::array<float, 9>& k) {
  auto weight = torch::from_blob(const_cast<float*>(k.data()), {1, 1, 3, 3}, torch::kFloat32).clone();
  auto x = torch::reflection_pad2d(frame.unsqueeze(1), {1, 1, 1, 1});
  return torch::conv2d(x, weight).squeeze(1);
}

}  // namespace

std::string to_string(ManipulationTag tag) {
  switch (tag) {
    case ManipulationTag::kAuthentic: return "authentic";
    case ManipulationTag::kSplice: return "splice";
    case ManipulationTag::kEdit: return "edit";
    case ManipulationTag::kTemporalInpaint: return "temporal_inpaint";
  }
  return "authentic";
}

ManipulationTag tag_from_string(const std::string& s) {
  if (s == "authentic") return ManipulationTag::kAuthentic;
  if (s == "splice") return ManipulationTag::kSplice;
  if (s == "edit") return ManipulationTag::kEdit;
  if (s == "temporal_inpaint") return ManipulationTag::kTemporalInpaint;
  throw invalid_argument("unknown manipulation tag: " + s);
}

EditOp edit_op_from_string(const std::string& s) {
  if (s == "blur") return EditOp::kBlur;
  if (s == "sharpen") return EditOp::kSharpen;
  if (s == "contrast") return EditOp::kContrast;
  if (s == "noise") return EditOp::kNoise;
  throw invalid_argument("unknown edit op: " + s);
}

std::string to_string(EditOp op) {
  switch (op) {
    case EditOp::kBlur: return "blur";
    case EditOp::kSharpen: return "sharpen";
    case EditOp::kContrast: return "contrast";
    case EditOp::kNoise: return "noise";
  }
  return "blur";
}

Quality quality_from_string(const std::string& s) {
  if (s == "lossless") return Quality::kLossless;
  if (s == "high") return Quality::kHigh;
  if (s == "medium") return Quality::kMedium;
  if (s == "strong") return Quality::kStrong;
  throw invalid_argument("unknown quality level: " + s + " (expected lossless|high|medium|strong)");
}

std::string to_string(Quality q) {
  switch (q) {
    case Quality::kLossless: return "lossless";
    case Quality::kHigh: return "high";
    case Quality::kMedium: return "medium";
    case Quality::kStrong: return "strong";
  }
  return "lossless";
}

int quality_factor(Quality q) {
  switch (q) {
    case Quality::kLossless: return 100;
    case Quality::kHigh: return 90;
    case Quality::kMedium: return 60;
    case Quality::kStrong: return 25;
  }
  return 100;
}

CameraModelSpec camera_model(int model_id) {
  if (model_id < 0) throw invalid_argument("camera model id must be non-negative");
  CameraModelSpec spec;
  spec.model_id = model_id;
  // Base kernels cycle through five shapes; strength grows with the cycle index.
  static constexpr std::array<std::array<float, 9>, 5> shapes = {{
      {1, 2, 1, 2, 4, 2, 1, 2, 1},     // isotropic
      {0, 0, 0, 1, 2, 1, 0, 0, 0},     // horizontal
      {0, 1, 0, 0, 2, 0, 0, 1, 0},     // vertical
      {1, 0, 0, 0, 2, 0, 0, 0, 1},     // diagonal
      {0, -1, 0, -1, 8, -1, 0, -1, 0}, // sharpening
  }};
  const auto& shape = shapes[model_id % 5];
  float sum = 0;
  for (float v : shape) sum += v;
  const float strength = 0.6f + 0.1f * static_cast<float>((model_id / 5) % 4);
  for (int i = 0; i < 9; ++i) {
    const float impulse = i == 4 ? 1.f : 0.f;
    spec.filter_kernel[i] = (1 - strength) * impulse + strength * shape[i] / sum;
  }
  spec.gamma = 0.8 + 0.09 * model_id;
  spec.noise_std = 0.003 + 0.006 * (model_id % 4);
  spec.quality = 95 - 8 * (model_id % 6);
  return spec;
}

torch::Tensor quantize8(const torch::Tensor& frames) {
  return torch::round(frames.clamp(0.0, 1.0) * 255.0) / 255.0;
}

torch::Tensor apply_camera(const CameraModelSpec& spec, const torch::Tensor& frame, uint64_t seed) {
  torch::NoGradGuard guard;
  auto x = filter3x3(frame.to(torch::kFloat32).contiguous(), spec.filter_kernel).clamp(0.0, 1.0);
  x = torch::pow(x, spec.gamma);
  std::mt19937_64 rng(mix(seed, 0xC0FFEE + static_cast<uint64_t>(spec.model_id)));
  std::normal_distribution<float> normal(0.f, static_cast<float>(spec.noise_std));
  x = x.contiguous();
  float* p = x.data_ptr<float>();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) p[i] = std::clamp(p[i] + normal(rng), 0.f, 1.f);
  const int height = static_cast<int>(x.size(1));
  const int width = static_cast<int>(x.size(2));
  for (int c = 0; c < 3; ++c) dct_quantize_plane(p + static_cast<int64_t>(c) * height * width, height, width, spec.quality);
  return quantize8(x);
}

CameraDataset make_camera_dataset(int num_models, int frames_per_model, int height, int width,
                                  uint64_t seed) {
  if (num_models < 2) throw invalid_argument("need >=2 camera models");
  if (frames_per_model < 1) throw invalid_argument("need >=1 frame per camera model");
  check_dims(height, width);
  CameraDataset ds;
  for (int m = 0; m < num_models; ++m) ds.models.push_back(camera_model(m));
  const int total = num_models * frames_per_model;
  ds.frames = torch::empty({total, 3, height, width});
  for (int i = 0; i < total; ++i) {
    const int model = i % num_models;
    // Scene content depends only on the frame slot, never on the model id.
    const Scene scene = make_scene(height, width, 1, mix(seed, static_cast<uint64_t>(i)));
    ds.frames[i] = apply_camera(ds.models[model], render_scene(scene, 0), mix(seed ^ 0xA5A5, i));
    ds.model_ids.push_back(model);
  }
  return ds;
}

Scene make_scene(int height, int width, int frames, uint64_t seed) {
  Scene s;
  s.height = height;
  s.width = width;
  s.frames = frames;
  std::mt19937_64 rng(mix(seed, 0x5CE4E));
  std::uniform_real_distribution<float> unit(0.f, 1.f);
  for (auto& corner : s.corner_colors)
    for (auto& ch : corner) ch = 0.15f + 0.7f * unit(rng);
  s.texture_seed = rng();
  s.texture_amplitude = 0.06f + 0.06f * unit(rng);
  const int count = 2 + static_cast<int>(rng() % 2);
  const int min_side = std::max(6, std::min(height, width) / 8);
  const int max_side = std::max(min_side + 1, std::min(height, width) / 3);
  std::uniform_int_distribution<int> side(min_side, max_side);
  std::uniform_int_distribution<int> vel(-2, 2);
  for (int i = 0; i < count; ++i) {
    Sprite sp;
    sp.width = side(rng);
    sp.height = side(rng);
    sp.ellipse = rng() % 2 == 0;
    for (auto& ch : sp.color) ch = 0.1f + 0.8f * unit(rng);
    sp.texture_seed = rng();
    sp.texture_amplitude = 0.1f + 0.1f * unit(rng);
    int vx = vel(rng);
    int vy = vel(rng);
    if (vx == 0 && vy == 0) vx = 1;
    std::uniform_int_distribution<int> px(0, std::max(0, width - sp.width));
    std::uniform_int_distribution<int> py(0, std::max(0, height - sp.height));
    const int x0 = px(rng);
    const int y0 = py(rng);
    for (int t = 0; t < frames; ++t) sp.positions.push_back({x0 + vx * t, y0 + vy * t});
    s.sprites.push_back(std::move(sp));
  }
  return s;
}

namespace {

bool sprite_covers(const Sprite& sp, int t, int x, int y, int& lx, int& ly) {
  lx = x - sp.positions[t][0];
  ly = y - sp.positions[t][1];
  if (lx < 0 || ly < 0 || lx >= sp.width || ly >= sp.height) return false;
  if (!sp.ellipse) return true;
  const double ax = sp.width / 2.0;
  const double ay = sp.height / 2.0;
  const double dx = (lx + 0.5 - ax) / ax;
  const double dy = (ly + 0.5 - ay) / ay;
  return dx * dx + dy * dy <= 1.0;
}

}  // namespace

torch::Tensor render_scene(const Scene& scene, int t) {
  if (t < 0 || t >= scene.frames) throw invalid_argument("frame index out of range");
  const int h = scene.height;
  const int w = scene.width;
  auto out = torch::empty({3, h, w});
  float* p = out.data_ptr<float>();
  const auto plane = static_cast<int64_t>(h) * w;
  for (int y = 0; y < h; ++y) {
    const float fy = h > 1 ? static_cast<float>(y) / (h - 1) : 0.f;
    for (int x = 0; x < w; ++x) {
      const float fx = w > 1 ? static_cast<float>(x) / (w - 1) : 0.f;
      float rgb[3];
      const float tex = scene.texture_amplitude *
                        (0.6f * value_noise(scene.texture_seed, x, y, 4) +
                         0.4f * value_noise(scene.texture_seed ^ 0x77, x, y, 2));
      for (int c = 0; c < 3; ++c) {
        const auto& cc = scene.corner_colors;
        rgb[c] = (cc[0][c] * (1 - fx) + cc[1][c] * fx) * (1 - fy) + (cc[2][c] * (1 - fx) + cc[3][c] * fx) * fy + tex;
      }
      for (const auto& sp : scene.sprites) {
        int lx = 0;
        int ly = 0;
        if (!sprite_covers(sp, t, x, y, lx, ly)) continue;
        const float stex = sp.texture_amplitude * (0.5f * value_noise(sp.texture_seed, lx, ly, 3) +
                                                   0.5f * value_noise(sp.texture_seed ^ 0x99, lx, ly, 1));
        for (int c = 0; c < 3; ++c) rgb[c] = sp.color[c] + stex;
      }
      for (int c = 0; c < 3; ++c) p[c * plane + y * w + x] = std::clamp(rgb[c], 0.f, 1.f);
    }
  }
  return out;
}

torch::Tensor scene_flow(const Scene& scene, int src, int dst) {
  if (src < 0 || dst < 0 || src >= scene.frames || dst >= scene.frames)
    throw invalid_argument("frame index out of range");
  auto out = torch::zeros({2, scene.height, scene.width});
  auto a = out.accessor<float, 3>();
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      // last sprite drawn is on top
      for (auto it = scene.sprites.rbegin(); it != scene.sprites.rend(); ++it) {
        int lx = 0;
        int ly = 0;
        if (sprite_covers(*it, src, x, y, lx, ly)) {
          a[0][y][x] = static_cast<float>(it->positions[dst][0] - it->positions[src][0]);
          a[1][y][x] = static_cast<float>(it->positions[dst][1] - it->positions[src][1]);
          break;
        }
      }
    }
  }
  return out;
}

void validate_clip(const VideoClip& clip) {
  if (!clip.frames.defined() || clip.frames.dim() != 4 || clip.frames.size(1) != 3)
    throw shape_error("clip frames must be (T,3,H,W)");
  const auto t = clip.frames.size(0);
  if (t < 5) throw shape_error("clip needs at least 5 frames, got " + std::to_string(t));
  check_dims(static_cast<int>(clip.frames.size(2)), static_cast<int>(clip.frames.size(3)));
  if (!clip.masks.defined() || clip.masks.dim() != 3 || clip.masks.size(0) != t ||
      clip.masks.size(1) != clip.frames.size(2) || clip.masks.size(2) != clip.frames.size(3))
    throw shape_error("clip masks must be (T,H,W) matching frames");
  if (static_cast<int64_t>(clip.labels.size()) != t) throw shape_error("one label per frame required");
  for (int64_t i = 0; i < t; ++i) {
    const bool any = clip.masks[i].any().item<bool>();
    if (any != (clip.labels[i] == 1)) throw invalid_argument("label/mask mismatch at frame " + std::to_string(i));
  }
}

VideoClip make_authentic_clip(const Scene& scene, const CameraModelSpec& camera, uint64_t seed) {
  check_dims(scene.height, scene.width);
  VideoClip clip;
  clip.frames = torch::empty({scene.frames, 3, scene.height, scene.width});
  for (int t = 0; t < scene.frames; ++t) clip.frames[t] = apply_camera(camera, render_scene(scene, t), mix(seed, t));
  clip.masks = torch::zeros({scene.frames, scene.height, scene.width}, torch::kUInt8);
  clip.labels.assign(scene.frames, 0);
  clip.tag = ManipulationTag::kAuthentic;
  clip.seed = seed;
  return clip;
}

namespace {

// Rectangle or ellipse whose area fraction falls inside [lo, hi].
torch::Tensor sample_region(int height, int width, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double total = static_cast<double>(height) * width;
  for (int attempt = 0; attempt < 200; ++attempt) {
    const double area = (lo + (hi - lo) * unit(rng)) * total;
    const double aspect = std::exp(std::log(0.5) + (std::log(2.0) - std::log(0.5)) * unit(rng));
    const bool ellipse = unit(rng) < 0.5;
    double rw = std::sqrt(area * aspect);
    double rh = area / std::max(rw, 1e-9);
    if (ellipse) {
      rw *= 2.0 / std::sqrt(std::numbers::pi);
      rh *= 2.0 / std::sqrt(std::numbers::pi);
    }
    const int bw = static_cast<int>(std::lround(rw));
    const int bh = static_cast<int>(std::lround(rh));
    if (bw < 1 || bh < 1 || bw > width || bh > height) continue;
    const int x0 = static_cast<int>(unit(rng) * (width - bw + 1));
    const int y0 = static_cast<int>(unit(rng) * (height - bh + 1));
    auto mask = torch::zeros({height, width}, torch::kUInt8);
    auto a = mask.accessor<uint8_t, 2>();
    int64_t count = 0;
    for (int y = y0; y < y0 + bh; ++y) {
      for (int x = x0; x < x0 + bw; ++x) {
        bool inside = true;
        if (ellipse) {
          const double dx = (x - x0 + 0.5 - bw / 2.0) / (bw / 2.0);
          const double dy = (y - y0 + 0.5 - bh / 2.0) / (bh / 2.0);
          inside = dx * dx + dy * dy <= 1.0;
        }
        if (inside) {
          a[y][x] = 1;
          ++count;
        }
      }
    }
    const double frac = count / total;
    if (frac >= lo && frac <= hi) return mask;
  }
  throw invalid_argument("area constraint unsatisfiable: no region with area fraction in [" +
                         std::to_string(lo) + ", " + std::to_string(hi) + "] on a " +
                         std::to_string(height) + "x" + std::to_string(width) + " frame");
}

torch::Tensor apply_edit(const torch::Tensor& frame, EditOp op, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> unit(0.f, 1.f);
  switch (op) {
    case EditOp::kBlur: {
      const float s = 0.6f + 0.4f * unit(rng);
      std::array<float, 9> k{};
      const std::array<float, 9> g = {1, 2, 1, 2, 4, 2, 1, 2, 1};
      for (int i = 0; i < 9; ++i) k[i] = (1 - s) * (i == 4 ? 1.f : 0.f) + s * g[i] / 16.f;
      return filter3x3(filter3x3(frame, k), k);
    }
    case EditOp::kSharpen: {
      const float s = 0.6f + 0.6f * unit(rng);
      std::array<float, 9> k = {0, -s, 0, -s, 1 + 4 * s, -s, 0, -s, 0};
      return filter3x3(frame, k);
    }
    case EditOp::kContrast: {
      const float gain = unit(rng) < 0.5f ? 0.6f + 0.15f * unit(rng) : 1.3f + 0.3f * unit(rng);
      auto mean = frame.mean({1, 2}, true);
      return (frame - mean) * gain + mean;
    }
    case EditOp::kNoise: {
      std::normal_distribution<float> normal(0.f, 0.03f + 0.02f * unit(rng));
      auto noise = torch::empty_like(frame);
      float* p = noise.data_ptr<float>();
      for (int64_t i = 0; i < noise.numel(); ++i) p[i] = normal(rng);
      return frame + noise;
    }
  }
  return frame;
}

// Copies the frame displaced by (dx, dy) with edge clamping.
torch::Tensor displaced(const torch::Tensor& frame, int dx, int dy) {
  const auto h = frame.size(1);
  const auto w = frame.size(2);
  auto ys = (torch::arange(h, torch::kLong) + dy).clamp(0, h - 1);
  auto xs = (torch::arange(w, torch::kLong) + dx).clamp(0, w - 1);
  return frame.index_select(1, ys).index_select(2, xs);
}

}  // namespace

VideoClip make_manipulated_clip(const VideoClip& base, const ManipulationConfig& cfg, uint64_t seed) {
  validate_clip(base);
  if (base.masks.any().item<bool>()) throw invalid_argument("base clip must be authentic (all masks zero)");
  if (!(cfg.area_lo > 0.0 && cfg.area_lo < cfg.area_hi && cfg.area_hi < 1.0))
    throw invalid_argument("area_fraction_range must satisfy 0 < lo < hi < 1");
  if (cfg.tag == ManipulationTag::kAuthentic) throw invalid_argument("manipulation tag must not be authentic");
  if (cfg.tag == ManipulationTag::kEdit && cfg.edit_ops.empty()) throw invalid_argument("edit_ops is empty");

  const int t_len = base.length();
  const int h = base.height();
  const int w = base.width();
  std::mt19937_64 rng(mix(seed, 0x3A11));
  const auto region = sample_region(h, w, cfg.area_lo, cfg.area_hi, rng);
  const auto region_f = region.to(torch::kFloat32).unsqueeze(0);

  VideoClip out;
  out.frames = base.frames.clone();
  out.masks = region.unsqueeze(0).expand({t_len, h, w}).contiguous();
  out.labels.assign(t_len, 1);
  out.tag = cfg.tag;
  out.seed = seed;

  std::vector<torch::Tensor> source;
  if (cfg.tag == ManipulationTag::kSplice) {
    const Scene scene = make_scene(h, w, t_len, mix(cfg.splice_source, 0x5711CE));
    // Donor footage comes from a capture pipeline outside the base library range.
    const auto donor = camera_model(8 + static_cast<int>(cfg.splice_source % 7));
    for (int t = 0; t < t_len; ++t) source.push_back(apply_camera(donor, render_scene(scene, t), mix(seed, 1000 + t)));
  }

  EditOp op = cfg.edit_ops.empty() ? EditOp::kBlur : cfg.edit_ops[rng() % cfg.edit_ops.size()];
  const uint64_t edit_seed = rng();
  int prev_dx = 0;
  int prev_dy = 0;
  const int span = std::max(3, std::min(h, w) / 8);
  std::uniform_int_distribution<int> shift(-span, span);
  for (int t = 0; t < t_len; ++t) {
    const auto frame = base.frames[t];
    torch::Tensor content;
    switch (cfg.tag) {
      case ManipulationTag::kEdit: {
        if (cfg.temporal_independence) op = cfg.edit_ops[rng() % cfg.edit_ops.size()];
        std::mt19937_64 local(cfg.temporal_independence ? mix(edit_seed, t) : edit_seed);
        content = apply_edit(frame, op, local);
        break;
      }
      case ManipulationTag::kSplice: {
        const int src_t = cfg.temporal_independence ? static_cast<int>(rng() % t_len) : t;
        content = source[src_t];
        break;
      }
      case ManipulationTag::kTemporalInpaint: {
        // Region refilled from a fresh displacement of the same frame every time step.
        int dx = 0;
        int dy = 0;
        do {
          dx = shift(rng);
          dy = shift(rng);
        } while (std::abs(dx) + std::abs(dy) < 3 || (dx == prev_dx && dy == prev_dy));
        prev_dx = dx;
        prev_dy = dy;
        content = displaced(frame, dx, dy);
        break;
      }
      case ManipulationTag::kAuthentic: break;
    }
    out.frames[t] = quantize8(frame * (1 - region_f) + content * region_f);
  }
  return out;
}

VideoClip reencode_clip(const VideoClip& clip, Quality quality) {
  VideoClip out = clip;
  out.frames = clip.frames.clone();
  out.masks = clip.masks.clone();
  if (quality == Quality::kLossless) return out;
  auto frames = out.frames.contiguous();
  float* p = frames.data_ptr<float>();
  const int h = clip.height();
  const int w = clip.width();
  const int64_t planes = frames.size(0) * frames.size(1);
  for (int64_t i = 0; i < planes; ++i) dct_quantize_plane(p + i * h * w, h, w, quality_factor(quality));
  out.frames = quantize8(frames);
  return out;
}

}  // namespace mvf::datagen
