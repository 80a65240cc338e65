#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "errors.hpp"
#include "image_io.hpp"

namespace fs = std::filesystem;

namespace mvf::dataset {

namespace {

std::string indexed(const char* pattern, int i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, i);
  return buf;
}

io::Raster frame_to_raster(const torch::Tensor& frame) {
  auto hwc = (frame.clamp(0, 1) * 255.0).round().to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  io::Raster r;
  r.height = static_cast<int>(hwc.size(0));
  r.width = static_cast<int>(hwc.size(1));
  r.channels = 3;
  r.pixels.assign(hwc.data_ptr<uint8_t>(), hwc.data_ptr<uint8_t>() + hwc.numel());
  return r;
}

torch::Tensor raster_to_frame(const io::Raster& r) {
  if (r.channels != 3) throw io_error("expected RGB frame");
  auto t = torch::from_blob(const_cast<uint8_t*>(r.pixels.data()), {r.height, r.width, 3}, torch::kUInt8);
  return t.permute({2, 0, 1}).to(torch::kFloat32) / 255.0;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw not_found("cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed JSON in " + p.string() + ": " + e.what());
  }
}

uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Evenly spread selection: element i is picked when the running quota ticks over.
bool picked(int i, double fraction) {
  return std::floor((i + 1) * fraction + 1e-9) > std::floor(i * fraction + 1e-9);
}

}  // namespace

void save_clip(const std::string& dir, const datagen::VideoClip& clip, const nlohmann::json& config_echo) {
  datagen::validate_clip(clip);
  fs::create_directories(dir);
  const fs::path root(dir);
  for (int t = 0; t < clip.length(); ++t) {
    io::write_png_rgb((root / indexed("frame_%04d.png", t)).string(), frame_to_raster(clip.frames[t]));
    auto m = clip.masks[t].contiguous();
    io::Raster r;
    r.height = clip.height();
    r.width = clip.width();
    r.channels = 1;
    r.pixels.assign(m.data_ptr<uint8_t>(), m.data_ptr<uint8_t>() + m.numel());
    io::write_png_bilevel((root / indexed("mask_%04d.png", t)).string(), r);
  }
  nlohmann::json meta;
  meta["labels"] = clip.labels;
  meta["manipulation_tag"] = datagen::to_string(clip.tag);
  meta["seed"] = clip.seed;
  meta["frames"] = clip.length();
  meta["height"] = clip.height();
  meta["width"] = clip.width();
  meta["config"] = config_echo;
  std::ofstream(root / "meta.json") << meta.dump(2) << "\n";
}

datagen::VideoClip load_clip(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw not_found("clip directory not found: " + dir);
  datagen::VideoClip clip;
  std::vector<torch::Tensor> frames;
  std::vector<torch::Tensor> masks;
  for (int t = 0;; ++t) {
    const auto fp = root / indexed("frame_%04d.png", t);
    if (!fs::exists(fp)) break;
    frames.push_back(raster_to_frame(io::read_png(fp.string())));
    const auto mp = root / indexed("mask_%04d.png", t);
    if (fs::exists(mp)) {
      const auto r = io::read_png(mp.string());
      auto m = torch::from_blob(const_cast<uint8_t*>(r.pixels.data()), {r.height, r.width}, torch::kUInt8).clone();
      masks.push_back((m > 0).to(torch::kUInt8));
    } else {
      masks.push_back(torch::zeros({frames.back().size(1), frames.back().size(2)}, torch::kUInt8));
    }
  }
  if (frames.empty()) throw not_found("no frame_0000.png in " + dir);
  clip.frames = torch::stack(frames);
  clip.masks = torch::stack(masks);
  const auto meta_path = root / "meta.json";
  if (fs::exists(meta_path)) {
    const auto meta = read_json(meta_path);
    clip.labels = meta.at("labels").get<std::vector<int>>();
    clip.tag = datagen::tag_from_string(meta.value("manipulation_tag", "authentic"));
    clip.seed = meta.value("seed", uint64_t{0});
  } else {
    for (int t = 0; t < clip.length(); ++t) clip.labels.push_back(clip.masks[t].any().item<bool>() ? 1 : 0);
  }
  return clip;
}

void save_camera_dataset(const std::string& dir, const datagen::CameraDataset& ds, uint64_t seed) {
  fs::create_directories(dir);
  const fs::path root(dir);
  for (int64_t i = 0; i < ds.frames.size(0); ++i)
    io::write_png_rgb((root / indexed("frame_%04d.png", static_cast<int>(i))).string(), frame_to_raster(ds.frames[i]));
  nlohmann::json meta;
  meta["model_ids"] = ds.model_ids;
  meta["seed"] = seed;
  meta["models"] = nlohmann::json::array();
  for (const auto& m : ds.models) {
    meta["models"].push_back({{"model_id", m.model_id},
                              {"filter_kernel", m.filter_kernel},
                              {"gamma", m.gamma},
                              {"noise_std", m.noise_std},
                              {"quality", m.quality}});
  }
  std::ofstream(root / "camera.json") << meta.dump(2) << "\n";
}

datagen::CameraDataset load_camera_dataset(const std::string& dir) {
  const fs::path root(dir);
  const auto meta = read_json(root / "camera.json");
  datagen::CameraDataset ds;
  ds.model_ids = meta.at("model_ids").get<std::vector<int>>();
  for (const auto& m : meta.at("models")) ds.models.push_back(datagen::camera_model(m.at("model_id").get<int>()));
  std::vector<torch::Tensor> frames;
  for (std::size_t i = 0; i < ds.model_ids.size(); ++i)
    frames.push_back(raster_to_frame(io::read_png((root / indexed("frame_%04d.png", static_cast<int>(i))).string())));
  if (frames.empty()) throw not_found("empty camera dataset in " + dir);
  ds.frames = torch::stack(frames);
  return ds;
}

datagen::VideoClip generate_clip(const RunConfig& cfg, int index) {
  const auto& d = cfg.data;
  const uint64_t clip_seed = mix(static_cast<uint64_t>(cfg.seed), static_cast<uint64_t>(index));
  const auto scene = datagen::make_scene(d.height, d.width, d.frames, clip_seed);
  const auto camera = datagen::camera_model(index % std::max(1, d.camera_models));
  auto base = datagen::make_authentic_clip(scene, camera, clip_seed ^ 0xB45E);
  if (!picked(index, d.manipulated_fraction)) return base;

  if (d.tags.empty()) throw config_error("data.tags is empty");
  int rank = 0;
  for (int i = 0; i < index; ++i) rank += picked(i, d.manipulated_fraction) ? 1 : 0;
  datagen::ManipulationConfig mc;
  mc.tag = datagen::tag_from_string(d.tags[rank % d.tags.size()]);
  mc.area_lo = d.area_lo;
  mc.area_hi = d.area_hi;
  mc.edit_ops.clear();
  for (const auto& op : d.edit_ops) mc.edit_ops.push_back(datagen::edit_op_from_string(op));
  mc.splice_source = mix(clip_seed, 0x5011);
  mc.temporal_independence = mc.tag == datagen::ManipulationTag::kTemporalInpaint;
  return datagen::make_manipulated_clip(base, mc, clip_seed ^ 0x3A41);
}

Split generate_split(const RunConfig& cfg) {
  Split s;
  for (int i = 0; i < cfg.data.num_clips; ++i) {
    auto clip = generate_clip(cfg, i);
    if (cfg.data.val_fraction > 0 && picked(i, cfg.data.val_fraction)) {
      s.val.push_back(std::move(clip));
    } else {
      s.train.push_back(std::move(clip));
    }
  }
  return s;
}

datagen::CameraDataset generate_camera(const RunConfig& cfg) {
  return datagen::make_camera_dataset(cfg.data.camera_models, cfg.data.frames_per_model, cfg.data.height,
                                      cfg.data.width, mix(static_cast<uint64_t>(cfg.seed), 0xCA3E7A));
}

void write_dataset(const std::string& root, const RunConfig& cfg) {
  const fs::path base(root);
  fs::create_directories(base);
  const auto echo = cfg.to_json();
  save_camera_dataset((base / "camera").string(), generate_camera(cfg), static_cast<uint64_t>(cfg.seed));
  const auto split = generate_split(cfg);
  for (std::size_t i = 0; i < split.train.size(); ++i)
    save_clip((base / "train" / indexed("clip_%04d", static_cast<int>(i))).string(), split.train[i], echo);
  for (std::size_t i = 0; i < split.val.size(); ++i)
    save_clip((base / "val" / indexed("clip_%04d", static_cast<int>(i))).string(), split.val[i], echo);
  nlohmann::json meta{{"config", echo}, {"train_clips", split.train.size()}, {"val_clips", split.val.size()}};
  std::ofstream(base / "dataset.json") << meta.dump(2) << "\n";
}

std::vector<std::string> clip_dirs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw not_found("dataset directory not found: " + dir);
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("clip_", 0) == 0) dirs.push_back(e.path().string());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::vector<datagen::VideoClip> load_clips(const std::string& dir) {
  std::vector<datagen::VideoClip> clips;
  for (const auto& d : clip_dirs(dir)) clips.push_back(load_clip(d));
  return clips;
}

}  // namespace mvf::dataset
