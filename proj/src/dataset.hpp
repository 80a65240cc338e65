// On-disk clip directories and the gen-data dataset layout:
//   <root>/camera/frame_%04d.png + camera.json   pretraining frames
//   <root>/{train,val}/clip_%04d/                 frame_%04d.png, mask_%04d.png, meta.json
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "datagen.hpp"

namespace mvf::dataset {

void save_clip(const std::string& dir, const datagen::VideoClip& clip, const nlohmann::json& config_echo = {});
datagen::VideoClip load_clip(const std::string& dir);

void save_camera_dataset(const std::string& dir, const datagen::CameraDataset& ds, uint64_t seed);
datagen::CameraDataset load_camera_dataset(const std::string& dir);

/// Clip i of a generated split; a pure function of (cfg, seed, i).
datagen::VideoClip generate_clip(const RunConfig& cfg, int index);

struct Split {
  std::vector<datagen::VideoClip> train;
  std::vector<datagen::VideoClip> val;
};

Split generate_split(const RunConfig& cfg);
datagen::CameraDataset generate_camera(const RunConfig& cfg);

/// Writes the full layout under `root`.
void write_dataset(const std::string& root, const RunConfig& cfg);

/// Paths of every clip_* directory below `dir`, sorted by name.
std::vector<std::string> clip_dirs(const std::string& dir);

/// Loads every clip_* directory below `dir`, sorted by name.
std::vector<datagen::VideoClip> load_clips(const std::string& dir);

}  // namespace mvf::dataset
