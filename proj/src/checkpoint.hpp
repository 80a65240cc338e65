// Single-file checkpoint container.
//
// Layout (all integers little-endian):
//   8 bytes   magic "MVFCKPT\0"
//   u32       format version (1)
//   u64       header length, then that many bytes of UTF-8 JSON
//             {stage, epoch, config, metrics, tensors: N}
//   N records: u32 name length, name bytes, u8 dtype, u32 ndim,
//              i64 dims[ndim], u64 byte count, raw bytes (C order)
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace mvf {

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string stage;  // "pretrain" | "full"
  int epoch = 0;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json metrics = nlohmann::json::object();
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  const torch::Tensor* find(const std::string& name) const;
  bool has_prefix(const std::string& prefix) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Appends every parameter and buffer of `module` as "<prefix><name>".
void export_module(const torch::nn::Module& module, const std::string& prefix, Checkpoint& ckpt);
/// Copies "<prefix><name>" tensors into `module`. With `strict`, every
/// parameter/buffer must be present with a matching shape.
void import_module(torch::nn::Module& module, const std::string& prefix, const Checkpoint& ckpt, bool strict = true);

/// SGD momentum buffers as "<name>.momentum.<i>" in parameter order, plus
/// "<name>.params" holding the parameter count.
void export_optimizer(const torch::optim::Optimizer& opt, const std::string& name, Checkpoint& ckpt);
void import_optimizer(torch::optim::Optimizer& opt, const std::string& name, const Checkpoint& ckpt);

}  // namespace mvf
