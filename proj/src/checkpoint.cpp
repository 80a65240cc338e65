#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace mvf {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'V', 'F', 'C', 'K', 'P', 'T', '\0'};

enum class DType : uint8_t { kF32 = 0, kF64 = 1, kI64 = 2, kU8 = 3, kI32 = 4 };

DType dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return DType::kF32;
    case torch::kFloat64: return DType::kF64;
    case torch::kInt64: return DType::kI64;
    case torch::kUInt8: return DType::kU8;
    case torch::kInt32: return DType::kI32;
    default: throw invalid_argument("unsupported tensor dtype in checkpoint");
  }
}

torch::ScalarType scalar_type(DType d) {
  switch (d) {
    case DType::kF32: return torch::kFloat32;
    case DType::kF64: return torch::kFloat64;
    case DType::kI64: return torch::kInt64;
    case DType::kU8: return torch::kUInt8;
    case DType::kI32: return torch::kInt32;
  }
  throw io_error("unknown dtype code in checkpoint");
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw io_error("truncated checkpoint");
  return v;
}

}  // namespace

const torch::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

bool Checkpoint::has_prefix(const std::string& prefix) const {
  for (const auto& [n, _] : tensors)
    if (n.rfind(prefix, 0) == 0) return true;
  return false;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write checkpoint: " + path);
  nlohmann::json header{{"stage", ckpt.stage},
                        {"epoch", ckpt.epoch},
                        {"config", ckpt.config},
                        {"metrics", ckpt.metrics},
                        {"tensors", ckpt.tensors.size()}};
  const auto text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put<uint32_t>(out, kCheckpointVersion);
  put<uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    auto t = tensor.detach().to(torch::kCPU).contiguous();
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint8_t>(out, static_cast<uint8_t>(dtype_code(t.scalar_type())));
    put<uint32_t>(out, static_cast<uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<int64_t>(out, d);
    const uint64_t bytes = t.numel() * t.element_size();
    put<uint64_t>(out, bytes);
    out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
  }
  if (!out) throw io_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw not_found("checkpoint not found: " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw io_error("not a checkpoint file: " + path);
  const auto version = get<uint32_t>(in);
  if (version != kCheckpointVersion) throw io_error("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get<uint64_t>(in);
  if (header_len > (uint64_t{1} << 30)) throw io_error("corrupt checkpoint header");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw io_error("truncated checkpoint");
  Checkpoint ckpt;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("corrupt checkpoint header: ") + e.what());
  }
  ckpt.stage = header.at("stage").get<std::string>();
  ckpt.epoch = header.at("epoch").get<int>();
  ckpt.config = header.at("config");
  ckpt.metrics = header.at("metrics");
  const auto count = header.at("tensors").get<uint64_t>();
  for (uint64_t i = 0; i < count; ++i) {
    const auto name_len = get<uint32_t>(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw io_error("truncated checkpoint");
    const auto dtype = scalar_type(static_cast<DType>(get<uint8_t>(in)));
    const auto ndim = get<uint32_t>(in);
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) d = get<int64_t>(in);
    const auto bytes = get<uint64_t>(in);
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    if (bytes != static_cast<uint64_t>(t.numel() * t.element_size())) throw io_error("tensor size mismatch for " + name);
    if (!in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(bytes)))
      throw io_error("truncated checkpoint");
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

void export_module(const torch::nn::Module& module, const std::string& prefix, Checkpoint& ckpt) {
  for (const auto& p : module.named_parameters(true)) ckpt.tensors.emplace_back(prefix + p.key(), p.value().detach().clone());
  for (const auto& b : module.named_buffers(true)) ckpt.tensors.emplace_back(prefix + b.key(), b.value().detach().clone());
}

void import_module(torch::nn::Module& module, const std::string& prefix, const Checkpoint& ckpt, bool strict) {
  torch::NoGradGuard guard;
  auto copy = [&](const std::string& key, torch::Tensor& dst) {
    const auto* src = ckpt.find(prefix + key);
    if (!src) {
      if (strict) throw io_error("checkpoint is missing tensor " + prefix + key);
      return;
    }
    if (src->sizes() != dst.sizes())
      throw shape_error("checkpoint tensor " + prefix + key + " has an incompatible shape");
    dst.copy_(*src);
  };
  for (auto& p : module.named_parameters(true)) copy(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) copy(b.key(), b.value());
}

namespace {

void* state_key(const torch::Tensor& param) { return param.unsafeGetTensorImpl(); }

}  // namespace

void export_optimizer(const torch::optim::Optimizer& opt, const std::string& name, Checkpoint& ckpt) {
  if (!dynamic_cast<const torch::optim::SGD*>(&opt)) throw invalid_argument("only SGD optimizer state is supported");
  int64_t index = 0;
  for (const auto& group : opt.param_groups()) {
    for (const auto& p : group.params()) {
      torch::Tensor buffer = torch::empty({0});
      const auto it = opt.state().find(state_key(p));
      if (it != opt.state().end()) {
        const auto& momentum = static_cast<const torch::optim::SGDParamState&>(*it->second).momentum_buffer();
        if (momentum.defined()) buffer = momentum.detach().clone();
      }
      ckpt.tensors.emplace_back(name + ".momentum." + std::to_string(index++), buffer);
    }
  }
  ckpt.tensors.emplace_back(name + ".params", torch::tensor({index}));
}

void import_optimizer(torch::optim::Optimizer& opt, const std::string& name, const Checkpoint& ckpt) {
  if (!dynamic_cast<torch::optim::SGD*>(&opt)) throw invalid_argument("only SGD optimizer state is supported");
  const auto* count = ckpt.find(name + ".params");
  if (!count) throw io_error("checkpoint has no optimizer state " + name);
  int64_t expected = 0;
  for (const auto& group : opt.param_groups()) expected += static_cast<int64_t>(group.params().size());
  if ((*count)[0].item<int64_t>() != expected)
    throw shape_error("optimizer state covers " + std::to_string((*count)[0].item<int64_t>()) + " parameters, model has " +
                      std::to_string(expected));
  int64_t index = 0;
  for (auto& group : opt.param_groups()) {
    for (auto& p : group.params()) {
      const auto tensor_name = name + ".momentum." + std::to_string(index++);
      const auto* buffer = ckpt.find(tensor_name);
      if (!buffer) throw io_error("checkpoint is missing " + tensor_name);
      if (buffer->numel() == 0 && p.numel() != 0) continue;
      if (buffer->sizes() != p.sizes()) throw shape_error(tensor_name + " has an incompatible shape");
      auto state = std::make_unique<torch::optim::SGDParamState>();
      state->momentum_buffer(buffer->clone());
      opt.state()[state_key(p)] = std::move(state);
    }
  }
}

}  // namespace mvf
