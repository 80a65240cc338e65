#include "mvf/mvf.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <yaml-cpp/exceptions.h>

#include "checkpoint.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "log.hpp"
#include "pipeline.hpp"
#include "model.hpp"
#include "training.hpp"

struct mvf_config {
  mvf::RunConfig cfg;
};

struct mvf_model {
  mvf::ForgeryNet net{nullptr};
  mvf::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
int guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return MVF_OK;
  } catch (const mvf::Error& e) {
    g_last_error = e.what();
    return static_cast<int>(e.code());
  } catch (const YAML::Exception& e) {
    g_last_error = e.what();
    return MVF_E_CONFIG;
  } catch (const c10::Error& e) {
    g_last_error = e.what_without_backtrace();
    return MVF_E_INTERNAL;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MVF_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MVF_E_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw mvf::invalid_argument(std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> dir_list(const char* const* dirs, size_t n) {
  if (n > 0) require(dirs, "data_dirs");
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) {
    require(dirs[i], "data directory");
    out.emplace_back(dirs[i]);
  }
  return out;
}

std::vector<std::string> split_flags(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  return out;
}

}  // namespace

extern "C" {

const char* mvf_version(void) { return "1.0.0"; }

const char* mvf_last_error(void) { return g_last_error.c_str(); }

const char* mvf_status_name(int status) {
  switch (status) {
    case MVF_OK: return "ok";
    case MVF_E_INVALID_ARGUMENT: return "invalid_argument";
    case MVF_E_NOT_FOUND: return "not_found";
    case MVF_E_IO: return "io";
    case MVF_E_CONFIG: return "config";
    case MVF_E_NUMERIC: return "numeric";
    case MVF_E_SHAPE: return "shape";
    case MVF_E_INTERNAL: return "internal";
    default: return "unknown";
  }
}

void mvf_set_log_callback(mvf_log_fn fn, void* user) {
  if (!fn) {
    mvf::log::set_sink(nullptr);
    return;
  }
  mvf::log::set_sink([fn, user](mvf::log::Level level, const std::string& m) { fn(static_cast<int>(level), m.c_str(), user); });
}

void mvf_string_free(char* s) { std::free(s); }

int mvf_config_new(mvf_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mvf_config{};
  });
}

void mvf_config_free(mvf_config* cfg) { delete cfg; }

int mvf_config_load(mvf_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    cfg->cfg.merge_file(path);
  });
}

int mvf_config_set(mvf_config* cfg, const char* assignment) {
  return guarded([&] {
    require(cfg, "cfg");
    require(assignment, "assignment");
    cfg->cfg.set(assignment);
  });
}

int mvf_config_to_yaml(const mvf_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup(cfg->cfg.to_yaml());
  });
}

int mvf_config_to_json(const mvf_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup(cfg->cfg.to_json().dump(2));
  });
}

int mvf_generate_data(const mvf_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    mvf::pipeline::generate_data(cfg->cfg, out_dir);
  });
}

int mvf_pretrain(const mvf_config* cfg, const char* data_dir, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(data_dir, "data_dir");
    require(out_dir, "out_dir");
    mvf::pipeline::pretrain(cfg->cfg, data_dir, out_dir);
  });
}

int mvf_train(const mvf_config* cfg, const char* data_dir, const char* pretrained_ckpt, const char* resume_ckpt,
              const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(data_dir, "data_dir");
    require(out_dir, "out_dir");
    mvf::pipeline::train(cfg->cfg, data_dir, pretrained_ckpt ? pretrained_ckpt : "", resume_ckpt ? resume_ckpt : "",
                         out_dir);
  });
}

int mvf_evaluate(const mvf_config* cfg, const char* ckpt, const char* const* data_dirs, size_t n_dirs,
                 const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(ckpt, "ckpt");
    require(out_dir, "out_dir");
    mvf::pipeline::evaluate(cfg->cfg, ckpt, dir_list(data_dirs, n_dirs), out_dir);
  });
}

int mvf_sweep(const mvf_config* cfg, const char* ckpt, const char* const* data_dirs, size_t n_dirs,
              const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(ckpt, "ckpt");
    require(out_dir, "out_dir");
    mvf::pipeline::sweep(cfg->cfg, ckpt, dir_list(data_dirs, n_dirs), out_dir);
  });
}

int mvf_infer_clip(const mvf_config* cfg, const char* ckpt, const char* clip_dir, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(ckpt, "ckpt");
    require(clip_dir, "clip_dir");
    require(out_dir, "out_dir");
    mvf::pipeline::infer(cfg->cfg, ckpt, clip_dir, out_dir);
  });
}

int mvf_plot(const char* input, const char* output_svg) {
  return guarded([&] {
    require(input, "input");
    require(output_svg, "output_svg");
    mvf::pipeline::plot(input, output_svg);
  });
}

int mvf_model_load(const char* ckpt, mvf_model** out) {
  return guarded([&] {
    require(ckpt, "ckpt");
    require(out, "out");
    auto model = std::make_unique<mvf_model>();
    const auto ck = mvf::load_checkpoint(ckpt);
    model->net = mvf::training::model_from_checkpoint(ck, &model->cfg);
    *out = model.release();
  });
}

void mvf_model_free(mvf_model* model) { delete model; }

int mvf_model_set_ablation(mvf_model* model, const char* flags) {
  return guarded([&] {
    require(model, "model");
    require(flags, "flags");
    const auto list = split_flags(flags);
    mvf::training::set_ablation(model->net, list);
    model->cfg.model.ablation = list;
  });
}

int mvf_model_infer(mvf_model* model, const float* frames, int t, int h, int w, float* scores_out, float* masks_out) {
  return guarded([&] {
    require(model, "model");
    require(frames, "frames");
    require(scores_out, "scores_out");
    require(masks_out, "masks_out");
    if (t <= 0 || h <= 0 || w <= 0) throw mvf::invalid_argument("frame dimensions must be positive");
    auto x = torch::from_blob(const_cast<float*>(frames), {t, 3, h, w}, torch::kFloat32).clone();
    const auto flow = mvf::clip_flow_features(x, model->cfg.model);
    const auto pred = mvf::evaluation::predict(model->net, x, flow);
    for (int i = 0; i < t; ++i) scores_out[i] = static_cast<float>(pred.scores[i]);
    auto m = pred.masks.to(torch::kFloat32).contiguous();
    std::memcpy(masks_out, m.data_ptr<float>(), sizeof(float) * static_cast<size_t>(m.numel()));
  });
}

}  // extern "C"
