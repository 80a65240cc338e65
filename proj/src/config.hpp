// Run configuration: one structured file (sections of key/value pairs),
// overridable from the command line, echoed into every checkpoint and report.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace mvf {

struct DataConfig {
  int height = 64;
  int width = 64;
  int frames = 9;
  int num_clips = 200;
  double manipulated_fraction = 0.5;
  std::vector<std::string> tags{"splice", "edit", "temporal_inpaint"};
  double area_lo = 0.05;
  double area_hi = 0.2;
  std::vector<std::string> edit_ops{"blur", "sharpen", "contrast", "noise"};
  int camera_models = 4;
  int frames_per_model = 32;
  double val_fraction = 0.2;
};

struct ModelConfig {
  int constrained_filters = 6;
  int context_channels = 64;
  int embed_dim = 256;
  int heads = 4;
  int encoder_layers = 2;
  int flat_encoder_layers = 8;
  int fir_expand = 4;
  std::vector<int> scales{2, 3, 4, 5};
  std::vector<int> pretrain_scales{3, 4, 5};
  // Resolution a standard_transformer model is locked to.
  int reference_height = 256;
  int reference_width = 256;
  bool temporal_fusion_conv = false;
  // "final": nu(I_{t-1}, I_t); "swapped": nu(I_t, I_{t-1}).
  std::string flow_order = "final";
  // "builtin" or "precomputed"
  std::string flow_estimator = "builtin";
  std::string flow_dir;
  int flow_levels = 3;
  int flow_iterations = 30;
  double flow_smoothness = 0.05;
  std::vector<std::string> ablation;
};

struct StageConfig {
  int epochs = 12;
  double lr = 6e-4;
  double momentum = 0.90;
  double lr_decay = 0.85;
  int decay_every = 2;
  int batch = 1;
  double grad_clip = 5.0;
};

struct LossConfig {
  double gamma = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma_mult = 0.95;
  double alpha_mult = 0.80;
  double beta_mult = 1.18;
  // "standard" or "per_pixel"
  std::string dice = "standard";
  std::vector<double> scale_weights{0.01, 0.0075, 0.005};
};

struct EvalConfig {
  double threshold = 0.5;
  bool sweep_threshold = false;
  bool score_from_mask = false;
  std::vector<std::string> qualities{"lossless", "high", "medium", "strong"};
  int repeats = 1;
};

struct RunConfig {
  int64_t seed = 0;
  int workers = 1;
  std::string device = "cpu";
  std::string out;
  bool freeze_constrained = false;
  bool intermediate_stage = false;
  DataConfig data;
  ModelConfig model;
  StageConfig pretrain{.epochs = 12, .lr = 1e-3, .momentum = 0.96, .lr_decay = 0.65, .batch = 4};
  StageConfig train;
  LossConfig loss;
  EvalConfig eval;

  RunConfig();
  RunConfig(const RunConfig& other);
  RunConfig& operator=(const RunConfig& other);

  /// Merges a YAML file. Every unknown key and every type error is collected;
  /// a ConfigError lists all of them.
  void merge_file(const std::string& path);
  void merge_yaml(const std::string& text);
  /// Applies "section.key=value" (or "key=value" for top-level keys).
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  nlohmann::json to_json() const;
  void merge_json(const nlohmann::json& j);
  std::string to_yaml() const;

  /// Dotted names of every recognised key.
  std::vector<std::string> keys() const;

 private:
  using Ref = std::variant<int*, int64_t*, double*, bool*, std::string*, std::vector<int>*,
                           std::vector<double>*, std::vector<std::string>*>;
  std::map<std::string, Ref> fields_;
  void bind();
};

}  // namespace mvf
