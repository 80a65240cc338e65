// Frame-level detection mAP, pixel-level localization F1, evaluation
// reports and the compression sweep.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "config.hpp"
#include "datagen.hpp"
#include "model.hpp"

namespace mvf::evaluation {

/// Step-wise AP over descending score thresholds. Items with equal scores
/// form one tie group and enter the ranking together.
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

struct Confusion {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};
Confusion confusion(const torch::Tensor& pred, const torch::Tensor& gt, double threshold = 0.5);
/// 2TP / (2TP + FP + FN); 1.0 when prediction and ground truth are both empty.
double f1_from(const Confusion& c);
double pixel_f1(const torch::Tensor& pred, const torch::Tensor& gt, double threshold = 0.5);

struct Prediction {
  std::vector<double> scores;  // per frame
  torch::Tensor masks;         // (T,H,W) probabilities
};
/// Inference on one clip; `flow_features` as produced by clip_flow_features.
Prediction predict(ForgeryNet& model, const torch::Tensor& frames, const torch::Tensor& flow_features);

struct EvalSet {
  std::string name;
  std::vector<datagen::VideoClip> clips;
  std::vector<std::string> dirs;  // optional, for precomputed flow
};

struct FrameRecord {
  std::string dataset;
  int clip = 0;
  int frame = 0;
  int label = 0;
  std::string tag;
  double score = 0;
  int64_t tp = 0, fp = 0, fn = 0;
};

struct EvalOptions {
  double threshold = 0.5;
  bool score_from_mask = false;
  bool sweep_threshold = false;
  int repeats = 1;
  int64_t seed = 0;
  static EvalOptions from_config(const RunConfig& cfg);
};

struct RepeatStats {
  double map_mean = 0, map_var = 0, f1_mean = 0, f1_var = 0;
  int repeats = 0;
};

struct EvalReport {
  /// AP per dataset; nullopt when a dataset holds a single class.
  std::map<std::string, std::optional<double>> ap_by_dataset;
  std::optional<double> ap_pooled;
  std::map<std::string, std::optional<double>> f1_by_dataset;
  std::optional<double> f1_mean;  // over manipulated frames
  double threshold = 0.5;
  bool score_from_mask = false;
  // Best-threshold F1: not part of the standard protocol.
  std::optional<double> sweep_best_threshold;
  std::optional<double> sweep_best_f1;
  std::optional<RepeatStats> repeats;
  std::vector<FrameRecord> records;
  nlohmann::json config = nlohmann::json::object();
  double runtime_seconds = 0;

  nlohmann::json to_json() const;
  void write(const std::string& json_path, const std::string& csv_path) const;
};

/// Recomputes all aggregate metrics from per-frame records.
EvalReport report_from_records(const std::vector<FrameRecord>& records, double threshold);

std::vector<FrameRecord> read_records_csv(const std::string& path);

EvalReport evaluate(ForgeryNet& model, const std::vector<EvalSet>& sets, const RunConfig& cfg, const EvalOptions& opts);

struct SweepEntry {
  datagen::Quality quality;
  EvalReport report;
};

std::vector<SweepEntry> compression_sweep(ForgeryNet& model, const std::vector<EvalSet>& sets, const RunConfig& cfg,
                                          const std::vector<datagen::Quality>& qualities, const EvalOptions& opts);

nlohmann::json sweep_table(const std::vector<SweepEntry>& entries);

}  // namespace mvf::evaluation
