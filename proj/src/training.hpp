// Camera-model pretraining of the spatial trunk and full-network training.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "checkpoint.hpp"
#include "config.hpp"
#include "datagen.hpp"
#include "losses.hpp"
#include "model.hpp"

namespace mvf::training {

/// Switches a module to inference mode for its lifetime.
class ModeGuard {
 public:
  explicit ModeGuard(torch::nn::Module& module);
  ~ModeGuard();
  ModeGuard(const ModeGuard&) = delete;
  ModeGuard& operator=(const ModeGuard&) = delete;

 private:
  torch::nn::Module& module_;
  bool was_training_;
};

enum class Stage { kPretrain, kIntermediate, kFull };
std::string to_string(Stage stage);

struct OptimizerSchedule {
  Stage stage = Stage::kFull;
  double initial_lr = 6e-4;
  double momentum = 0.90;
  double decay = 0.85;
  int decay_every = 2;

  static OptimizerSchedule defaults(Stage stage);
  static OptimizerSchedule from_config(Stage stage, const StageConfig& cfg);
  /// initial * decay^floor(epoch / decay_every)
  double lr(int epoch) const;
};

losses::WeightSchedule weight_schedule(const LossConfig& cfg);

struct StepInfo {
  Stage stage;
  int epoch;
  int64_t step;
  double loss;
  /// Largest constraint violation after the projection; 0 when frozen.
  double violation;
};

struct EpochLog {
  Stage stage;
  int epoch;
  double lr;
  losses::LossWeights weights;
  double loss = 0, detection = 0, pixel = 0, dice = 0;
  double val_accuracy = 0;
  std::vector<double> cell_accuracy;  // pretraining only, per scale
  double seconds = 0;
};

struct TrainOptions {
  std::function<void(const StepInfo&)> on_step;
  std::function<void(const EpochLog&)> on_epoch;
  /// Training curves; written incrementally, one row per epoch.
  std::string curves_csv;
  /// Stop after this many optimizer steps (0 = run every epoch).
  int64_t max_steps = 0;
  /// Continue from a checkpoint written by the same stage (for pretraining,
  /// PretrainResult::state).
  const Checkpoint* resume = nullptr;
  /// Per-clip directories, used by the precomputed flow estimator.
  std::vector<std::string> train_dirs;
  std::vector<std::string> val_dirs;
};

struct PretrainResult {
  Checkpoint checkpoint;  // trunk only
  Checkpoint state;       // trunk, heads and optimizer; for resuming
  heads::PretrainHeads heads{nullptr};
  std::vector<EpochLog> history;
  std::vector<double> step_losses;
};

/// Trains `trunk` to classify the capture camera of each frame on every
/// pooled grid cell. `dataset.model_ids` must cover exactly
/// cfg.data.camera_models classes.
PretrainResult pretrain(spatial::SpatialResidualExtractor trunk, const datagen::CameraDataset& dataset,
                        const RunConfig& cfg, const TrainOptions& opts = {});

/// Per-cell accuracy of a trunk + heads pair; exposed for evaluation of the
/// pretext task on held-out frames.
std::vector<double> pretrain_accuracy(spatial::SpatialResidualExtractor trunk, heads::PretrainHeads heads,
                                      const torch::Tensor& frames, const std::vector<int>& model_ids);

struct TrainResult {
  Checkpoint best;  // highest validation detection accuracy
  Checkpoint last;  // final epoch, with optimizer state
  std::vector<EpochLog> history;
  std::vector<double> step_losses;
};

TrainResult train_full(ForgeryNet model, const std::vector<datagen::VideoClip>& train,
                       const std::vector<datagen::VideoClip>& val, const RunConfig& cfg,
                       const TrainOptions& opts = {});

/// Loads pretrained trunk weights (a "pretrain" checkpoint) into `model`.
void load_pretrained_trunk(ForgeryNet& model, const Checkpoint& ckpt);

/// Rebuilds a model from any full-stage checkpoint, using its config echo.
ForgeryNet model_from_checkpoint(const Checkpoint& ckpt, RunConfig* config_out = nullptr);

/// set_ablation(model, flags): reconfigures modality masking and routing.
ForgeryNet& set_ablation(ForgeryNet& model, const std::vector<std::string>& flags);

/// Fraction of frames whose thresholded score matches the label.
double detection_accuracy(ForgeryNet& model, const std::vector<datagen::VideoClip>& clips,
                          const std::vector<torch::Tensor>& flow_features, double threshold = 0.5);

}  // namespace mvf::training
