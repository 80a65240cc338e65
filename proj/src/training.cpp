#include "training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "errors.hpp"

namespace mvf::training {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<int64_t> epoch_order(int64_t n, int64_t seed, int epoch, Stage stage) {
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<uint64_t>(seed), static_cast<uint64_t>(epoch), static_cast<uint64_t>(stage)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void set_lr(torch::optim::SGD& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::SGDOptions&>(group.options()).lr(lr);
}

class CurveWriter {
 public:
  explicit CurveWriter(const std::string& path, bool append) {
    if (path.empty()) return;
    const bool fresh = !append || !std::ifstream(path).good();
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw io_error("cannot write training curves: " + path);
    if (fresh) out_ << "stage,epoch,lr,gamma,alpha,beta,loss,detection,pixel,dice,val_accuracy,cell_accuracy,seconds\n";
  }
  void write(const EpochLog& e) {
    if (!out_.is_open()) return;
    std::string cells;
    for (std::size_t i = 0; i < e.cell_accuracy.size(); ++i) cells += (i ? ";" : "") + std::to_string(e.cell_accuracy[i]);
    out_.precision(10);
    out_ << to_string(e.stage) << ',' << e.epoch << ',' << e.lr << ',' << e.weights.gamma << ',' << e.weights.alpha
         << ',' << e.weights.beta << ',' << e.loss << ',' << e.detection << ',' << e.pixel << ',' << e.dice << ','
         << e.val_accuracy << ',' << cells << ',' << e.seconds << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

std::vector<torch::Tensor> flow_for(const std::vector<datagen::VideoClip>& clips, const std::vector<std::string>& dirs,
                                    const ModelConfig& mc) {
  if (!dirs.empty() && dirs.size() != clips.size()) throw invalid_argument("clip directory list does not match clips");
  std::vector<torch::Tensor> out;
  out.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i)
    out.push_back(clip_flow_features(clips[i].frames, mc, dirs.empty() ? std::string{} : dirs[i]));
  return out;
}

std::vector<torch::Tensor> trainable(torch::nn::Module& m) {
  std::vector<torch::Tensor> out;
  for (auto& p : m.parameters())
    if (p.requires_grad()) out.push_back(p);
  return out;
}

}  // namespace

ModeGuard::ModeGuard(torch::nn::Module& module) : module_(module), was_training_(module.is_training()) {
  module_.eval();
}

ModeGuard::~ModeGuard() { module_.train(was_training_); }

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kPretrain: return "pretrain";
    case Stage::kIntermediate: return "intermediate";
    case Stage::kFull: return "full";
  }
  return "?";
}

OptimizerSchedule OptimizerSchedule::defaults(Stage stage) {
  if (stage == Stage::kPretrain) return {stage, 1e-3, 0.96, 0.65, 2};
  return {stage, 6e-4, 0.90, 0.85, 2};
}

OptimizerSchedule OptimizerSchedule::from_config(Stage stage, const StageConfig& cfg) {
  if (cfg.decay_every < 1) throw config_error("decay_every must be >= 1");
  return {stage, cfg.lr, cfg.momentum, cfg.lr_decay, cfg.decay_every};
}

double OptimizerSchedule::lr(int epoch) const {
  if (epoch < 0) throw invalid_argument("epoch must be non-negative");
  return initial_lr * std::pow(decay, epoch / decay_every);
}

losses::WeightSchedule weight_schedule(const LossConfig& cfg) {
  return {{cfg.gamma, cfg.alpha, cfg.beta}, {cfg.gamma_mult, cfg.alpha_mult, cfg.beta_mult}};
}

std::vector<double> pretrain_accuracy(spatial::SpatialResidualExtractor trunk, heads::PretrainHeads heads,
                                      const torch::Tensor& frames, const std::vector<int>& model_ids) {
  torch::NoGradGuard guard;
  ModeGuard mode_trunk(*trunk), mode_heads(*heads);
  const int64_t n = frames.size(0);
  const auto scales = heads->scales().size();
  std::vector<double> correct(scales, 0.0);
  double cells_total = 0;
  for (int64_t start = 0; start < n; start += 16) {
    const int64_t end = std::min(n, start + 16);
    auto target = torch::tensor(std::vector<int64_t>(model_ids.begin() + start, model_ids.begin() + end));
    auto logits = heads->forward(trunk->forward(frames.slice(0, start, end)));
    auto acc = losses::cell_accuracy(logits, target);
    for (std::size_t s = 0; s < scales; ++s) correct[s] += acc[s] * static_cast<double>(end - start);
    cells_total += static_cast<double>(end - start);
  }
  for (auto& c : correct) c /= cells_total;
  return correct;
}

PretrainResult pretrain(spatial::SpatialResidualExtractor trunk, const datagen::CameraDataset& dataset,
                        const RunConfig& cfg, const TrainOptions& opts) {
  const int classes = cfg.data.camera_models;
  const int64_t n = dataset.frames.size(0);
  if (n == 0) throw invalid_argument("empty camera dataset");
  if (static_cast<int64_t>(dataset.model_ids.size()) != n) throw invalid_argument("camera dataset labels do not match frames");
  const std::set<int> distinct(dataset.model_ids.begin(), dataset.model_ids.end());
  if (static_cast<int>(distinct.size()) != classes || *distinct.begin() != 0 || *distinct.rbegin() != classes - 1) {
    throw invalid_argument("camera dataset has " + std::to_string(distinct.size()) +
                           " camera models but the pretraining head has " + std::to_string(classes) + " classes");
  }
  const auto& scales = cfg.model.pretrain_scales;
  if (cfg.loss.scale_weights.size() != scales.size())
    throw config_error("loss.scale_weights must have one weight per model.pretrain_scales entry");
  spatial::check_frames(dataset.frames);

  torch::manual_seed(static_cast<uint64_t>(cfg.seed) + 1);
  heads::PretrainHeads heads(spatial::kResidualChannels, classes, scales);

  std::vector<torch::Tensor> params = trainable(*trunk);
  for (auto& p : heads->parameters()) params.push_back(p);
  const auto schedule = OptimizerSchedule::from_config(Stage::kPretrain, cfg.pretrain);
  torch::optim::SGD opt(params, torch::optim::SGDOptions(schedule.initial_lr).momentum(schedule.momentum));
  const auto labels = torch::tensor(std::vector<int64_t>(dataset.model_ids.begin(), dataset.model_ids.end()));
  const int64_t batch = std::max(1, cfg.pretrain.batch);

  int start_epoch = 0;
  if (opts.resume) {
    if (opts.resume->stage != to_string(Stage::kPretrain)) throw invalid_argument("resume checkpoint is not a pretraining checkpoint");
    import_module(*trunk, "spatial.", *opts.resume);
    import_module(*heads, "pretrain_heads.", *opts.resume);
    import_optimizer(opt, "optimizer", *opts.resume);
    start_epoch = opts.resume->epoch + 1;
  }

  PretrainResult result;
  CurveWriter curves(opts.curves_csv, opts.resume != nullptr);
  int64_t step = 0;
  bool stop = false;
  int last_epoch = start_epoch - 1;
  for (int epoch = start_epoch; epoch < cfg.pretrain.epochs && !stop; ++epoch) {
    const auto t0 = Clock::now();
    EpochLog log{Stage::kPretrain, epoch, schedule.lr(epoch), {}, 0, 0, 0, 0, 0, {}, 0};
    trunk->train();
    heads->train();
    use_batch_statistics(*trunk, true);
    use_batch_statistics(*heads, true);
    set_lr(opt, log.lr);
    const auto order = epoch_order(n, cfg.seed, epoch, Stage::kPretrain);
    int batches = 0;
    for (int64_t b = 0; b < n; b += batch) {
      auto idx = torch::tensor(std::vector<int64_t>(order.begin() + b, order.begin() + std::min(n, b + batch)));
      auto x = dataset.frames.index_select(0, idx);
      auto y = labels.index_select(0, idx);
      opt.zero_grad();
      auto loss = losses::pretrain_loss(heads->forward(trunk->forward(x)), y, scales, cfg.loss.scale_weights);
      loss.backward();
      if (cfg.pretrain.grad_clip > 0) torch::nn::utils::clip_grad_norm_(params, cfg.pretrain.grad_clip);
      opt.step();
      trunk->constrained->project();
      const double value = loss.item<double>();
      result.step_losses.push_back(value);
      log.loss += value;
      ++batches;
      ++step;
      if (opts.on_step)
        opts.on_step({Stage::kPretrain, epoch, step, value, spatial::constraint_violation(trunk->constrained->phi)});
      if (opts.max_steps > 0 && step >= opts.max_steps) {
        stop = true;
        break;
      }
    }
    log.loss /= std::max(1, batches);
    log.cell_accuracy = pretrain_accuracy(trunk, heads, dataset.frames, dataset.model_ids);
    log.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    curves.write(log);
    if (opts.on_epoch) opts.on_epoch(log);
    result.history.push_back(log);
    last_epoch = epoch;
  }

  use_batch_statistics(*trunk, false);
  auto& ck = result.checkpoint;
  ck.stage = to_string(Stage::kPretrain);
  ck.epoch = last_epoch;
  ck.config = cfg.to_json();
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    ck.metrics = {{"loss", last.loss}, {"cell_accuracy", last.cell_accuracy}, {"scales", scales}};
  }
  export_module(*trunk, "spatial.", ck);
  result.state = ck;
  export_module(*heads, "pretrain_heads.", result.state);
  export_optimizer(opt, "optimizer", result.state);
  result.heads = heads;
  return result;
}

void load_pretrained_trunk(ForgeryNet& model, const Checkpoint& ckpt) {
  if (ckpt.stage != to_string(Stage::kPretrain)) throw invalid_argument("expected a pretraining checkpoint, got stage " + ckpt.stage);
  import_module(*model->spatial, "spatial.", ckpt);
}

ForgeryNet model_from_checkpoint(const Checkpoint& ckpt, RunConfig* config_out) {
  if (ckpt.stage != to_string(Stage::kFull)) throw invalid_argument("expected a trained model checkpoint, got stage " + ckpt.stage);
  RunConfig cfg;
  cfg.merge_json(ckpt.config);
  auto model = make_model(cfg.model);
  import_module(*model, "model.", ckpt);
  if (config_out) *config_out = cfg;
  return model;
}

ForgeryNet& set_ablation(ForgeryNet& model, const std::vector<std::string>& flags) {
  model->set_ablation(AblationFlags::parse(flags));
  return model;
}

double detection_accuracy(ForgeryNet& model, const std::vector<datagen::VideoClip>& clips,
                          const std::vector<torch::Tensor>& flow_features, double threshold) {
  torch::NoGradGuard guard;
  ModeGuard mode(*model);
  int64_t correct = 0, total = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    auto scores = model->forward(clips[i].frames, flow_features[i]).scores();
    auto acc = scores.accessor<float, 1>();
    for (int64_t t = 0; t < scores.size(0); ++t) {
      correct += ((acc[t] >= threshold) == (clips[i].labels[t] == 1));
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

namespace {

struct FullLoop {
  ForgeryNet model;
  const RunConfig& cfg;
  const TrainOptions& opts;
  std::vector<torch::Tensor> params;
  bool frozen;
  int64_t step = 0;

  void run(Stage stage, const std::vector<datagen::VideoClip>& clips, const std::vector<torch::Tensor>& flows,
           const std::vector<datagen::VideoClip>& val, const std::vector<torch::Tensor>& val_flows, int epochs,
           TrainResult& result, CurveWriter& curves, const Checkpoint* resume) {
    const auto schedule = OptimizerSchedule::from_config(Stage::kFull, cfg.train);
    const auto weights = weight_schedule(cfg.loss);
    const auto dice = losses::dice_form_from_string(cfg.loss.dice);
    torch::optim::SGD opt(params, torch::optim::SGDOptions(schedule.initial_lr).momentum(schedule.momentum));
    const int64_t n = static_cast<int64_t>(clips.size());
    const int64_t batch = std::max(1, cfg.train.batch);

    int start_epoch = 0;
    double best_acc = -1.0;
    if (resume) {
      import_module(*model, "model.", *resume);
      import_optimizer(opt, "optimizer", *resume);
      start_epoch = resume->epoch + 1;
      best_acc = resume->metrics.value("best_val_accuracy", -1.0);
    }

    for (int epoch = start_epoch; epoch < epochs; ++epoch) {
      const auto t0 = Clock::now();
      EpochLog log{stage, epoch, schedule.lr(epoch), losses::step_weights(weights, epoch), 0, 0, 0, 0, 0, {}, 0};
      model->train();
      set_lr(opt, log.lr);
      const auto order = epoch_order(n, cfg.seed, epoch, stage);
      int batches = 0;
      bool stop = false;
      for (int64_t b = 0; b < n; b += batch) {
        opt.zero_grad();
        torch::Tensor total;
        double det = 0, pix = 0, dsc = 0;
        const int64_t end = std::min(n, b + batch);
        for (int64_t j = b; j < end; ++j) {
          const auto& clip = clips[order[j]];
          auto out = model->forward(clip.frames, flows[order[j]]);
          auto labels = torch::tensor(std::vector<float>(clip.labels.begin(), clip.labels.end()));
          auto terms = losses::joint_loss_terms(out.scores(), labels, out.masks(), clip.masks.to(torch::kFloat32),
                                                log.weights, dice);
          auto scaled = terms.total / static_cast<double>(end - b);
          total = total.defined() ? total + scaled : scaled;
          det += terms.detection.item<double>();
          pix += terms.pixel.item<double>();
          dsc += terms.dice.item<double>();
        }
        total.backward();
        if (cfg.train.grad_clip > 0) torch::nn::utils::clip_grad_norm_(params, cfg.train.grad_clip);
        opt.step();
        double violation = 0.0;
        if (!frozen) {
          model->project_constraints();
          violation = spatial::constraint_violation(model->constrained_weights());
        }
        const double value = total.item<double>();
        result.step_losses.push_back(value);
        const double k = static_cast<double>(end - b);
        log.loss += value;
        log.detection += det / k;
        log.pixel += pix / k;
        log.dice += dsc / k;
        ++batches;
        ++step;
        if (opts.on_step) opts.on_step({stage, epoch, step, value, violation});
        if (opts.max_steps > 0 && step >= opts.max_steps) {
          stop = true;
          break;
        }
      }
      const double nb = std::max(1, batches);
      log.loss /= nb;
      log.detection /= nb;
      log.pixel /= nb;
      log.dice /= nb;
      log.val_accuracy = detection_accuracy(model, val, val_flows, cfg.eval.threshold);
      log.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      curves.write(log);
      if (opts.on_epoch) opts.on_epoch(log);
      result.history.push_back(log);

      const bool improved = log.val_accuracy > best_acc;
      if (improved) best_acc = log.val_accuracy;
      auto snapshot = [&](Checkpoint& ck, bool with_optimizer) {
        ck = Checkpoint{};
        ck.stage = to_string(stage);
        ck.epoch = epoch;
        ck.config = cfg.to_json();
        ck.metrics = {{"loss", log.loss},
                      {"detection", log.detection},
                      {"pixel", log.pixel},
                      {"dice", log.dice},
                      {"val_accuracy", log.val_accuracy},
                      {"best_val_accuracy", best_acc},
                      {"lr", log.lr}};
        export_module(*model, "model.", ck);
        if (with_optimizer) export_optimizer(opt, "optimizer", ck);
      };
      if (stage == Stage::kFull) {
        if (improved) snapshot(result.best, false);
        snapshot(result.last, true);
      }
      if (stop) break;
    }
  }
};

void check_clips(const std::vector<datagen::VideoClip>& clips, const char* what) {
  for (const auto& c : clips) {
    datagen::validate_clip(c);
    if (c.height() % 32 != 0 || c.width() % 32 != 0)
      throw shape_error(std::string(what) + " clip resolution " + std::to_string(c.height()) + "x" +
                        std::to_string(c.width()) + " is not divisible by 32");
  }
}

}  // namespace

TrainResult train_full(ForgeryNet model, const std::vector<datagen::VideoClip>& train,
                       const std::vector<datagen::VideoClip>& val, const RunConfig& cfg, const TrainOptions& opts) {
  if (train.empty()) throw invalid_argument("empty training set");
  if (val.empty()) throw invalid_argument("empty validation set");
  check_clips(train, "training");
  check_clips(val, "validation");
  if (opts.resume && opts.resume->stage != to_string(Stage::kFull))
    throw invalid_argument("resume checkpoint is not a full-training checkpoint");

  const bool frozen = cfg.freeze_constrained;
  model->constrained_weights().set_requires_grad(!frozen);
  const auto flows = flow_for(train, opts.train_dirs, cfg.model);
  const auto val_flows = flow_for(val, opts.val_dirs, cfg.model);

  FullLoop loop{model, cfg, opts, trainable(*model), frozen};
  TrainResult result;
  CurveWriter curves(opts.curves_csv, opts.resume != nullptr);

  if (cfg.intermediate_stage && !opts.resume) {
    std::vector<datagen::VideoClip> subset;
    std::vector<torch::Tensor> subset_flows;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto tag = train[i].tag;
      if (tag == datagen::ManipulationTag::kTemporalInpaint) continue;
      subset.push_back(train[i]);
      subset_flows.push_back(flows[i]);
    }
    if (!subset.empty())
      loop.run(Stage::kIntermediate, subset, subset_flows, val, val_flows, std::max(1, cfg.train.epochs / 4), result,
               curves, nullptr);
  }
  loop.run(Stage::kFull, train, flows, val, val_flows, cfg.train.epochs, result, curves, opts.resume);
  if (result.last.tensors.empty()) throw invalid_argument("training ran no epochs");
  return result;
}

}  // namespace mvf::training
