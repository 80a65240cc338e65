#include "pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <torch/torch.h>

#include "dataset.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "image_io.hpp"
#include "log.hpp"
#include "plot.hpp"
#include "training.hpp"

namespace fs = std::filesystem;

namespace mvf::pipeline {

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string epoch_line(const training::EpochLog& e) {
  std::ostringstream s;
  s.precision(5);
  s << training::to_string(e.stage) << " epoch " << e.epoch << " lr=" << e.lr << " loss=" << e.loss;
  if (e.stage == training::Stage::kPretrain) {
    s << " cell_accuracy=";
    for (std::size_t i = 0; i < e.cell_accuracy.size(); ++i) s << (i ? "/" : "") << e.cell_accuracy[i];
  } else {
    s << " det=" << e.detection << " pix=" << e.pixel << " dice=" << e.dice << " val_acc=" << e.val_accuracy;
  }
  s << " (" << e.seconds << "s)";
  return s.str();
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw invalid_argument(std::string(what) + " path is required");
  if (!fs::is_regular_file(path)) throw not_found(std::string(what) + " not found: " + path);
}

/// Model from a checkpoint, configured with the checkpoint's architecture and
/// the caller's evaluation settings. A non-empty ablation list in `cfg`
/// overrides the checkpoint's.
ForgeryNet load_model(const RunConfig& cfg, const std::string& checkpoint, RunConfig& effective) {
  require_file(checkpoint, "checkpoint");
  const auto ck = load_checkpoint(checkpoint);
  RunConfig stored;
  auto model = training::model_from_checkpoint(ck, &stored);
  effective = cfg;
  effective.model = stored.model;
  if (!cfg.model.flow_dir.empty()) effective.model.flow_dir = cfg.model.flow_dir;
  if (!cfg.model.ablation.empty()) {
    training::set_ablation(model, cfg.model.ablation);
    effective.model.ablation = cfg.model.ablation;
  }
  return model;
}

std::vector<evaluation::EvalSet> load_sets(const std::vector<std::string>& data_dirs) {
  if (data_dirs.empty()) throw invalid_argument("at least one data directory is required");
  std::vector<evaluation::EvalSet> sets;
  for (const auto& d : data_dirs) {
    evaluation::EvalSet s;
    s.name = fs::path(d).lexically_normal().string();
    if (!s.name.empty() && s.name.back() == '/') s.name.pop_back();
    s.dirs = dataset::clip_dirs(d);
    for (const auto& c : s.dirs) s.clips.push_back(dataset::load_clip(c));
    sets.push_back(std::move(s));
  }
  return sets;
}

}  // namespace

void apply_runtime(const RunConfig& cfg) {
  if (cfg.device != "cpu") throw config_error("device '" + cfg.device + "' is not available; this build supports cpu only");
  if (cfg.workers < 1) throw config_error("workers must be >= 1");
  torch::set_num_threads(cfg.workers);
}

void echo_config(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "config.yaml");
  if (!out) throw io_error("cannot write config echo in " + out_dir);
  out << cfg.to_yaml();
}

void generate_data(const RunConfig& cfg, const std::string& out_dir) {
  apply_runtime(cfg);
  echo_config(cfg, out_dir);
  dataset::write_dataset(out_dir, cfg);
  log::info("wrote dataset to " + out_dir);
}

nlohmann::json pretrain(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
  apply_runtime(cfg);
  const auto camera_dir = (fs::path(data_dir) / "camera").string();
  if (!fs::is_directory(camera_dir)) throw not_found("camera dataset not found: " + camera_dir);
  const auto ds = dataset::load_camera_dataset(camera_dir);
  echo_config(cfg, out_dir);
  torch::manual_seed(static_cast<uint64_t>(cfg.seed));
  spatial::SpatialResidualExtractor trunk(cfg.model.constrained_filters, cfg.model.fir_expand);
  training::TrainOptions opts;
  opts.curves_csv = (fs::path(out_dir) / "curves.csv").string();
  opts.on_epoch = [](const training::EpochLog& e) { log::info(epoch_line(e)); };
  auto result = training::pretrain(trunk, ds, cfg, opts);
  save_checkpoint((fs::path(out_dir) / "pretrain.ckpt").string(), result.checkpoint);
  save_checkpoint((fs::path(out_dir) / "pretrain_state.ckpt").string(), result.state);
  auto metrics = result.checkpoint.metrics;
  metrics["epochs"] = result.history.size();
  metrics["steps"] = result.step_losses.size();
  write_json(fs::path(out_dir) / "metrics.json", metrics);
  return metrics;
}

nlohmann::json train(const RunConfig& cfg, const std::string& data_dir, const std::string& pretrained,
                     const std::string& resume, const std::string& out_dir) {
  apply_runtime(cfg);
  const auto train_dir = (fs::path(data_dir) / "train").string();
  const auto val_dir = (fs::path(data_dir) / "val").string();
  training::TrainOptions opts;
  opts.train_dirs = dataset::clip_dirs(train_dir);
  opts.val_dirs = dataset::clip_dirs(val_dir);
  std::vector<datagen::VideoClip> train_clips, val_clips;
  for (const auto& d : opts.train_dirs) train_clips.push_back(dataset::load_clip(d));
  for (const auto& d : opts.val_dirs) val_clips.push_back(dataset::load_clip(d));

  std::optional<Checkpoint> resume_ck;
  if (!resume.empty()) {
    require_file(resume, "resume checkpoint");
    resume_ck = load_checkpoint(resume);
    opts.resume = &*resume_ck;
  }
  echo_config(cfg, out_dir);
  torch::manual_seed(static_cast<uint64_t>(cfg.seed));
  auto model = make_model(cfg.model);
  if (!pretrained.empty()) {
    require_file(pretrained, "pretrained checkpoint");
    training::load_pretrained_trunk(model, load_checkpoint(pretrained));
  }
  opts.curves_csv = (fs::path(out_dir) / "curves.csv").string();
  opts.on_epoch = [](const training::EpochLog& e) { log::info(epoch_line(e)); };
  auto result = training::train_full(model, train_clips, val_clips, cfg, opts);
  if (!result.best.tensors.empty()) save_checkpoint((fs::path(out_dir) / "best.ckpt").string(), result.best);
  save_checkpoint((fs::path(out_dir) / "last.ckpt").string(), result.last);
  nlohmann::json metrics{{"last", result.last.metrics}, {"last_epoch", result.last.epoch}};
  if (!result.best.tensors.empty()) {
    metrics["best"] = result.best.metrics;
    metrics["best_epoch"] = result.best.epoch;
  }
  write_json(fs::path(out_dir) / "metrics.json", metrics);
  return metrics;
}

nlohmann::json evaluate(const RunConfig& cfg, const std::string& checkpoint, const std::vector<std::string>& data_dirs,
                        const std::string& out_dir) {
  apply_runtime(cfg);
  RunConfig effective;
  auto model = load_model(cfg, checkpoint, effective);
  const auto sets = load_sets(data_dirs);
  echo_config(effective, out_dir);
  auto report = evaluation::evaluate(model, sets, effective, evaluation::EvalOptions::from_config(effective));
  report.write((fs::path(out_dir) / "report.json").string(), (fs::path(out_dir) / "records.csv").string());
  return report.to_json();
}

nlohmann::json sweep(const RunConfig& cfg, const std::string& checkpoint, const std::vector<std::string>& data_dirs,
                     const std::string& out_dir) {
  apply_runtime(cfg);
  std::vector<datagen::Quality> qualities;
  for (const auto& q : cfg.eval.qualities) qualities.push_back(datagen::quality_from_string(q));
  RunConfig effective;
  auto model = load_model(cfg, checkpoint, effective);
  const auto sets = load_sets(data_dirs);
  echo_config(effective, out_dir);
  const auto entries =
      evaluation::compression_sweep(model, sets, effective, qualities, evaluation::EvalOptions::from_config(effective));
  for (const auto& e : entries) {
    const auto stem = (fs::path(out_dir) / ("report_" + datagen::to_string(e.quality))).string();
    e.report.write(stem + ".json", stem + ".csv");
  }
  const auto table = evaluation::sweep_table(entries);
  write_json(fs::path(out_dir) / "sweep.json", table);
  plot::write_svg((fs::path(out_dir) / "sweep.svg").string(), plot::sweep_plot(table), table);
  return table;
}

nlohmann::json infer(const RunConfig& cfg, const std::string& checkpoint, const std::string& clip_dir,
                     const std::string& out_dir) {
  apply_runtime(cfg);
  RunConfig effective;
  auto model = load_model(cfg, checkpoint, effective);
  const auto clip = dataset::load_clip(clip_dir);
  const auto flow = clip_flow_features(clip.frames, effective.model, clip_dir);
  const auto pred = evaluation::predict(model, clip.frames, flow);
  fs::create_directories(out_dir);
  nlohmann::json scores = nlohmann::json::object();
  for (int t = 0; t < clip.length(); ++t) {
    const double s = effective.eval.score_from_mask ? heads::score_from_mask(pred.masks[t]) : pred.scores[t];
    scores[std::to_string(t)] = s;
    auto m = (pred.masks[t].clamp(0, 1) * 255.0).round().to(torch::kUInt8).contiguous();
    io::Raster r;
    r.height = static_cast<int>(m.size(0));
    r.width = static_cast<int>(m.size(1));
    r.channels = 1;
    r.pixels.assign(m.data_ptr<uint8_t>(), m.data_ptr<uint8_t>() + m.numel());
    char name[32];
    std::snprintf(name, sizeof name, "mask_%04d.png", t);
    io::write_png_gray((fs::path(out_dir) / name).string(), r);
  }
  write_json(fs::path(out_dir) / "scores.json", scores);
  return scores;
}

void plot(const std::string& input, const std::string& output_svg) {
  if (!fs::is_regular_file(input)) throw not_found("plot input not found: " + input);
  const auto ext = fs::path(input).extension().string();
  if (ext == ".json") {
    std::ifstream in(input);
    nlohmann::json table;
    try {
      table = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw io_error("malformed JSON in " + input + ": " + e.what());
    }
    if (!table.is_array()) throw invalid_argument("expected a sweep table (JSON array) in " + input);
    plot::write_svg(output_svg, plot::sweep_plot(table), table);
  } else if (ext == ".csv") {
    nlohmann::json table;
    auto p = plot::curves_plot(input, table);
    plot::write_svg(output_svg, p, table);
  } else {
    throw invalid_argument("cannot plot " + input + ": expected sweep .json or curves .csv");
  }
}

}  // namespace mvf::pipeline
