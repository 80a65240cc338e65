// Directory-level workflows behind each command: every step reads its inputs
// from disk and writes self-describing artifacts into an output directory.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace mvf::pipeline {

/// Rejects device strings other than "cpu" and applies the worker count.
void apply_runtime(const RunConfig& cfg);

/// Writes config.yaml into `out_dir` (created if needed).
void echo_config(const RunConfig& cfg, const std::string& out_dir);

/// <root>/{camera,train,val}/ plus dataset.json.
void generate_data(const RunConfig& cfg, const std::string& out_dir);

/// Reads <data>/camera; writes pretrain.ckpt (trunk only), pretrain_state.ckpt,
/// curves.csv and metrics.json.
nlohmann::json pretrain(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir);

/// Reads <data>/train and <data>/val; writes best.ckpt, last.ckpt, curves.csv
/// and metrics.json. `pretrained` is a pretrain.ckpt, `resume` a last.ckpt.
nlohmann::json train(const RunConfig& cfg, const std::string& data_dir, const std::string& pretrained,
                     const std::string& resume, const std::string& out_dir);

/// Evaluates a checkpoint on one or more directories of clip_* folders;
/// writes report.json and records.csv.
nlohmann::json evaluate(const RunConfig& cfg, const std::string& checkpoint, const std::vector<std::string>& data_dirs,
                        const std::string& out_dir);

/// Evaluation at every quality in cfg.eval.qualities; writes sweep.json,
/// sweep.svg and report_<quality>.{json,csv}.
nlohmann::json sweep(const RunConfig& cfg, const std::string& checkpoint, const std::vector<std::string>& data_dirs,
                     const std::string& out_dir);

/// Scores and masks for one clip directory: scores.json (frame index ->
/// score) and mask_%04d.png (8-bit probabilities).
nlohmann::json infer(const RunConfig& cfg, const std::string& checkpoint, const std::string& clip_dir,
                     const std::string& out_dir);

/// SVG from a sweep.json or a training curves.csv.
void plot(const std::string& input, const std::string& output_svg);

}  // namespace mvf::pipeline
