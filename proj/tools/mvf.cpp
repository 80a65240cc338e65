// Command-line front end. Talks to the library exclusively through mvf.h.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvf/mvf.h"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  long long seed = 0;
  bool seed_given = false;
  std::string out;
  int workers = 0;
  std::string ablation;
  std::string device;
};

struct Failure {
  int status;
  std::string message;
};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + '"';
}

void check(int status) {
  if (status != MVF_OK) throw Failure{status, mvf_last_error()};
}

class Config {
 public:
  Config() { check(mvf_config_new(&cfg_)); }
  ~Config() { mvf_config_free(cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  mvf_config* get() const { return cfg_; }
  void set(const std::string& key, const std::string& value) { check(mvf_config_set(cfg_, (key + "=" + value).c_str())); }

 private:
  mvf_config* cfg_ = nullptr;
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::string run_dir(const Common& c, const std::string& command) {
  if (!c.out.empty()) return c.out;
  auto base = fs::path("runs") / (command + "-" + timestamp());
  auto dir = base;
  for (int i = 1; fs::exists(dir); ++i) dir = base.string() + "-" + std::to_string(i);
  return dir.string();
}

void build_config(Config& cfg, const Common& c) {
  if (!c.config.empty()) check(mvf_config_load(cfg.get(), c.config.c_str()));
  if (const char* cache = std::getenv("MVF_CACHE"); cache && *cache) cfg.set("model.flow_dir", cache);
  for (const auto& s : c.sets) check(mvf_config_set(cfg.get(), s.c_str()));
  if (c.seed_given) cfg.set("seed", std::to_string(c.seed));
  if (c.workers > 0) cfg.set("workers", std::to_string(c.workers));
  if (!c.ablation.empty()) cfg.set("model.ablation", c.ablation);
  if (!c.device.empty()) cfg.set("device", c.device);
}

struct LogFile {
  std::ofstream file;
  std::mutex mutex;
};

void log_to(int level, const char* message, void* user) {
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  const char* name = level >= 0 && level < 4 ? kNames[level] : "info";
  auto* log = static_cast<LogFile*>(user);
  std::lock_guard lock(log->mutex);
  std::cerr << '[' << name << "] " << message << '\n';
  if (log->file) log->file << '[' << name << "] " << message << '\n' << std::flush;
}

/// Creates the run directory, mirrors library logging into <dir>/run.log.
class Run {
 public:
  Run(const Common& c, const Config& cfg, const std::string& command) : dir_(run_dir(c, command)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Failure{MVF_E_IO, "cannot create run directory " + dir_ + ": " + ec.message()};
    char* yaml = nullptr;
    check(mvf_config_to_yaml(cfg.get(), &yaml));
    std::ofstream(fs::path(dir_) / "config.yaml") << yaml;
    mvf_string_free(yaml);
    log_.file.open(fs::path(dir_) / "run.log", std::ios::app);
    mvf_set_log_callback(log_to, &log_);
  }
  ~Run() { mvf_set_log_callback(nullptr, nullptr); }
  Run(const Run&) = delete;
  Run& operator=(const Run&) = delete;
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  LogFile log_;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "YAML run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "Override a configuration key (section.key=value); repeatable");
  cmd->add_option_function<long long>(
      "--seed",
      [&c](long long v) {
        c.seed = v;
        c.seed_given = true;
      },
      "Random seed");
  cmd->add_option("--out", c.out, "Output directory (default: runs/<command>-<timestamp>)");
  cmd->add_option("--workers", c.workers, "Intra-op threads")->check(CLI::PositiveNumber);
  cmd->add_option("--ablation", c.ablation, "Comma-separated ablation flags");
  cmd->add_option("--device", c.device, "Compute device (cpu)");
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal video forgery detection and localization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mvf_version()));
  app.footer(
      "Subcommands: gen-data, pretrain, train, eval, infer, sweep, plot\n"
      "Environment: MVF_CACHE  optical flow cache directory (.flo files)");

  Common common;
  std::string data, pretrained, resume, checkpoint, clip, input, output;
  std::vector<std::string> data_dirs;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic camera and video datasets");
  add_common(gen, common);

  auto* pre = app.add_subcommand("pretrain", "Pretrain the spatial trunk on camera-model identification");
  add_common(pre, common);
  pre->add_option("--data", data, "Dataset root written by gen-data")->required();

  auto* train = app.add_subcommand("train", "Train the full detector and localizer");
  add_common(train, common);
  train->add_option("--data", data, "Dataset root written by gen-data")->required();
  train->add_option("--pretrained", pretrained, "Pretrained trunk checkpoint (pretrain.ckpt)");
  train->add_option("--resume", resume, "Resume from a last.ckpt");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (mAP, pixel F1)");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  eval->add_option("--data", data_dirs, "Directories of clip_* folders; repeatable")->required();
  bool sweep_threshold = false;
  eval->add_flag("--sweep-threshold", sweep_threshold, "Also report the best-threshold F1 (non-standard)");

  auto* infer = app.add_subcommand("infer", "Write per-frame scores and masks for one clip");
  add_common(infer, common);
  infer->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  infer->add_option("--clip", clip, "Clip directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Evaluate under each compression quality");
  add_common(sweep, common);
  sweep->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  sweep->add_option("--data", data_dirs, "Directories of clip_* folders; repeatable")->required();

  auto* plot = app.add_subcommand("plot", "Render a sweep.json or curves.csv as SVG");
  add_common(plot, common);
  plot->add_option("--input", input, "sweep.json or curves.csv")->required();
  plot->add_option("--output", output, "SVG path (default: <out>/plot.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "mvf-error code=" << MVF_E_INVALID_ARGUMENT << " kind=usage message=" << quote(e.what()) << '\n';
    return MVF_E_INVALID_ARGUMENT;
  }

  try {
    Config cfg;
    build_config(cfg, common);
    if (sweep_threshold) cfg.set("eval.sweep_threshold", "true");
    if (*plot) {
      if (output.empty()) {
        Run run(common, cfg, "plot");
        output = (fs::path(run.dir()) / "plot.svg").string();
        check(mvf_plot(input.c_str(), output.c_str()));
      } else {
        check(mvf_plot(input.c_str(), output.c_str()));
      }
      std::cout << output << '\n';
      return 0;
    }
    const std::string name = app.get_subcommands().front()->get_name();
    Run run(common, cfg, name);
    const char* out = run.dir().c_str();
    if (*gen) {
      check(mvf_generate_data(cfg.get(), out));
    } else if (*pre) {
      check(mvf_pretrain(cfg.get(), data.c_str(), out));
    } else if (*train) {
      check(mvf_train(cfg.get(), data.c_str(), pretrained.empty() ? nullptr : pretrained.c_str(),
                      resume.empty() ? nullptr : resume.c_str(), out));
    } else if (*eval) {
      const auto dirs = c_strings(data_dirs);
      check(mvf_evaluate(cfg.get(), checkpoint.c_str(), dirs.data(), dirs.size(), out));
    } else if (*sweep) {
      const auto dirs = c_strings(data_dirs);
      check(mvf_sweep(cfg.get(), checkpoint.c_str(), dirs.data(), dirs.size(), out));
    } else if (*infer) {
      check(mvf_infer_clip(cfg.get(), checkpoint.c_str(), clip.c_str(), out));
    }
    std::cout << run.dir() << '\n';
    return 0;
  } catch (const Failure& f) {
    std::cerr << "mvf-error code=" << f.status << " kind=" << mvf_status_name(f.status) << " message=" << quote(f.message)
              << '\n';
    return f.status;
  }
}
