#include "evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "heads.hpp"
#include "training.hpp"

namespace mvf::evaluation {

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw invalid_argument("scores and labels differ in length");
  int64_t positives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw invalid_argument("labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw numeric_error("non-finite score at index " + std::to_string(i));
    positives += labels[i];
  }
  const auto n = static_cast<int64_t>(labels.size());
  if (positives == 0 || positives == n)
    throw invalid_argument("average precision needs at least one positive and one negative label");

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    int64_t group_tp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++group_tp;
      else ++fp;
      ++j;
    }
    tp += group_tp;
    if (group_tp > 0)
      ap += static_cast<double>(group_tp) * static_cast<double>(tp) / static_cast<double>(tp + fp);
    i = j;
  }
  return ap / static_cast<double>(positives);
}

Confusion confusion(const torch::Tensor& pred, const torch::Tensor& gt, double threshold) {
  if (pred.sizes() != gt.sizes()) throw shape_error("prediction and ground-truth masks differ in shape");
  auto g = gt.to(torch::kFloat64);
  if (((g != 0) & (g != 1)).any().item<bool>()) throw invalid_argument("ground-truth mask must be binary");
  auto p = pred.to(torch::kFloat64) >= threshold;
  auto gb = g == 1;
  Confusion c;
  c.tp = (p & gb).sum().item<int64_t>();
  c.fp = (p & ~gb).sum().item<int64_t>();
  c.fn = (~p & gb).sum().item<int64_t>();
  c.tn = (~p & ~gb).sum().item<int64_t>();
  return c;
}

double f1_from(const Confusion& c) {
  const int64_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double pixel_f1(const torch::Tensor& pred, const torch::Tensor& gt, double threshold) {
  return f1_from(confusion(pred, gt, threshold));
}

Prediction predict(ForgeryNet& model, const torch::Tensor& frames, const torch::Tensor& flow_features) {
  torch::NoGradGuard guard;
  training::ModeGuard mode(*model);
  auto out = model->forward(frames, flow_features);
  Prediction p;
  auto s = out.scores().to(torch::kFloat64);
  p.scores.assign(s.data_ptr<double>(), s.data_ptr<double>() + s.numel());
  p.masks = out.masks();
  return p;
}

EvalOptions EvalOptions::from_config(const RunConfig& cfg) {
  EvalOptions o;
  o.threshold = cfg.eval.threshold;
  o.score_from_mask = cfg.eval.score_from_mask;
  o.sweep_threshold = cfg.eval.sweep_threshold;
  o.repeats = cfg.eval.repeats;
  o.seed = cfg.seed;
  return o;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> safe_ap(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.empty()) return std::nullopt;
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<long>(labels.size())) return std::nullopt;
  return average_precision(scores, labels);
}

struct Aggregate {
  std::vector<double> scores;
  std::vector<int> labels;
  double f1_sum = 0;
  int64_t f1_count = 0;

  void add(const FrameRecord& r) {
    scores.push_back(r.score);
    labels.push_back(r.label);
    if (r.label == 1) {
      f1_sum += f1_from({r.tp, r.fp, r.fn, 0});
      ++f1_count;
    }
  }
  std::optional<double> f1() const {
    return f1_count ? std::optional<double>(f1_sum / static_cast<double>(f1_count)) : std::nullopt;
  }
};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

EvalReport report_from_records(const std::vector<FrameRecord>& records, double threshold) {
  if (records.empty()) throw invalid_argument("no frames to evaluate");
  EvalReport r;
  r.threshold = threshold;
  r.records = records;
  std::map<std::string, Aggregate> per;
  Aggregate pooled;
  for (const auto& rec : records) {
    per[rec.dataset].add(rec);
    pooled.add(rec);
  }
  for (const auto& [name, agg] : per) {
    r.ap_by_dataset[name] = safe_ap(agg.scores, agg.labels);
    r.f1_by_dataset[name] = agg.f1();
  }
  r.ap_pooled = safe_ap(pooled.scores, pooled.labels);
  r.f1_mean = pooled.f1();
  return r;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  nlohmann::json ap = nlohmann::json::object(), f1 = nlohmann::json::object();
  for (const auto& [k, v] : ap_by_dataset) ap[k] = opt_json(v);
  for (const auto& [k, v] : f1_by_dataset) f1[k] = opt_json(v);
  j["map_pooled"] = opt_json(ap_pooled);
  j["map_by_dataset"] = ap;
  j["f1_mean"] = opt_json(f1_mean);
  j["f1_by_dataset"] = f1;
  j["f1_averaged_over"] = "manipulated frames";
  j["threshold"] = threshold;
  j["score_from_mask"] = score_from_mask;
  if (sweep_best_f1) {
    j["sweep_threshold_nonstandard"] = {{"best_threshold", *sweep_best_threshold}, {"best_f1", *sweep_best_f1}};
  }
  if (repeats) {
    j["repeats"] = {{"count", repeats->repeats},
                    {"map_mean", repeats->map_mean},
                    {"map_variance", repeats->map_var},
                    {"f1_mean", repeats->f1_mean},
                    {"f1_variance", repeats->f1_var}};
  }
  j["frames"] = records.size();
  j["runtime_seconds"] = runtime_seconds;
  j["config"] = config;
  return j;
}

void EvalReport::write(const std::string& json_path, const std::string& csv_path) const {
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw io_error("cannot write report: " + json_path);
    out << to_json().dump(2) << '\n';
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw io_error("cannot write records: " + csv_path);
    out << "dataset,clip,frame,label,tag,score,tp,fp,fn\n";
    char buf[64];
    for (const auto& r : records) {
      std::snprintf(buf, sizeof buf, "%.17g", r.score);
      out << csv_escape(r.dataset) << ',' << r.clip << ',' << r.frame << ',' << r.label << ',' << r.tag << ',' << buf
          << ',' << r.tp << ',' << r.fp << ',' << r.fn << '\n';
    }
  }
}

std::vector<FrameRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw not_found("records file not found: " + path);
  std::string line;
  std::getline(in, line);
  if (line != "dataset,clip,frame,label,tag,score,tp,fp,fn") throw io_error("unexpected records header in " + path);
  std::vector<FrameRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cell += '"', ++i;
        else if (c == '"') quoted = false;
        else cell += c;
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += c;
      }
    }
    cells.push_back(cell);
    if (cells.size() != 9) throw io_error("malformed records line in " + path + ": " + line);
    FrameRecord r;
    try {
      r.dataset = cells[0];
      r.clip = std::stoi(cells[1]);
      r.frame = std::stoi(cells[2]);
      r.label = std::stoi(cells[3]);
      r.tag = cells[4];
      r.score = std::stod(cells[5]);
      r.tp = std::stoll(cells[6]);
      r.fp = std::stoll(cells[7]);
      r.fn = std::stoll(cells[8]);
    } catch (const std::exception&) {
      throw io_error("malformed records line in " + path + ": " + line);
    }
    out.push_back(r);
  }
  return out;
}

EvalReport evaluate(ForgeryNet& model, const std::vector<EvalSet>& sets, const RunConfig& cfg, const EvalOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t total_clips = 0;
  for (const auto& s : sets) {
    if (!s.dirs.empty() && s.dirs.size() != s.clips.size())
      throw invalid_argument("clip directory list does not match clips for dataset " + s.name);
    total_clips += s.clips.size();
  }
  if (total_clips == 0) throw invalid_argument("empty dataset: nothing to evaluate");

  std::vector<double> sweep_thresholds;
  if (opts.sweep_threshold)
    for (int i = 1; i < 20; ++i) sweep_thresholds.push_back(0.05 * i);
  std::vector<double> sweep_sum(sweep_thresholds.size(), 0.0);
  int64_t manipulated = 0;

  std::vector<FrameRecord> records;
  std::vector<std::pair<std::string, int>> clip_keys;
  for (const auto& set : sets) {
    for (std::size_t c = 0; c < set.clips.size(); ++c) {
      const auto& clip = set.clips[c];
      const auto flow = clip_flow_features(clip.frames, cfg.model, set.dirs.empty() ? std::string{} : set.dirs[c]);
      const auto pred = predict(model, clip.frames, flow);
      clip_keys.emplace_back(set.name, static_cast<int>(c));
      for (int t = 0; t < clip.length(); ++t) {
        FrameRecord r;
        r.dataset = set.name;
        r.clip = static_cast<int>(c);
        r.frame = t;
        r.label = clip.labels[t];
        r.tag = datagen::to_string(clip.tag);
        r.score = opts.score_from_mask ? heads::score_from_mask(pred.masks[t]) : pred.scores[t];
        const auto cm = confusion(pred.masks[t], clip.masks[t], opts.threshold);
        r.tp = cm.tp;
        r.fp = cm.fp;
        r.fn = cm.fn;
        records.push_back(r);
        if (r.label == 1) {
          ++manipulated;
          for (std::size_t k = 0; k < sweep_thresholds.size(); ++k)
            sweep_sum[k] += pixel_f1(pred.masks[t], clip.masks[t], sweep_thresholds[k]);
        }
      }
    }
  }

  auto report = report_from_records(records, opts.threshold);
  report.score_from_mask = opts.score_from_mask;
  report.config = cfg.to_json();
  if (!sweep_thresholds.empty() && manipulated > 0) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < sweep_sum.size(); ++k)
      if (sweep_sum[k] > sweep_sum[best]) best = k;
    report.sweep_best_threshold = sweep_thresholds[best];
    report.sweep_best_f1 = sweep_sum[best] / static_cast<double>(manipulated);
  }
  if (opts.repeats > 1) {
    std::seed_seq seq{static_cast<uint64_t>(opts.seed), uint64_t{0xB007}};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, clip_keys.size() - 1);
    std::map<std::pair<std::string, int>, std::vector<const FrameRecord*>> by_clip;
    for (const auto& r : records) by_clip[{r.dataset, r.clip}].push_back(&r);
    std::vector<double> maps, f1s;
    for (int rep = 0; rep < opts.repeats; ++rep) {
      Aggregate agg;
      for (std::size_t i = 0; i < clip_keys.size(); ++i)
        for (const auto* r : by_clip[clip_keys[pick(rng)]]) agg.add(*r);
      if (auto ap = safe_ap(agg.scores, agg.labels)) maps.push_back(*ap);
      if (auto f1 = agg.f1()) f1s.push_back(*f1);
    }
    auto stats = [](const std::vector<double>& v, double& mean, double& var) {
      mean = var = 0;
      if (v.empty()) return;
      mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      for (double x : v) var += (x - mean) * (x - mean);
      if (v.size() > 1) var /= static_cast<double>(v.size() - 1);
    };
    RepeatStats rs;
    rs.repeats = opts.repeats;
    stats(maps, rs.map_mean, rs.map_var);
    stats(f1s, rs.f1_mean, rs.f1_var);
    report.repeats = rs;
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<SweepEntry> compression_sweep(ForgeryNet& model, const std::vector<EvalSet>& sets, const RunConfig& cfg,
                                          const std::vector<datagen::Quality>& qualities, const EvalOptions& opts) {
  if (qualities.empty()) throw invalid_argument("compression sweep needs at least one quality level");
  std::set<datagen::Quality> seen;
  for (auto q : qualities)
    if (!seen.insert(q).second) throw invalid_argument("duplicate quality level " + datagen::to_string(q));
  std::vector<SweepEntry> out;
  for (auto q : qualities) {
    std::vector<EvalSet> encoded;
    for (const auto& s : sets) {
      EvalSet e{s.name, {}, s.dirs};
      for (const auto& clip : s.clips) e.clips.push_back(datagen::reencode_clip(clip, q));
      encoded.push_back(std::move(e));
    }
    out.push_back({q, evaluate(model, encoded, cfg, opts)});
  }
  return out;
}

nlohmann::json sweep_table(const std::vector<SweepEntry>& entries) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries) {
    rows.push_back({{"quality", datagen::to_string(e.quality)},
                    {"quality_factor", datagen::quality_factor(e.quality)},
                    {"map", opt_json(e.report.ap_pooled)},
                    {"f1", opt_json(e.report.f1_mean)}});
  }
  return rows;
}

}  // namespace mvf::evaluation
