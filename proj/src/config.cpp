#include "config.hpp"

#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "errors.hpp"

namespace mvf {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

// List values on the command line: "a,b,c" or "[a, b, c]".
std::vector<std::string> split_list(std::string v) {
  v = trim(v);
  if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("not a boolean: " + v);
}

}  // namespace

RunConfig::RunConfig() { bind(); }
RunConfig::RunConfig(const RunConfig& other)
    : seed(other.seed),
      workers(other.workers),
      device(other.device),
      out(other.out),
      freeze_constrained(other.freeze_constrained),
      intermediate_stage(other.intermediate_stage),
      data(other.data),
      model(other.model),
      pretrain(other.pretrain),
      train(other.train),
      loss(other.loss),
      eval(other.eval) {
  bind();
}
RunConfig& RunConfig::operator=(const RunConfig& other) {
  if (this != &other) {
    seed = other.seed;
    workers = other.workers;
    device = other.device;
    out = other.out;
    freeze_constrained = other.freeze_constrained;
    intermediate_stage = other.intermediate_stage;
    data = other.data;
    model = other.model;
    pretrain = other.pretrain;
    train = other.train;
    loss = other.loss;
    eval = other.eval;
  }
  return *this;
}

void RunConfig::bind() {
  fields_.clear();
  auto& f = fields_;
  f["seed"] = &seed;
  f["workers"] = &workers;
  f["device"] = &device;
  f["out"] = &out;
  f["freeze_constrained"] = &freeze_constrained;
  f["intermediate_stage"] = &intermediate_stage;

  f["data.height"] = &data.height;
  f["data.width"] = &data.width;
  f["data.frames"] = &data.frames;
  f["data.num_clips"] = &data.num_clips;
  f["data.manipulated_fraction"] = &data.manipulated_fraction;
  f["data.tags"] = &data.tags;
  f["data.area_lo"] = &data.area_lo;
  f["data.area_hi"] = &data.area_hi;
  f["data.edit_ops"] = &data.edit_ops;
  f["data.camera_models"] = &data.camera_models;
  f["data.frames_per_model"] = &data.frames_per_model;
  f["data.val_fraction"] = &data.val_fraction;

  f["model.constrained_filters"] = &model.constrained_filters;
  f["model.context_channels"] = &model.context_channels;
  f["model.embed_dim"] = &model.embed_dim;
  f["model.heads"] = &model.heads;
  f["model.encoder_layers"] = &model.encoder_layers;
  f["model.flat_encoder_layers"] = &model.flat_encoder_layers;
  f["model.fir_expand"] = &model.fir_expand;
  f["model.scales"] = &model.scales;
  f["model.pretrain_scales"] = &model.pretrain_scales;
  f["model.reference_height"] = &model.reference_height;
  f["model.reference_width"] = &model.reference_width;
  f["model.temporal_fusion_conv"] = &model.temporal_fusion_conv;
  f["model.flow_order"] = &model.flow_order;
  f["model.flow_estimator"] = &model.flow_estimator;
  f["model.flow_dir"] = &model.flow_dir;
  f["model.flow_levels"] = &model.flow_levels;
  f["model.flow_iterations"] = &model.flow_iterations;
  f["model.flow_smoothness"] = &model.flow_smoothness;
  f["model.ablation"] = &model.ablation;

  for (auto [name, stage] : {std::pair{"pretrain", &pretrain}, std::pair{"train", &train}}) {
    const std::string p = std::string(name) + ".";
    f[p + "epochs"] = &stage->epochs;
    f[p + "lr"] = &stage->lr;
    f[p + "momentum"] = &stage->momentum;
    f[p + "lr_decay"] = &stage->lr_decay;
    f[p + "decay_every"] = &stage->decay_every;
    f[p + "batch"] = &stage->batch;
    f[p + "grad_clip"] = &stage->grad_clip;
  }

  f["loss.gamma"] = &loss.gamma;
  f["loss.alpha"] = &loss.alpha;
  f["loss.beta"] = &loss.beta;
  f["loss.gamma_mult"] = &loss.gamma_mult;
  f["loss.alpha_mult"] = &loss.alpha_mult;
  f["loss.beta_mult"] = &loss.beta_mult;
  f["loss.dice"] = &loss.dice;
  f["loss.scale_weights"] = &loss.scale_weights;

  f["eval.threshold"] = &eval.threshold;
  f["eval.sweep_threshold"] = &eval.sweep_threshold;
  f["eval.score_from_mask"] = &eval.score_from_mask;
  f["eval.qualities"] = &eval.qualities;
  f["eval.repeats"] = &eval.repeats;
}

std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : fields_) out.push_back(k);
  return out;
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw config_error("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields_.find(key);
  if (it == fields_.end()) throw config_error("unknown config key: " + key);
  try {
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, int>) {
            *p = std::stoi(value);
          } else if constexpr (std::is_same_v<T, int64_t>) {
            *p = std::stoll(value);
          } else if constexpr (std::is_same_v<T, double>) {
            *p = std::stod(value);
          } else if constexpr (std::is_same_v<T, bool>) {
            *p = parse_bool(value);
          } else if constexpr (std::is_same_v<T, std::string>) {
            *p = value;
          } else if constexpr (std::is_same_v<T, std::vector<int>>) {
            p->clear();
            for (const auto& s : split_list(value)) p->push_back(std::stoi(s));
          } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            p->clear();
            for (const auto& s : split_list(value)) p->push_back(std::stod(s));
          } else {
            *p = split_list(value);
          }
        },
        it->second);
  } catch (const std::invalid_argument&) {
    throw config_error("bad value for " + key + ": '" + value + "'");
  } catch (const std::out_of_range&) {
    throw config_error("value out of range for " + key + ": '" + value + "'");
  }
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw not_found("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  merge_yaml(ss.str());
}

void RunConfig::merge_yaml(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
  if (!root || root.IsNull()) return;
  if (!root.IsMap()) throw config_error("config root must be a mapping");

  std::vector<std::string> problems;
  auto apply = [&](const std::string& key, const YAML::Node& node) {
    if (!fields_.count(key)) {
      problems.push_back("unknown key '" + key + "'");
      return;
    }
    std::string value;
    if (node.IsSequence()) {
      for (std::size_t i = 0; i < node.size(); ++i) {
        if (i) value += ",";
        value += node[i].as<std::string>();
      }
    } else if (node.IsScalar()) {
      value = node.as<std::string>();
    } else if (node.IsNull()) {
      value = "";
    } else {
      problems.push_back("key '" + key + "' must be a scalar or list");
      return;
    }
    try {
      set(key, value);
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  };

  for (const auto& kv : root) {
    const auto name = kv.first.as<std::string>();
    if (kv.second.IsMap()) {
      for (const auto& inner : kv.second) apply(name + "." + inner.first.as<std::string>(), inner.second);
    } else {
      apply(name, kv.second);
    }
  }
  if (!problems.empty()) {
    std::string msg = "config schema violations:";
    for (const auto& p : problems) msg += " [" + p + "]";
    throw config_error(msg);
  }
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, ref] : fields_) {
    nlohmann::json value;
    std::visit([&](auto* p) { value = *p; }, ref);
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      j[key] = value;
    } else {
      j[key.substr(0, dot)][key.substr(dot + 1)] = value;
    }
  }
  return j;
}

void RunConfig::merge_json(const nlohmann::json& j) {
  std::vector<std::string> problems;
  auto apply = [&](const std::string& key, const nlohmann::json& v) {
    auto it = fields_.find(key);
    if (it == fields_.end()) {
      problems.push_back("unknown key '" + key + "'");
      return;
    }
    try {
      std::visit([&](auto* p) { *p = v.get<std::remove_pointer_t<decltype(p)>>(); }, it->second);
    } catch (const nlohmann::json::exception&) {
      problems.push_back("bad value for '" + key + "'");
    }
  };
  for (const auto& [name, value] : j.items()) {
    if (value.is_object()) {
      for (const auto& [inner, v] : value.items()) apply(name + "." + inner, v);
    } else {
      apply(name, value);
    }
  }
  if (!problems.empty()) {
    std::string msg = "config schema violations:";
    for (const auto& p : problems) msg += " [" + p + "]";
    throw config_error(msg);
  }
}

std::string RunConfig::to_yaml() const {
  YAML::Emitter out;
  out << YAML::BeginMap;
  const auto j = to_json();
  auto emit = [&](const nlohmann::json& v) {
    if (v.is_array()) {
      out << YAML::Flow << YAML::BeginSeq;
      for (const auto& e : v) {
        if (e.is_string()) out << e.get<std::string>();
        else out << e.dump();
      }
      out << YAML::EndSeq;
    } else if (v.is_string()) {
      out << v.get<std::string>();
    } else {
      out << v.dump();
    }
  };
  for (const auto& [k, v] : j.items()) {
    if (v.is_object()) continue;
    out << YAML::Key << k << YAML::Value;
    emit(v);
  }
  for (const auto& [k, v] : j.items()) {
    if (!v.is_object()) continue;
    out << YAML::Key << k << YAML::Value << YAML::BeginMap;
    for (const auto& [ik, iv] : v.items()) {
      out << YAML::Key << ik << YAML::Value;
      emit(iv);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace mvf
