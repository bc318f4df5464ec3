#include "icpd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace icpd {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw config_error("unknown field '" + key + "' in " + where);
    }
  }
}

template <class T>
T get_field(const json& obj, const std::string& where, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw config_error("bad value for '" + key + "' in " + where + ": " + e.what());
  }
}

Act act_from_string(const std::string& s) {
  if (s == "tanh") return Act::Tanh;
  if (s == "relu") return Act::Relu;
  if (s == "none") return Act::None;
  throw config_error("unknown activation '" + s + "'");
}

DatasetSpec parse_dataset(const json& j) {
  reject_unknown(j, "dataset", {"kind", "classes", "points_per_class", "centers", "std",
                                "train_split", "label_noise", "seed"});
  DatasetSpec spec;
  try {
    spec.kind = dataset_kind_from_string(get_field<std::string>(j, "dataset", "kind",
                                                                "gaussian-clusters"));
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  }
  spec.classes = get_field<std::size_t>(j, "dataset", "classes", spec.classes);
  spec.points_per_class =
      get_field<std::size_t>(j, "dataset", "points_per_class", spec.points_per_class);
  spec.std_dev = get_field<double>(j, "dataset", "std", spec.std_dev);
  spec.train_split = get_field<double>(j, "dataset", "train_split", spec.train_split);
  spec.label_noise = get_field<double>(j, "dataset", "label_noise", spec.label_noise);
  spec.seed = get_field<std::uint64_t>(j, "dataset", "seed", spec.seed);
  if (j.contains("centers")) {
    for (const auto& c : j.at("centers")) {
      if (!c.is_array() || c.size() != 2) {
        throw config_error("dataset centers must be [x, y] pairs");
      }
      spec.centers.push_back({c[0].get<double>(), c[1].get<double>()});
    }
  }
  return spec;
}

ModelConfig parse_model(const json& j) {
  reject_unknown(j, "model", {"type", "input_width", "hidden", "activation", "taps", "latent",
                              "decoder_hidden"});
  ModelConfig mc;
  mc.type = get_field<std::string>(j, "model", "type", mc.type);
  if (mc.type != "classifier" && mc.type != "vae") {
    throw config_error("model type must be 'classifier' or 'vae', got '" + mc.type + "'");
  }
  mc.input_width = get_field<std::size_t>(j, "model", "input_width", mc.input_width);
  mc.hidden = get_field<std::vector<std::size_t>>(j, "model", "hidden", mc.hidden);
  mc.activation = get_field<std::string>(j, "model", "activation", mc.activation);
  mc.taps = get_field<std::vector<std::string>>(j, "model", "taps", mc.taps);
  mc.latent = get_field<std::size_t>(j, "model", "latent", mc.latent);
  mc.decoder_hidden =
      get_field<std::vector<std::size_t>>(j, "model", "decoder_hidden", mc.decoder_hidden);
  if (mc.hidden.empty()) throw config_error("model needs at least one hidden layer");
  return mc;
}

PerturbConfig parse_perturb(const json& j) {
  reject_unknown(j, "perturb", {"variant", "epsilon", "iterations", "beta1", "beta2", "beta3",
                                "alpha_mix", "delta", "clamp"});
  PerturbConfig pc;
  try {
    pc.variant = variant_from_string(get_field<std::string>(j, "perturb", "variant", "sgd-icp"));
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  }
  pc.epsilon = get_field<double>(j, "perturb", "epsilon", pc.epsilon);
  pc.iterations = get_field<int>(j, "perturb", "iterations", pc.iterations);
  pc.beta1 = get_field<double>(j, "perturb", "beta1", pc.beta1);
  pc.beta2 = get_field<double>(j, "perturb", "beta2", pc.beta2);
  pc.beta3 = get_field<double>(j, "perturb", "beta3", pc.beta3);
  pc.alpha_mix = get_field<double>(j, "perturb", "alpha_mix", pc.alpha_mix);
  pc.delta = get_field<double>(j, "perturb", "delta", pc.delta);
  if (j.contains("clamp")) {
    const auto& c = j.at("clamp");
    if (!c.is_array() || c.size() != 2) throw config_error("perturb clamp must be [lo, hi]");
    pc.clamp = std::make_pair(c[0].get<double>(), c[1].get<double>());
  }
  return pc;
}

DistillSchedule parse_schedule(const json& j) {
  reject_unknown(j, "schedule", {"baseline_epochs", "total_epochs", "weighted", "weight_scheme"});
  DistillSchedule s;
  s.baseline_epochs = get_field<int>(j, "schedule", "baseline_epochs", s.baseline_epochs);
  s.total_epochs = get_field<int>(j, "schedule", "total_epochs", s.total_epochs);
  s.weighted = get_field<bool>(j, "schedule", "weighted", s.weighted);
  try {
    s.scheme = weight_scheme_from_string(
        get_field<std::string>(j, "schedule", "weight_scheme", "linear-normalized"));
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  }
  return s;
}

OptimizerConfig parse_optimizer(const json& j) {
  reject_unknown(j, "optimizer",
                 {"kind", "learning_rate", "momentum", "batch_size", "beta1", "beta2", "eps"});
  OptimizerConfig oc;
  try {
    oc.kind = opt_kind_from_string(get_field<std::string>(j, "optimizer", "kind", "sgd"));
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  }
  oc.learning_rate = get_field<double>(j, "optimizer", "learning_rate", oc.learning_rate);
  oc.momentum = get_field<double>(j, "optimizer", "momentum", oc.momentum);
  oc.batch_size = get_field<std::size_t>(j, "optimizer", "batch_size", oc.batch_size);
  oc.beta1 = get_field<double>(j, "optimizer", "beta1", oc.beta1);
  oc.beta2 = get_field<double>(j, "optimizer", "beta2", oc.beta2);
  oc.eps = get_field<double>(j, "optimizer", "eps", oc.eps);
  return oc;
}

DemoConfig parse_demo(const json& j) {
  reject_unknown(j, "demo", {"ifgsm_iters", "icp_iters", "grid_resolution", "pad_fraction",
                             "min_train_accuracy"});
  DemoConfig d;
  d.ifgsm_iters = get_field<int>(j, "demo", "ifgsm_iters", d.ifgsm_iters);
  d.icp_iters = get_field<int>(j, "demo", "icp_iters", d.icp_iters);
  d.grid_resolution = get_field<std::size_t>(j, "demo", "grid_resolution", d.grid_resolution);
  d.pad_fraction = get_field<double>(j, "demo", "pad_fraction", d.pad_fraction);
  d.min_train_accuracy = get_field<double>(j, "demo", "min_train_accuracy", d.min_train_accuracy);
  if (d.ifgsm_iters < 0 || d.icp_iters < 0) throw config_error("demo iteration counts must be >= 0");
  if (d.grid_resolution < 2) throw config_error("demo grid resolution must be >= 2");
  return d;
}

}  // namespace

void RunConfig::validate() const {
  try {
    dataset.validate();
    perturb.validate();
    schedule.validate();
    optimizer.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  }
  if (model.type == "vae" && dataset.kind != DatasetKind::SyntheticVae) {
    throw config_error("vae model requires dataset kind 'synthetic-vae'");
  }
  if (model.type == "classifier" && dataset.kind != DatasetKind::GaussianClusters) {
    throw config_error("classifier model requires dataset kind 'gaussian-clusters'");
  }
  if (model.input_width != 2) {
    throw config_error("model input width must be 2 to match the 2-d datasets");
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
  reject_unknown(j, "config root",
                 {"dataset", "model", "perturb", "schedule", "optimizer", "seed", "demo"});
  RunConfig cfg;
  if (j.contains("dataset")) cfg.dataset = parse_dataset(j.at("dataset"));
  if (j.contains("model")) cfg.model = parse_model(j.at("model"));
  if (j.contains("perturb")) cfg.perturb = parse_perturb(j.at("perturb"));
  if (j.contains("schedule")) cfg.schedule = parse_schedule(j.at("schedule"));
  if (j.contains("optimizer")) cfg.optimizer = parse_optimizer(j.at("optimizer"));
  if (j.contains("demo")) cfg.demo = parse_demo(j.at("demo"));
  cfg.seed = get_field<std::uint64_t>(j, "config root", "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  json j;
  j["dataset"] = {{"kind", dataset_kind_name(cfg.dataset.kind)},
                  {"classes", cfg.dataset.classes},
                  {"points_per_class", cfg.dataset.points_per_class},
                  {"std", cfg.dataset.std_dev},
                  {"train_split", cfg.dataset.train_split},
                  {"label_noise", cfg.dataset.label_noise},
                  {"seed", cfg.dataset.seed}};
  if (!cfg.dataset.centers.empty()) {
    json centers = json::array();
    for (const auto& c : cfg.dataset.centers) centers.push_back({c[0], c[1]});
    j["dataset"]["centers"] = centers;
  }
  j["model"] = {{"type", cfg.model.type},
                {"input_width", cfg.model.input_width},
                {"hidden", cfg.model.hidden},
                {"activation", cfg.model.activation},
                {"taps", cfg.model.taps}};
  if (cfg.model.type == "vae") {
    j["model"]["latent"] = cfg.model.latent;
    j["model"]["decoder_hidden"] = cfg.model.decoder_hidden;
  }
  j["perturb"] = {{"variant", variant_name(cfg.perturb.variant)},
                  {"epsilon", cfg.perturb.epsilon},
                  {"iterations", cfg.perturb.iterations},
                  {"beta1", cfg.perturb.beta1},
                  {"beta2", cfg.perturb.beta2},
                  {"beta3", cfg.perturb.beta3},
                  {"alpha_mix", cfg.perturb.alpha_mix},
                  {"delta", cfg.perturb.delta}};
  if (cfg.perturb.clamp) {
    j["perturb"]["clamp"] = {cfg.perturb.clamp->first, cfg.perturb.clamp->second};
  }
  j["schedule"] = {{"baseline_epochs", cfg.schedule.baseline_epochs},
                   {"total_epochs", cfg.schedule.total_epochs},
                   {"weighted", cfg.schedule.weighted},
                   {"weight_scheme", weight_scheme_name(cfg.schedule.scheme)}};
  j["optimizer"] = {{"kind", opt_kind_name(cfg.optimizer.kind)},
                    {"learning_rate", cfg.optimizer.learning_rate},
                    {"momentum", cfg.optimizer.momentum},
                    {"batch_size", cfg.optimizer.batch_size}};
  j["seed"] = cfg.seed;
  return j;
}

ClassifierModel build_classifier(const ModelConfig& mc, std::size_t classes) {
  ClassifierModel m;
  m.classes = classes;
  const Act act = act_from_string(mc.activation);
  std::size_t in = mc.input_width;
  for (std::size_t i = 0; i < mc.hidden.size(); ++i) {
    m.features.layers.push_back({"h" + std::to_string(i + 1), in, mc.hidden[i], act});
    in = mc.hidden[i];
  }
  if (mc.taps.empty()) {
    for (const LayerSpec& l : m.features.layers) m.features.taps.push_back(l.name);
  } else {
    m.features.taps = mc.taps;
  }
  return m;
}

VAEModel build_vae(const ModelConfig& mc) {
  VAEModel m;
  m.latent_width = mc.latent;
  const Act act = act_from_string(mc.activation);

  std::size_t in = mc.input_width;
  for (std::size_t i = 0; i < mc.hidden.size(); ++i) {
    m.encoder.layers.push_back({"e" + std::to_string(i + 1), in, mc.hidden[i], act});
    in = mc.hidden[i];
  }
  m.encoder.layers.push_back({"eout", in, 2 * mc.latent, Act::None});

  in = mc.latent;
  for (std::size_t i = 0; i < mc.decoder_hidden.size(); ++i) {
    m.decoder.layers.push_back({"d" + std::to_string(i + 1), in, mc.decoder_hidden[i], act});
    in = mc.decoder_hidden[i];
  }
  m.decoder.layers.push_back({"dout", in, mc.input_width, Act::None});

  // distillation taps live on encoder hidden layers only
  if (mc.taps.empty()) {
    for (std::size_t i = 0; i + 1 < m.encoder.layers.size(); ++i) {
      m.encoder.taps.push_back(m.encoder.layers[i].name);
    }
  } else {
    for (const std::string& tap : mc.taps) {
      if (tap == "eout") throw config_error("vae taps must name encoder hidden layers");
      m.encoder.taps.push_back(tap);
    }
  }
  return m;
}

}  // namespace icpd
