#include "icpd/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

namespace icpd {

namespace {

using nlohmann::json;

Tensor forward_layer(ComputationRecord& rec, const Tensor& x, const Tensor& w,
                     const Tensor& b, Act act) {
  Tensor h = rec.bias_add(rec.matmul(x, w), b);
  switch (act) {
    case Act::Tanh: return rec.tanh(h);
    case Act::Relu: return rec.relu(h);
    case Act::None: return h;
  }
  return h;
}

// Forwards a net, registering parameters as leaves; appends their node ids
// (weight then bias per layer) and collects tapped outputs.
Tensor forward_net(ComputationRecord& rec, const FeatureNet& net, const Tensor& x,
                   std::vector<Tensor>* taps_out, std::vector<int>* param_ids) {
  Tensor h = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Tensor w = rec.leaf(net.weights[l]);
    Tensor b = rec.leaf(net.biases[l]);
    if (param_ids) {
      param_ids->push_back(w.node);
      param_ids->push_back(b.node);
    }
    h = forward_layer(rec, h, w, b, net.layers[l].act);
    if (taps_out) {
      for (const std::string& tap : net.taps) {
        if (tap == net.layers[l].name) taps_out->push_back(h);
      }
    }
  }
  return h;
}

void check_input(const FeatureNet& net, const Tensor& input) {
  if (input.rank() != 2 || input.cols() != net.input_width()) {
    throw std::invalid_argument("forward: input shape " + shape_str(input.shape) +
                                " does not match network input width " +
                                std::to_string(net.input_width()));
  }
  if (input.rows() < 1) throw std::invalid_argument("forward: batch must be non-empty");
}

std::vector<std::pair<std::string, const Tensor*>> named_params_net(
    const std::string& prefix, const FeatureNet& net) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    out.emplace_back(prefix + "." + net.layers[l].name + ".weight", &net.weights[l]);
    out.emplace_back(prefix + "." + net.layers[l].name + ".bias", &net.biases[l]);
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> named_params(const ClassifierModel& m) {
  auto out = named_params_net("features", m.features);
  out.emplace_back("head.weight", &m.head_weight);
  out.emplace_back("head.bias", &m.head_bias);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> named_params(const VAEModel& m) {
  auto out = named_params_net("encoder", m.encoder);
  auto dec = named_params_net("decoder", m.decoder);
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

void save_named(const std::string& path,
                const std::vector<std::pair<std::string, const Tensor*>>& params) {
  json manifest;
  manifest["format"] = "icpd-params";
  manifest["version"] = 1;
  manifest["tensors"] = json::array();
  for (const auto& [name, t] : params) {
    manifest["tensors"].push_back({{"name", name}, {"shape", t->shape}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << manifest.dump() << "\n";
  for (const auto& [name, t] : params) {
    out.write(reinterpret_cast<const char*>(t->values.data()),
              static_cast<std::streamsize>(t->values.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void load_named(const std::string& path,
                const std::vector<std::pair<std::string, Tensor*>>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("missing manifest in '" + path + "'");
  json manifest = json::parse(line);
  if (manifest.value("format", "") != "icpd-params") {
    throw std::runtime_error("'" + path + "' is not an icpd parameter file");
  }
  const json& tensors = manifest.at("tensors");
  if (tensors.size() != params.size()) {
    throw std::runtime_error("parameter count mismatch: file has " +
                             std::to_string(tensors.size()) + ", model expects " +
                             std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = params[i];
    if (tensors[i].at("name").get<std::string>() != name) {
      throw std::runtime_error("parameter name mismatch at index " + std::to_string(i) +
                               ": file has '" + tensors[i].at("name").get<std::string>() +
                               "', model expects '" + name + "'");
    }
    auto shape = tensors[i].at("shape").get<std::vector<std::size_t>>();
    if (shape != t->shape) {
      throw std::runtime_error("shape mismatch for '" + name + "': file has " +
                               shape_str(shape) + ", model expects " + shape_str(t->shape));
    }
    in.read(reinterpret_cast<char*>(t->values.data()),
            static_cast<std::streamsize>(t->values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated values for '" + name + "' in '" + path + "'");
  }
}

std::vector<std::pair<std::string, Tensor*>> mutable_view(
    std::vector<std::pair<std::string, const Tensor*>> v) {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.reserve(v.size());
  for (auto& [name, t] : v) out.emplace_back(name, const_cast<Tensor*>(t));
  return out;
}

}  // namespace

void FeatureNet::validate() const {
  if (layers.empty()) throw std::invalid_argument("FeatureNet: needs at least one layer");
  std::set<std::string> names;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& spec = layers[l];
    if (spec.in_width < 1 || spec.out_width < 1) {
      throw std::invalid_argument("layer '" + spec.name + "': widths must be >= 1");
    }
    if (!names.insert(spec.name).second) {
      throw std::invalid_argument("duplicate layer name '" + spec.name + "'");
    }
    if (l > 0 && layers[l - 1].out_width != spec.in_width) {
      throw std::invalid_argument("layer '" + spec.name + "': input width " +
                                  std::to_string(spec.in_width) +
                                  " does not match previous output width " +
                                  std::to_string(layers[l - 1].out_width));
    }
  }
  // taps must be a subsequence of layer order
  std::size_t cursor = 0;
  for (const std::string& tap : taps) {
    while (cursor < layers.size() && layers[cursor].name != tap) ++cursor;
    if (cursor == layers.size()) {
      throw std::invalid_argument("tap '" + tap + "' is not a layer name in network order");
    }
    ++cursor;
  }
  if (weights.size() != layers.size() || biases.size() != layers.size()) {
    throw std::invalid_argument("FeatureNet: parameters not initialized");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (weights[l].shape != std::vector<std::size_t>{layers[l].in_width, layers[l].out_width} ||
        biases[l].shape != std::vector<std::size_t>{layers[l].out_width}) {
      throw std::invalid_argument("layer '" + layers[l].name + "': parameter shape mismatch");
    }
  }
}

void ClassifierModel::validate() const {
  features.validate();
  if (classes < 2) throw std::invalid_argument("classifier: needs at least 2 classes");
  if (head_weight.shape != std::vector<std::size_t>{features.output_width(), classes} ||
      head_bias.shape != std::vector<std::size_t>{classes}) {
    throw std::invalid_argument("classifier: head shape does not match feature width");
  }
}

void VAEModel::validate() const {
  encoder.validate();
  decoder.validate();
  if (latent_width < 1) throw std::invalid_argument("vae: latent width must be >= 1");
  if (encoder.output_width() != 2 * latent_width) {
    throw std::invalid_argument("vae: encoder output width must be 2 * latent width");
  }
  if (decoder.input_width() != latent_width) {
    throw std::invalid_argument("vae: decoder input width must equal latent width");
  }
  if (decoder.output_width() != encoder.input_width()) {
    throw std::invalid_argument("vae: decoder output width must equal data width");
  }
}

ClassifierModel make_toy_classifier(std::size_t input_width, std::size_t classes) {
  ClassifierModel m;
  m.classes = classes;
  std::size_t in = input_width;
  for (std::size_t w : {32, 32, 16}) {
    m.features.layers.push_back(
        {"h" + std::to_string(m.features.layers.size() + 1), in, w, Act::Tanh});
    in = w;
  }
  m.features.taps = {"h1", "h2", "h3"};
  return m;
}

void init_params(FeatureNet& net, Rng& rng) {
  net.weights.clear();
  net.biases.clear();
  for (const LayerSpec& spec : net.layers) {
    Tensor w = Tensor::zeros({spec.in_width, spec.out_width});
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec.in_width));
    for (double& v : w.values) v = scale * rng.normal();
    net.weights.push_back(std::move(w));
    net.biases.push_back(Tensor::zeros({spec.out_width}));
  }
}

void init_params(ClassifierModel& model, std::uint64_t seed) {
  Rng rng(seed);
  init_params(model.features, rng);
  model.head_weight = Tensor::zeros({model.features.output_width(), model.classes});
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.features.output_width()));
  for (double& v : model.head_weight.values) v = scale * rng.normal();
  model.head_bias = Tensor::zeros({model.classes});
  model.validate();
}

void init_params(VAEModel& model, std::uint64_t seed) {
  Rng rng(seed);
  init_params(model.encoder, rng);
  init_params(model.decoder, rng);
  model.validate();
}

std::vector<Tensor*> parameters(ClassifierModel& model) {
  std::vector<Tensor*> out;
  for (std::size_t l = 0; l < model.features.layers.size(); ++l) {
    out.push_back(&model.features.weights[l]);
    out.push_back(&model.features.biases[l]);
  }
  out.push_back(&model.head_weight);
  out.push_back(&model.head_bias);
  return out;
}

std::vector<Tensor*> parameters(VAEModel& model) {
  std::vector<Tensor*> out;
  for (std::size_t l = 0; l < model.encoder.layers.size(); ++l) {
    out.push_back(&model.encoder.weights[l]);
    out.push_back(&model.encoder.biases[l]);
  }
  for (std::size_t l = 0; l < model.decoder.layers.size(); ++l) {
    out.push_back(&model.decoder.weights[l]);
    out.push_back(&model.decoder.biases[l]);
  }
  return out;
}

FeaturePass forward_with_features(ComputationRecord& rec, const ClassifierModel& model,
                                  const Tensor& input) {
  check_input(model.features, input);
  FeaturePass pass;
  pass.input = rec.leaf(input);
  Tensor h = forward_net(rec, model.features, pass.input, &pass.features, &pass.param_ids);
  Tensor hw = rec.leaf(model.head_weight);
  Tensor hb = rec.leaf(model.head_bias);
  pass.param_ids.push_back(hw.node);
  pass.param_ids.push_back(hb.node);
  pass.output = rec.bias_add(rec.matmul(h, hw), hb);
  return pass;
}

FeaturePass forward_with_features(ComputationRecord& rec, const VAEModel& model,
                                  const Tensor& input, const Tensor& noise) {
  check_input(model.encoder, input);
  const std::size_t batch = input.rows();
  const std::size_t latent = model.latent_width;
  if (noise.shape != std::vector<std::size_t>{batch, latent}) {
    throw std::invalid_argument("vae forward: noise shape " + shape_str(noise.shape) +
                                " must be (batch, latent)");
  }

  FeaturePass pass;
  pass.input = rec.leaf(input);
  Tensor enc = forward_net(rec, model.encoder, pass.input, &pass.features, &pass.param_ids);

  // constant 0/1 selection matrices split [mu | log_var]
  Tensor sel_mu = Tensor::zeros({2 * latent, latent});
  Tensor sel_lv = Tensor::zeros({2 * latent, latent});
  for (std::size_t i = 0; i < latent; ++i) {
    sel_mu.at(i, i) = 1.0;
    sel_lv.at(latent + i, i) = 1.0;
  }
  pass.mu = rec.matmul(enc, rec.constant(sel_mu));
  pass.log_var = rec.matmul(enc, rec.constant(sel_lv));

  Tensor z = reparameterize(rec, pass.mu, pass.log_var, noise);
  pass.output = forward_net(rec, model.decoder, z, nullptr, &pass.param_ids);
  return pass;
}

Tensor classification_loss(ComputationRecord& rec, const Tensor& logits,
                           const std::vector<int>& labels, Reduction reduction) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("classification_loss: logits must be rank-2, got " +
                                shape_str(logits.shape));
  }
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  if (labels.size() != batch) {
    throw std::invalid_argument("classification_loss: " + std::to_string(labels.size()) +
                                " labels for batch of " + std::to_string(batch));
  }
  Tensor onehot = Tensor::zeros({batch, classes});
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw std::invalid_argument("classification_loss: label " + std::to_string(labels[i]) +
                                  " out of range for " + std::to_string(classes) + " classes");
    }
    onehot.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  Tensor logp = rec.log(rec.softmax(logits));
  Tensor picked = rec.sum_reduce(rec.multiply(logp, rec.constant(onehot)));
  const double scale = reduction == Reduction::Mean ? -1.0 / static_cast<double>(batch) : -1.0;
  return rec.multiply(picked, rec.constant(Tensor::scalar(scale)));
}

Tensor vae_loss(ComputationRecord& rec, const Tensor& reconstruction, const Tensor& target,
                const Tensor& mu, const Tensor& log_var) {
  if (reconstruction.shape != target.shape) {
    throw std::invalid_argument("vae_loss: reconstruction shape " +
                                shape_str(reconstruction.shape) + " != target shape " +
                                shape_str(target.shape));
  }
  if (mu.shape != log_var.shape) {
    throw std::invalid_argument("vae_loss: mu shape " + shape_str(mu.shape) +
                                " != log_var shape " + shape_str(log_var.shape));
  }
  Tensor mse = rec.mean_reduce(rec.square(rec.subtract(reconstruction, target)));

  const std::size_t batch = mu.rank() == 2 ? mu.rows() : 1;
  Tensor ones = Tensor::full(mu.shape, 1.0);
  Tensor inner = rec.subtract(rec.add(rec.exp(log_var), rec.square(mu)),
                              rec.add(rec.constant(ones), log_var));
  Tensor kl = rec.multiply(rec.sum_reduce(inner),
                           rec.constant(Tensor::scalar(0.5 / static_cast<double>(batch))));
  return rec.add(mse, kl);
}

Tensor reparameterize(ComputationRecord& rec, const Tensor& mu, const Tensor& log_var,
                      const Tensor& noise) {
  if (mu.shape != log_var.shape || mu.shape != noise.shape) {
    throw std::invalid_argument("reparameterize: mu/log_var/noise shapes must match");
  }
  Tensor half = Tensor::full(log_var.shape, 0.5);
  Tensor std_dev = rec.exp(rec.multiply(log_var, rec.constant(half)));
  return rec.add(mu, rec.multiply(std_dev, rec.constant(noise)));
}

Tensor reparameterize(const Tensor& mu, const Tensor& log_var, std::uint64_t seed) {
  ComputationRecord rec;
  Tensor out = reparameterize(rec, rec.constant(mu), rec.constant(log_var),
                              standard_normal_like(mu, seed));
  return out.detached();
}

Tensor standard_normal_like(const Tensor& t, std::uint64_t seed) {
  Rng rng(seed);
  Tensor out = Tensor::zeros(t.shape);
  for (double& v : out.values) v = rng.normal();
  return out;
}

void save_params(const std::string& path, const ClassifierModel& model) {
  save_named(path, named_params(model));
}
void save_params(const std::string& path, const VAEModel& model) {
  save_named(path, named_params(model));
}
void load_params(const std::string& path, ClassifierModel& model) {
  load_named(path, mutable_view(named_params(model)));
  model.validate();
}
void load_params(const std::string& path, VAEModel& model) {
  load_named(path, mutable_view(named_params(model)));
  model.validate();
}

}  // namespace icpd
