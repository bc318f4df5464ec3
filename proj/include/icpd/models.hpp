// Feature-extraction networks with named intermediate taps, a linear
// classifier head, a small MLP VAE, and their task losses.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icpd/rng.hpp"
#include "icpd/tensor.hpp"

namespace icpd {

enum class Act { None, Tanh, Relu };

struct LayerSpec {
  std::string name;
  std::size_t in_width = 0;
  std::size_t out_width = 0;
  Act act = Act::Tanh;
};

// Ordered dense layers; tap names select which layer outputs are exported
// as intermediate features F_1..F_n (in network order).
struct FeatureNet {
  std::vector<LayerSpec> layers;
  std::vector<Tensor> weights;  // per layer, [in x out]
  std::vector<Tensor> biases;   // per layer, [out]
  std::vector<std::string> taps;

  std::size_t input_width() const { return layers.front().in_width; }
  std::size_t output_width() const { return layers.back().out_width; }
  void validate() const;
};

struct ClassifierModel {
  FeatureNet features;
  Tensor head_weight;  // [feature_out x classes]
  Tensor head_bias;    // [classes]
  std::size_t classes = 0;

  void validate() const;
};

struct VAEModel {
  FeatureNet encoder;  // final layer emits [mu | log_var], width 2*latent
  FeatureNet decoder;  // latent -> data width
  std::size_t latent_width = 0;

  std::size_t data_width() const { return encoder.input_width(); }
  void validate() const;
};

// Builds the default toy classifier: input 2, tanh hidden 32-32-16 with taps
// on all three hidden layers, linear head to `classes`.
ClassifierModel make_toy_classifier(std::size_t input_width, std::size_t classes);

// Weights ~ Normal(0, 1/fan_in), biases zero; fully determined by seed.
void init_params(FeatureNet& net, Rng& rng);
void init_params(ClassifierModel& model, std::uint64_t seed);
void init_params(VAEModel& model, std::uint64_t seed);

// Mutable views over all parameter tensors, in a fixed documented order
// (layer weights/biases in layer order, then head / decoder).
std::vector<Tensor*> parameters(ClassifierModel& model);
std::vector<Tensor*> parameters(VAEModel& model);

struct FeaturePass {
  Tensor output;                 // logits [B x C] or reconstruction [B x D]
  std::vector<Tensor> features;  // tapped layer outputs, tap order
  std::vector<int> param_ids;    // node ids aligned with parameters() order
  Tensor input;                  // the attached input leaf
  // VAE only:
  Tensor mu;
  Tensor log_var;
};

FeaturePass forward_with_features(ComputationRecord& rec, const ClassifierModel& model,
                                  const Tensor& input);
// noise must be [B x latent]; pass zeros for a deterministic (mean) decode.
FeaturePass forward_with_features(ComputationRecord& rec, const VAEModel& model,
                                  const Tensor& input, const Tensor& noise);

enum class Reduction { Mean, Sum };

// Softmax cross-entropy over the batch. Mean reduction is the task loss;
// sum reduction keeps per-sample input gradients unscaled for batched
// per-point refinement.
Tensor classification_loss(ComputationRecord& rec, const Tensor& logits,
                           const std::vector<int>& labels,
                           Reduction reduction = Reduction::Mean);

// Reconstruction MSE (mean over all elements) plus unit-weight KL to the
// standard normal, KL = 0.5 * mean over batch of sum(exp(lv) + mu^2 - 1 - lv).
Tensor vae_loss(ComputationRecord& rec, const Tensor& reconstruction, const Tensor& target,
                const Tensor& mu, const Tensor& log_var);

// z = mu + exp(log_var / 2) * xi, xi standard normal drawn from seed.
Tensor reparameterize(ComputationRecord& rec, const Tensor& mu, const Tensor& log_var,
                      const Tensor& noise);
Tensor reparameterize(const Tensor& mu, const Tensor& log_var, std::uint64_t seed);

Tensor standard_normal_like(const Tensor& t, std::uint64_t seed);

// Flat binary parameter file: one-line JSON manifest, then raw little-endian
// float64 values in manifest order. Layout documented in the README.
void save_params(const std::string& path, const ClassifierModel& model);
void save_params(const std::string& path, const VAEModel& model);
void load_params(const std::string& path, ClassifierModel& model);
void load_params(const std::string& path, VAEModel& model);

}  // namespace icpd
