// Parameter-side optimizers for the training loops (distinct from the
// input-side perturbation rules in perturb.hpp).
#pragma once

#include <string>
#include <vector>

#include "icpd/tensor.hpp"

namespace icpd {

enum class OptKind { Sgd, Adam };

OptKind opt_kind_from_string(const std::string& s);
const char* opt_kind_name(OptKind k);

struct OptimizerConfig {
  OptKind kind = OptKind::Sgd;
  double learning_rate = 0.05;
  double momentum = 0.9;  // sgd only
  std::size_t batch_size = 32;
  double beta1 = 0.9;  // adam only
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

class WeightOptimizer {
 public:
  explicit WeightOptimizer(OptimizerConfig cfg);

  // grads[i] applies to *params[i]; buffers are sized on first use
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  int t_ = 0;
  std::vector<Tensor> velocity_;  // sgd momentum
  std::vector<Tensor> m_;         // adam moments
  std::vector<Tensor> v_;
};

}  // namespace icpd
