#include "icpd/optimizer.hpp"

#include <cmath>

namespace icpd {

OptKind opt_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptKind::Sgd;
  if (s == "adam") return OptKind::Adam;
  throw std::invalid_argument("unknown optimizer kind '" + s + "'");
}

const char* opt_kind_name(OptKind k) { return k == OptKind::Sgd ? "sgd" : "adam"; }

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("optimizer: momentum must lie in [0, 1)");
  }
  if (batch_size < 1) throw std::invalid_argument("optimizer: batch size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("optimizer: betas must lie in [0, 1)");
  }
}

WeightOptimizer::WeightOptimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void WeightOptimizer::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("optimizer: parameter/gradient count mismatch");
  }
  if (cfg_.kind == OptKind::Sgd) {
    if (velocity_.empty()) {
      for (const Tensor* p : params) velocity_.push_back(Tensor::zeros(p->shape));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      Tensor& vel = velocity_[i];
      for (std::size_t j = 0; j < p.numel(); ++j) {
        vel.values[j] = cfg_.momentum * vel.values[j] + grads[i].values[j];
        p.values[j] -= cfg_.learning_rate * vel.values[j];
      }
    }
  } else {
    if (m_.empty()) {
      for (const Tensor* p : params) {
        m_.push_back(Tensor::zeros(p->shape));
        v_.push_back(Tensor::zeros(p->shape));
      }
    }
    t_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      for (std::size_t j = 0; j < p.numel(); ++j) {
        const double g = grads[i].values[j];
        double& m = m_[i].values[j];
        double& v = v_[i].values[j];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
        p.values[j] -= cfg_.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
      }
    }
  }
}

}  // namespace icpd
