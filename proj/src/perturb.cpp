#include "icpd/perturb.hpp"

#include <algorithm>
#include <cmath>

namespace icpd {

namespace {

void check_grad_shape(const Tensor& x, const LossGrad& lg) {
  if (lg.grad.shape != x.shape) {
    throw std::invalid_argument("perturb: oracle gradient shape " + shape_str(lg.grad.shape) +
                                " does not match input shape " + shape_str(x.shape));
  }
}

void check_state(const Tensor& x, const PerturbState& state) {
  if (state.t < 0) throw std::invalid_argument("perturb: state step counter must be >= 0");
  if (state.m.shape != x.shape || state.v.shape != x.shape || state.m2.shape != x.shape) {
    throw std::invalid_argument("perturb: state moment shapes must match the input shape");
  }
}

void apply_clamp(Tensor& x, const std::optional<std::pair<double, double>>& clamp) {
  if (!clamp) return;
  for (double& v : x.values) v = std::clamp(v, clamp->first, clamp->second);
}

// epsilon * sqrt(1 - beta2^t) / (1 - beta1^t); shared by both adaptive
// variants so the alpha_mix = 0 reduction is bit-exact.
double bias_corrected_scale(double epsilon, double beta1, double beta2, int t) {
  return epsilon * std::sqrt(1.0 - std::pow(beta2, t)) / (1.0 - std::pow(beta1, t));
}

}  // namespace

Variant variant_from_string(const std::string& s) {
  if (s == "fgsm") return Variant::Fgsm;
  if (s == "ifgsm") return Variant::Ifgsm;
  if (s == "sgd-icp") return Variant::SgdIcp;
  if (s == "adam-icp") return Variant::AdamIcp;
  if (s == "ademamix-icp") return Variant::AdemamixIcp;
  throw std::invalid_argument("unknown perturbation variant '" + s + "'");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Fgsm: return "fgsm";
    case Variant::Ifgsm: return "ifgsm";
    case Variant::SgdIcp: return "sgd-icp";
    case Variant::AdamIcp: return "adam-icp";
    case Variant::AdemamixIcp: return "ademamix-icp";
  }
  return "?";
}

bool is_constructive(Variant v) {
  return v == Variant::SgdIcp || v == Variant::AdamIcp || v == Variant::AdemamixIcp;
}

void PerturbConfig::validate() const {
  // epsilon == 0 is accepted as a degenerate no-op refinement
  if (!(epsilon >= 0.0)) throw std::invalid_argument("perturb: epsilon must be >= 0");
  if (iterations < 0) throw std::invalid_argument("perturb: iterations must be >= 0");
  auto in_unit = [](double b) { return b >= 0.0 && b < 1.0; };
  if (!in_unit(beta1) || !in_unit(beta2) || !in_unit(beta3)) {
    throw std::invalid_argument("perturb: beta coefficients must lie in [0, 1)");
  }
  if (!(alpha_mix >= 0.0)) throw std::invalid_argument("perturb: alpha_mix must be >= 0");
  if (!(delta >= 0.0)) throw std::invalid_argument("perturb: delta must be >= 0");
  if (clamp && clamp->first > clamp->second) {
    throw std::invalid_argument("perturb: clamp range must satisfy lo <= hi");
  }
}

PerturbState PerturbState::zeros_like(const Tensor& x) {
  PerturbState s;
  s.m = Tensor::zeros(x.shape);
  s.v = Tensor::zeros(x.shape);
  s.m2 = Tensor::zeros(x.shape);
  return s;
}

Tensor fgsm_step(const Tensor& x, const GradOracle& oracle, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("fgsm_step: epsilon must be > 0");
  LossGrad lg = oracle(x);
  check_grad_shape(x, lg);
  Tensor out = x.detached();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double g = lg.grad.values[i];
    const double sgn = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
    out.values[i] += epsilon * sgn;
  }
  return out;
}

RefineResult ifgsm_refine(const Tensor& x, const GradOracle& oracle, double epsilon,
                          int iterations) {
  if (iterations < 0) throw std::invalid_argument("ifgsm_refine: iterations must be >= 0");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("ifgsm_refine: epsilon must be >= 0");
  RefineResult res;
  res.refined = x.detached();
  res.losses.reserve(static_cast<std::size_t>(iterations) + 1);
  for (int t = 0; t < iterations; ++t) {
    LossGrad lg = oracle(res.refined);
    check_grad_shape(res.refined, lg);
    res.losses.push_back(lg.loss);
    for (std::size_t i = 0; i < res.refined.numel(); ++i) {
      const double g = lg.grad.values[i];
      const double sgn = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
      res.refined.values[i] += epsilon * sgn;
    }
  }
  res.losses.push_back(oracle(res.refined).loss);
  return res;
}

Tensor icp_step_sgd(const Tensor& x, const GradOracle& oracle, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("icp_step_sgd: epsilon must be > 0");
  LossGrad lg = oracle(x);
  check_grad_shape(x, lg);
  Tensor out = x.detached();
  for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] -= epsilon * lg.grad.values[i];
  return out;
}

Tensor icp_step_adam(const Tensor& x, const GradOracle& oracle, const PerturbConfig& cfg,
                     PerturbState& state) {
  cfg.validate();
  check_state(x, state);
  LossGrad lg = oracle(x);
  check_grad_shape(x, lg);

  state.t += 1;
  const double scale = bias_corrected_scale(cfg.epsilon, cfg.beta1, cfg.beta2, state.t);
  Tensor out = x.detached();
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double g = lg.grad.values[i];
    double& m = state.m.values[i];
    double& v = state.v.values[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    out.values[i] -= scale * m / (std::sqrt(v) + cfg.delta);
  }
  return out;
}

Tensor icp_step_ademamix(const Tensor& x, const GradOracle& oracle, const PerturbConfig& cfg,
                         PerturbState& state) {
  cfg.validate();
  check_state(x, state);
  LossGrad lg = oracle(x);
  check_grad_shape(x, lg);

  state.t += 1;
  const double scale = bias_corrected_scale(cfg.epsilon, cfg.beta1, cfg.beta2, state.t);
  // the slow-moment term carries its printed (1 - beta1^t) factor
  const double mix = cfg.alpha_mix * (1.0 - std::pow(cfg.beta1, state.t));
  Tensor out = x.detached();
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double g = lg.grad.values[i];
    double& m1 = state.m.values[i];
    double& m2 = state.m2.values[i];
    double& v = state.v.values[i];
    m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
    m2 = cfg.beta3 * m2 + (1.0 - cfg.beta3) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    out.values[i] -= scale * (m1 + mix * m2) / (std::sqrt(v) + cfg.delta);
  }
  return out;
}

RefineResult icp_refine(const Tensor& x, const GradOracle& oracle, const PerturbConfig& cfg) {
  cfg.validate();
  if (!is_constructive(cfg.variant)) {
    throw std::invalid_argument(std::string("icp_refine: variant '") +
                                variant_name(cfg.variant) + "' is not constructive");
  }
  PerturbState state = PerturbState::zeros_like(x);
  RefineResult res;
  res.refined = x.detached();
  res.losses.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
  if (cfg.epsilon == 0.0) {
    // degenerate no-op: the step operations themselves require epsilon > 0
    const double stay = oracle(res.refined).loss;
    res.losses.assign(static_cast<std::size_t>(cfg.iterations) + 1, stay);
    return res;
  }
  for (int t = 0; t < cfg.iterations; ++t) {
    // step functions query the oracle themselves; capture the loss they see
    LossGrad lg = oracle(res.refined);
    check_grad_shape(res.refined, lg);
    res.losses.push_back(lg.loss);
    auto replay = [&lg](const Tensor&) { return lg; };
    switch (cfg.variant) {
      case Variant::SgdIcp:
        res.refined = icp_step_sgd(res.refined, replay, cfg.epsilon);
        break;
      case Variant::AdamIcp:
        res.refined = icp_step_adam(res.refined, replay, cfg, state);
        break;
      case Variant::AdemamixIcp:
        res.refined = icp_step_ademamix(res.refined, replay, cfg, state);
        break;
      default:
        break;
    }
    apply_clamp(res.refined, cfg.clamp);
  }
  res.losses.push_back(oracle(res.refined).loss);
  return res;
}

}  // namespace icpd
