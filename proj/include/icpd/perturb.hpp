// Input-space perturbation rules: adversarial sign-gradient ascent (FGSM,
// i-FGSM) and constructive gradient descent on the input (SGD / Adam /
// AdEMAMix variants), driven by a caller-supplied loss-and-gradient oracle.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icpd/tensor.hpp"

namespace icpd {

enum class Variant { Fgsm, Ifgsm, SgdIcp, AdamIcp, AdemamixIcp };

Variant variant_from_string(const std::string& s);
const char* variant_name(Variant v);
bool is_constructive(Variant v);

struct PerturbConfig {
  Variant variant = Variant::SgdIcp;
  double epsilon = 0.002;  // step size
  int iterations = 5;      // T
  double beta1 = 0.9;
  double beta2 = 0.999;
  double beta3 = 0.9999;   // slow moment decay, held constant
  double alpha_mix = 5.0;  // slow moment mixing factor
  double delta = 1e-8;     // denominator stabilizer
  std::optional<std::pair<double, double>> clamp;

  void validate() const;
};

// Moment buffers for the adaptive variants; zero-initialized per input.
struct PerturbState {
  int t = 0;
  Tensor m;   // first moment
  Tensor v;   // second moment
  Tensor m2;  // slow first moment

  static PerturbState zeros_like(const Tensor& x);
};

struct LossGrad {
  double loss = 0.0;
  Tensor grad;
};

// Loss and gradient of the loss with respect to the input, with model
// parameters held fixed. Must be deterministic: repeated calls at the same
// input agree bit-exactly.
using GradOracle = std::function<LossGrad(const Tensor&)>;

struct RefineResult {
  Tensor refined;              // detached from any computation record
  std::vector<double> losses;  // T+1 values: before step 1 through after step T
};

// x + epsilon * sgn(grad J); sgn(0) = 0.
Tensor fgsm_step(const Tensor& x, const GradOracle& oracle, double epsilon);

// T repeated FGSM steps, re-querying the oracle each iteration.
RefineResult ifgsm_refine(const Tensor& x, const GradOracle& oracle, double epsilon, int iterations);

// x - epsilon * grad J (full gradient, not sign).
Tensor icp_step_sgd(const Tensor& x, const GradOracle& oracle, double epsilon);

// Adam-style moments on the input gradient; state advances by one step.
Tensor icp_step_adam(const Tensor& x, const GradOracle& oracle, const PerturbConfig& cfg,
                     PerturbState& state);

// Adam step augmented with a slow EMA mixed into the numerator.
Tensor icp_step_ademamix(const Tensor& x, const GradOracle& oracle, const PerturbConfig& cfg,
                         PerturbState& state);

// Runs T steps of the configured constructive variant from a fresh state,
// applying the optional clamp after each step.
RefineResult icp_refine(const Tensor& x, const GradOracle& oracle, const PerturbConfig& cfg);

}  // namespace icpd
