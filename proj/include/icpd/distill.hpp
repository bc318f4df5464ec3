// Self-distillation loss machinery: layer weights, feature-alignment loss,
// the cosine-decay mixing coefficient, and total-loss assembly.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icpd/tensor.hpp"

namespace icpd {

enum class WeightScheme { Uniform, LinearNormalized };

WeightScheme weight_scheme_from_string(const std::string& s);
const char* weight_scheme_name(WeightScheme s);

struct DistillSchedule {
  int baseline_epochs = 25;  // k
  int total_epochs = 100;    // E
  bool weighted = true;
  WeightScheme scheme = WeightScheme::LinearNormalized;

  void validate() const;
};

// w_i = i / sum(1..n) for linear-normalized, 1/n for uniform. Positive,
// sums to 1, strictly increasing under linear-normalized.
std::vector<double> layer_weights(std::size_t n, WeightScheme scheme);

// Sum over layers of MSE(F_i, F_i') — weighted when weights are given.
// F_prime entries enter as detached constants: no gradient flows into them.
Tensor distill_loss(ComputationRecord& rec, const std::vector<Tensor>& features,
                    const std::vector<Tensor>& features_prime,
                    const std::optional<std::vector<double>>& weights);

// 1 for e <= k, cos(pi (e-k) / (2 (E-k))) after, exactly 0 at e = E.
// Epochs are 1-indexed.
double alpha_schedule(int e, int k, int total_epochs);

// alpha * L_task + (1 - alpha) * L_dist.
Tensor total_loss(ComputationRecord& rec, const Tensor& task_loss, const Tensor& distill_loss,
                  double alpha);

}  // namespace icpd
