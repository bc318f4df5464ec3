#include "icpd/distill.hpp"

#include <cmath>

namespace icpd {

WeightScheme weight_scheme_from_string(const std::string& s) {
  if (s == "uniform") return WeightScheme::Uniform;
  if (s == "linear-normalized") return WeightScheme::LinearNormalized;
  throw std::invalid_argument("unknown weight scheme '" + s + "'");
}

const char* weight_scheme_name(WeightScheme s) {
  return s == WeightScheme::Uniform ? "uniform" : "linear-normalized";
}

void DistillSchedule::validate() const {
  if (baseline_epochs < 0) throw std::invalid_argument("schedule: baseline epochs must be >= 0");
  if (total_epochs < 1) throw std::invalid_argument("schedule: total epochs must be >= 1");
  // k == E is the pure-control run: every epoch stays in the baseline phase
  if (total_epochs < baseline_epochs) {
    throw std::invalid_argument("schedule: total epochs (" + std::to_string(total_epochs) +
                                ") must be >= baseline epochs (" +
                                std::to_string(baseline_epochs) + ")");
  }
}

std::vector<double> layer_weights(std::size_t n, WeightScheme scheme) {
  if (n < 1) throw std::invalid_argument("layer_weights: n must be >= 1");
  std::vector<double> w(n);
  if (scheme == WeightScheme::Uniform) {
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / static_cast<double>(n);
  } else {
    const double denom = static_cast<double>(n * (n + 1)) / 2.0;
    for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<double>(i + 1) / denom;
  }
  return w;
}

Tensor distill_loss(ComputationRecord& rec, const std::vector<Tensor>& features,
                    const std::vector<Tensor>& features_prime,
                    const std::optional<std::vector<double>>& weights) {
  if (features.empty()) throw std::invalid_argument("distill_loss: needs at least one layer");
  if (features.size() != features_prime.size()) {
    throw std::invalid_argument("distill_loss: " + std::to_string(features.size()) +
                                " features vs " + std::to_string(features_prime.size()) +
                                " targets");
  }
  if (weights && weights->size() != features.size()) {
    throw std::invalid_argument("distill_loss: weight count does not match layer count");
  }
  Tensor combined;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].shape != features_prime[i].shape) {
      throw std::invalid_argument("distill_loss: layer " + std::to_string(i) + " shape " +
                                  shape_str(features[i].shape) + " != target shape " +
                                  shape_str(features_prime[i].shape));
    }
    // targets re-enter as fresh constants, so they never carry gradient
    Tensor target = rec.constant(features_prime[i]);
    Tensor mse = rec.mean_reduce(rec.square(rec.subtract(features[i], target)));
    if (weights) mse = rec.multiply(mse, rec.constant(Tensor::scalar((*weights)[i])));
    combined = i == 0 ? mse : rec.add(combined, mse);
  }
  return combined;
}

double alpha_schedule(int e, int k, int total_epochs) {
  if (k < 0 || total_epochs <= k) {
    throw std::invalid_argument("alpha_schedule: requires 0 <= k < E");
  }
  if (e < 1 || e > total_epochs) {
    throw std::invalid_argument("alpha_schedule: epoch " + std::to_string(e) +
                                " outside [1, " + std::to_string(total_epochs) + "]");
  }
  if (e <= k) return 1.0;
  if (e == total_epochs) return 0.0;  // cos(pi/2) exactly
  const double pi = 3.14159265358979323846;
  return std::cos(pi * static_cast<double>(e - k) / (2.0 * static_cast<double>(total_epochs - k)));
}

Tensor total_loss(ComputationRecord& rec, const Tensor& task_loss, const Tensor& distill_loss,
                  double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("total_loss: alpha must lie in [0, 1]");
  }
  Tensor weighted_task = rec.multiply(task_loss, rec.constant(Tensor::scalar(alpha)));
  Tensor weighted_dist = rec.multiply(distill_loss, rec.constant(Tensor::scalar(1.0 - alpha)));
  return rec.add(weighted_task, weighted_dist);
}

}  // namespace icpd
