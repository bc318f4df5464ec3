#include "icpd/metrics.hpp"

namespace icpd {

std::vector<int> predict(const ClassifierModel& model, const Tensor& points) {
  ComputationRecord rec;
  FeaturePass pass = forward_with_features(rec, model, points);
  std::vector<int> out(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < pass.output.cols(); ++c) {
      if (pass.output.at(i, c) > pass.output.at(i, best)) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

Metrics evaluate_metrics(const ClassifierModel& model, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("evaluate_metrics: empty evaluation set");
  if (data.labels.size() != data.size()) {
    throw std::invalid_argument("evaluate_metrics: dataset has no labels");
  }
  return metrics_from_predictions(predict(model, data.points), data.labels, model.classes);
}

Metrics metrics_from_predictions(const std::vector<int>& predicted,
                                 const std::vector<int>& labels, std::size_t classes) {
  if (predicted.size() != labels.size() || labels.empty()) {
    throw std::invalid_argument("metrics: prediction/label sizes must match and be non-empty");
  }
  std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0), support(classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto truth = static_cast<std::size_t>(labels[i]);
    const auto pred = static_cast<std::size_t>(predicted[i]);
    ++support[truth];
    if (pred == truth) {
      ++correct;
      ++tp[truth];
    } else {
      ++fp[pred];
      ++fn[truth];
    }
  }

  double f1_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (support[c] == 0) continue;  // absent classes are excluded
    ++present;
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
  }

  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  m.macro_f1 = present > 0 ? f1_sum / static_cast<double>(present) : 0.0;
  return m;
}

}  // namespace icpd
