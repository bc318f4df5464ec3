#pragma once

#include <vector>

#include "icpd/dataset.hpp"
#include "icpd/models.hpp"

namespace icpd {

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// argmax over logits rows; ties resolve to the lowest class index
std::vector<int> predict(const ClassifierModel& model, const Tensor& points);

// Accuracy and macro-F1. Classes absent from the evaluation set are
// excluded from the macro average; classes never predicted score F1 = 0.
Metrics evaluate_metrics(const ClassifierModel& model, const Dataset& data);
Metrics metrics_from_predictions(const std::vector<int>& predicted,
                                 const std::vector<int>& labels, std::size_t classes);

}  // namespace icpd
