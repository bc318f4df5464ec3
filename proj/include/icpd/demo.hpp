// Decision-boundary demonstration: trains a classifier on the cluster task,
// perturbs every point with i-FGSM (loss ascent) and ICP (loss descent) at
// the same step size, and emits grid/points CSVs plus a summary JSON.
#pragma once

#include <string>

#include "icpd/config.hpp"

namespace icpd {

struct DemoSummary {
  double train_accuracy = 0.0;
  double original_accuracy = 0.0;
  double ifgsm_accuracy = 0.0;
  double icp_accuracy = 0.0;
};

// Writes grid.csv, points.csv, summary.json into out_dir. Rejects with a
// numeric_error when the trained model misses demo.min_train_accuracy.
DemoSummary demo_fig1(const RunConfig& cfg, const std::string& out_dir);

}  // namespace icpd
