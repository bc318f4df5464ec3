// Synthetic datasets: isotropic Gaussian clusters for classification and
// the same point clouds, unlabeled, for the VAE task.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "icpd/tensor.hpp"

namespace icpd {

enum class DatasetKind { GaussianClusters, SyntheticVae };

DatasetKind dataset_kind_from_string(const std::string& s);
const char* dataset_kind_name(DatasetKind k);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::GaussianClusters;
  std::size_t classes = 3;
  std::size_t points_per_class = 200;
  std::vector<std::array<double, 2>> centers;  // empty -> ring of radius 2
  double std_dev = 0.35;
  double train_split = 0.8;
  double label_noise = 0.0;  // fraction of train labels re-drawn uniformly
  std::uint64_t seed = 1;

  void validate() const;
};

struct Dataset {
  Tensor points;          // [N x 2]
  std::vector<int> labels;  // empty for the VAE task

  std::size_t size() const { return points.rows(); }
};

struct SplitData {
  Dataset train;
  Dataset test;
};

// Per class, points ~ Normal(center, std^2 I) drawn from spec.seed; the
// first round(points_per_class * train_split) of each class go to train.
SplitData make_clusters(const DatasetSpec& spec);

}  // namespace icpd
