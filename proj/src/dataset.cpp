#include "icpd/dataset.hpp"

#include <cmath>

#include "icpd/rng.hpp"

namespace icpd {

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "gaussian-clusters") return DatasetKind::GaussianClusters;
  if (s == "synthetic-vae") return DatasetKind::SyntheticVae;
  throw std::invalid_argument("unknown dataset kind '" + s + "'");
}

const char* dataset_kind_name(DatasetKind k) {
  return k == DatasetKind::GaussianClusters ? "gaussian-clusters" : "synthetic-vae";
}

void DatasetSpec::validate() const {
  if (classes < 2) throw std::invalid_argument("dataset: needs at least 2 classes");
  if (points_per_class < 2) throw std::invalid_argument("dataset: needs at least 2 points per class");
  if (!(std_dev > 0.0)) throw std::invalid_argument("dataset: std must be > 0");
  if (!(train_split > 0.0 && train_split < 1.0)) {
    throw std::invalid_argument("dataset: train split must lie in (0, 1)");
  }
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) {
    throw std::invalid_argument("dataset: label noise must lie in [0, 1]");
  }
  if (!centers.empty() && centers.size() != classes) {
    throw std::invalid_argument("dataset: " + std::to_string(centers.size()) +
                                " centers for " + std::to_string(classes) + " classes");
  }
}

SplitData make_clusters(const DatasetSpec& spec) {
  spec.validate();

  std::vector<std::array<double, 2>> centers = spec.centers;
  if (centers.empty()) {
    const double pi = 3.14159265358979323846;
    for (std::size_t c = 0; c < spec.classes; ++c) {
      const double theta = 2.0 * pi * static_cast<double>(c) / static_cast<double>(spec.classes);
      centers.push_back({2.0 * std::cos(theta), 2.0 * std::sin(theta)});
    }
  }

  const std::size_t train_per_class = static_cast<std::size_t>(
      std::floor(static_cast<double>(spec.points_per_class) * spec.train_split + 0.5));
  if (train_per_class == 0 || train_per_class == spec.points_per_class) {
    throw std::invalid_argument("dataset: split leaves an empty train or test set");
  }
  const std::size_t test_per_class = spec.points_per_class - train_per_class;

  Rng rng(spec.seed);
  SplitData out;
  out.train.points = Tensor::zeros({spec.classes * train_per_class, 2});
  out.test.points = Tensor::zeros({spec.classes * test_per_class, 2});

  std::size_t itrain = 0;
  std::size_t itest = 0;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t p = 0; p < spec.points_per_class; ++p) {
      const double x = centers[c][0] + spec.std_dev * rng.normal();
      const double y = centers[c][1] + spec.std_dev * rng.normal();
      if (p < train_per_class) {
        out.train.points.at(itrain, 0) = x;
        out.train.points.at(itrain, 1) = y;
        out.train.labels.push_back(static_cast<int>(c));
        ++itrain;
      } else {
        out.test.points.at(itest, 0) = x;
        out.test.points.at(itest, 1) = y;
        out.test.labels.push_back(static_cast<int>(c));
        ++itest;
      }
    }
  }

  if (spec.label_noise > 0.0) {
    // noise only corrupts training labels; the test set stays clean
    Rng noise_rng(Rng::derive(spec.seed, 0x6e6f6973));
    for (int& label : out.train.labels) {
      if (noise_rng.uniform01() < spec.label_noise) {
        label = static_cast<int>(noise_rng.bounded(spec.classes));
      }
    }
  }

  if (spec.kind == DatasetKind::SyntheticVae) {
    out.train.labels.clear();
    out.test.labels.clear();
  }
  return out;
}

}  // namespace icpd
