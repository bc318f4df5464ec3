// Run configuration: one JSON document mirroring the RunConfig fields.
// Unknown fields are rejected so typos cannot silently fall back to defaults.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icpd/dataset.hpp"
#include "icpd/distill.hpp"
#include "icpd/models.hpp"
#include "icpd/optimizer.hpp"
#include "icpd/perturb.hpp"

namespace icpd {

// Maps to CLI exit code 1.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  std::string type = "classifier";  // classifier | vae
  std::size_t input_width = 2;
  std::vector<std::size_t> hidden = {32, 32, 16};
  std::string activation = "tanh";
  std::vector<std::string> taps;  // empty -> all hidden layers
  // vae only:
  std::size_t latent = 2;
  std::vector<std::size_t> decoder_hidden = {16, 16};
};

struct DemoConfig {
  int ifgsm_iters = 100;
  int icp_iters = 100;
  std::size_t grid_resolution = 200;
  double pad_fraction = 0.1;
  double min_train_accuracy = 0.95;
};

struct RunConfig {
  DatasetSpec dataset;
  ModelConfig model;
  PerturbConfig perturb;
  DistillSchedule schedule;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  DemoConfig demo;

  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
nlohmann::json config_to_json(const RunConfig& cfg);

ClassifierModel build_classifier(const ModelConfig& mc, std::size_t classes);
VAEModel build_vae(const ModelConfig& mc);

}  // namespace icpd
