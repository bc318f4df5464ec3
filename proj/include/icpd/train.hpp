// Training loops: the plain baseline phase, the ICP-driven self-distillation
// phase, and the end-to-end run with CSV/JSON report emission.
#pragma once

#include <string>
#include <variant>
#include <vector>

#include "icpd/config.hpp"
#include "icpd/dataset.hpp"
#include "icpd/distill.hpp"
#include "icpd/metrics.hpp"
#include "icpd/models.hpp"
#include "icpd/optimizer.hpp"
#include "icpd/perturb.hpp"

namespace icpd {

inline constexpr const char* kVersionString = "icpd 0.1.0";

using AnyModel = std::variant<ClassifierModel, VAEModel>;

AnyModel build_model(const RunConfig& cfg);
std::vector<Tensor*> parameters(AnyModel& model);

struct EpochRecord {
  int epoch = 0;
  double alpha = 1.0;
  double task_loss = 0.0;     // mean over the epoch, batch-size weighted
  double distill_loss = 0.0;  // exactly 0 in the baseline phase
  double train_acc = 0.0;     // 0 for VAE runs (no classification metrics)
  double test_acc = 0.0;
  double macro_f1 = 0.0;
  double seconds = 0.0;
};

struct RunReport {
  RunConfig config;
  std::vector<EpochRecord> epochs;
  Metrics final_test;
  double total_seconds = 0.0;
  std::string version = kVersionString;
};

// One minibatch: points, labels (classification), and the per-batch
// reparameterization noise (VAE). The noise is drawn once per batch so the
// student pass, the refinement oracle, and the target pass all agree.
struct Batch {
  Tensor points;
  std::vector<int> labels;
  Tensor noise;
};

std::vector<Batch> make_batches(const AnyModel& model, const Dataset& data,
                                std::size_t batch_size, std::uint64_t run_seed, int epoch);

// Loss and input gradient of the task loss at frozen parameters. For the VAE
// the reconstruction target and noise stay fixed at the batch's originals
// while the input is perturbed.
GradOracle make_input_oracle(const AnyModel& model, const Batch& batch);

// Standard minibatch updates against the task loss alone; alpha recorded as 1.
EpochRecord train_epoch_baseline(AnyModel& model, const SplitData& data, WeightOptimizer& opt,
                                 int epoch, std::uint64_t run_seed);

// Per minibatch: forward the original input, refine it with the configured
// ICP variant, forward the refined input, align tapped features under the
// cosine-decayed loss mixture, then take one optimizer step.
EpochRecord train_epoch_distill(AnyModel& model, const SplitData& data, WeightOptimizer& opt,
                                const PerturbConfig& pcfg, const DistillSchedule& sched,
                                int epoch, std::uint64_t run_seed);

RunReport run(const RunConfig& cfg, const std::string& out_dir);
RunReport run_from_file(const std::string& config_path, const std::string& out_dir);

std::string epochs_csv_text(const std::vector<EpochRecord>& epochs);
void write_epochs_csv(const std::string& path, const std::vector<EpochRecord>& epochs);
nlohmann::json report_to_json(const RunReport& report);
void write_report_json(const std::string& path, const RunReport& report);

}  // namespace icpd
