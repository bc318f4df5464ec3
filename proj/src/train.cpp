#include "icpd/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace icpd {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct TaskPass {
  Tensor loss;
  std::vector<Tensor> features;
  std::vector<int> param_ids;
  Tensor input;
};

// Forward + task loss on one record. `target` is the fixed reconstruction
// target for the VAE (ignored for classification); `points` may be a
// perturbed version of it.
TaskPass task_forward(ComputationRecord& rec, const AnyModel& model, const Tensor& points,
                      const Batch& batch, const Tensor& target) {
  TaskPass out;
  if (const auto* clf = std::get_if<ClassifierModel>(&model)) {
    FeaturePass pass = forward_with_features(rec, *clf, points);
    out.loss = classification_loss(rec, pass.output, batch.labels);
    out.features = std::move(pass.features);
    out.param_ids = std::move(pass.param_ids);
    out.input = pass.input;
  } else {
    const auto& vae = std::get<VAEModel>(model);
    FeaturePass pass = forward_with_features(rec, vae, points, batch.noise);
    out.loss = vae_loss(rec, pass.output, rec.constant(target), pass.mu, pass.log_var);
    out.features = std::move(pass.features);
    out.param_ids = std::move(pass.param_ids);
    out.input = pass.input;
  }
  return out;
}

std::size_t tap_count(const AnyModel& model) {
  if (const auto* clf = std::get_if<ClassifierModel>(&model)) return clf->features.taps.size();
  return std::get<VAEModel>(model).encoder.taps.size();
}

Metrics epoch_metrics(const AnyModel& model, const Dataset& data) {
  if (const auto* clf = std::get_if<ClassifierModel>(&model)) {
    return evaluate_metrics(*clf, data);
  }
  return Metrics{};  // classification metrics do not apply to the VAE task
}

void fill_metrics(EpochRecord& rec, const AnyModel& model, const SplitData& data) {
  if (std::holds_alternative<ClassifierModel>(model)) {
    rec.train_acc = epoch_metrics(model, data.train).accuracy;
    Metrics test = epoch_metrics(model, data.test);
    rec.test_acc = test.accuracy;
    rec.macro_f1 = test.macro_f1;
  }
}

[[noreturn]] void rethrow_with_batch(const numeric_error& e, int epoch, std::size_t batch_idx) {
  throw numeric_error("epoch " + std::to_string(epoch) + ", batch " +
                      std::to_string(batch_idx) + ": " + e.what());
}

}  // namespace

AnyModel build_model(const RunConfig& cfg) {
  if (cfg.model.type == "classifier") {
    ClassifierModel m = build_classifier(cfg.model, cfg.dataset.classes);
    init_params(m, cfg.seed);
    return m;
  }
  VAEModel m = build_vae(cfg.model);
  init_params(m, cfg.seed);
  return m;
}

std::vector<Tensor*> parameters(AnyModel& model) {
  if (auto* clf = std::get_if<ClassifierModel>(&model)) return parameters(*clf);
  return parameters(std::get<VAEModel>(model));
}

std::vector<Batch> make_batches(const AnyModel& model, const Dataset& data,
                                std::size_t batch_size, std::uint64_t run_seed, int epoch) {
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng shuffle_rng(Rng::derive(run_seed, 0x10000u + static_cast<std::uint64_t>(epoch)));
  shuffle_rng.shuffle(order);

  const bool is_vae = std::holds_alternative<VAEModel>(model);
  const std::size_t latent = is_vae ? std::get<VAEModel>(model).latent_width : 0;

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(start + batch_size, n);
    const std::size_t b = end - start;
    Batch batch;
    batch.points = Tensor::zeros({b, data.points.cols()});
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < data.points.cols(); ++j) {
        batch.points.at(i, j) = data.points.at(order[start + i], j);
      }
      if (!data.labels.empty()) batch.labels.push_back(data.labels[order[start + i]]);
    }
    if (is_vae) {
      const std::uint64_t noise_seed =
          Rng::derive(Rng::derive(run_seed, 0x20000u + static_cast<std::uint64_t>(epoch)),
                      batches.size());
      batch.noise = standard_normal_like(Tensor::zeros({b, latent}), noise_seed);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

GradOracle make_input_oracle(const AnyModel& model, const Batch& batch) {
  // fixed target: the batch's original points (VAE reconstruction target)
  Tensor target = batch.points.detached();
  return [&model, batch, target](const Tensor& x) {
    ComputationRecord rec;
    TaskPass pass = task_forward(rec, model, x, batch, target);
    GradientMap grads = rec.backward(pass.loss);
    return LossGrad{pass.loss.values[0], grads.wrt(pass.input).detached()};
  };
}

EpochRecord train_epoch_baseline(AnyModel& model, const SplitData& data, WeightOptimizer& opt,
                                 int epoch, std::uint64_t run_seed) {
  const auto start = Clock::now();
  EpochRecord rec;
  rec.epoch = epoch;
  rec.alpha = 1.0;

  std::vector<Tensor*> params = parameters(model);
  std::vector<Batch> batches =
      make_batches(model, data.train, opt.config().batch_size, run_seed, epoch);

  double loss_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    const Batch& batch = batches[bi];
    try {
      ComputationRecord tape;
      TaskPass pass = task_forward(tape, model, batch.points, batch, batch.points);
      GradientMap gmap = tape.backward(pass.loss);
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (int id : pass.param_ids) grads.push_back(gmap.at_node(id));
      opt.step(params, grads);
      loss_sum += pass.loss.values[0] * static_cast<double>(batch.points.rows());
      count += batch.points.rows();
    } catch (const numeric_error& e) {
      rethrow_with_batch(e, epoch, bi);
    }
  }

  rec.task_loss = loss_sum / static_cast<double>(count);
  rec.distill_loss = 0.0;
  fill_metrics(rec, model, data);
  rec.seconds = elapsed_seconds(start);
  return rec;
}

EpochRecord train_epoch_distill(AnyModel& model, const SplitData& data, WeightOptimizer& opt,
                                const PerturbConfig& pcfg, const DistillSchedule& sched,
                                int epoch, std::uint64_t run_seed) {
  sched.validate();
  if (epoch <= sched.baseline_epochs) {
    throw std::invalid_argument("train_epoch_distill: epoch " + std::to_string(epoch) +
                                " is inside the baseline phase");
  }
  const auto start = Clock::now();
  EpochRecord rec;
  rec.epoch = epoch;
  rec.alpha = alpha_schedule(epoch, sched.baseline_epochs, sched.total_epochs);

  std::vector<Tensor*> params = parameters(model);
  std::vector<Batch> batches =
      make_batches(model, data.train, opt.config().batch_size, run_seed, epoch);

  const std::size_t n_taps = tap_count(model);
  std::optional<std::vector<double>> weights;
  if (sched.weighted) weights = layer_weights(n_taps, sched.scheme);

  double task_sum = 0.0;
  double dist_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    const Batch& batch = batches[bi];
    try {
      // (1) original input -> task loss and tapped features
      ComputationRecord tape;
      TaskPass pass = task_forward(tape, model, batch.points, batch, batch.points);

      // (2) refine the input against the task loss at frozen parameters
      GradOracle oracle = make_input_oracle(model, batch);
      RefineResult refined = icp_refine(batch.points, oracle, pcfg);

      // (3) refined input -> detached target features on a throwaway record
      std::vector<Tensor> target_features;
      {
        ComputationRecord target_tape;
        TaskPass target_pass =
            task_forward(target_tape, model, refined.refined, batch, batch.points);
        for (Tensor& f : target_pass.features) target_features.push_back(f.detached());
      }

      // (4) + (5) feature alignment mixed by the cosine-decayed alpha
      Tensor dist = distill_loss(tape, pass.features, target_features, weights);
      Tensor total = total_loss(tape, pass.loss, dist, rec.alpha);

      // (6) one parameter step
      GradientMap gmap = tape.backward(total);
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (int id : pass.param_ids) grads.push_back(gmap.at_node(id));
      opt.step(params, grads);

      const auto b = static_cast<double>(batch.points.rows());
      task_sum += pass.loss.values[0] * b;
      dist_sum += dist.values[0] * b;
      count += batch.points.rows();
    } catch (const numeric_error& e) {
      rethrow_with_batch(e, epoch, bi);
    }
  }

  rec.task_loss = task_sum / static_cast<double>(count);
  rec.distill_loss = dist_sum / static_cast<double>(count);
  fill_metrics(rec, model, data);
  rec.seconds = elapsed_seconds(start);
  return rec;
}

RunReport run(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto start = Clock::now();

  SplitData data = make_clusters(cfg.dataset);
  AnyModel model = build_model(cfg);
  WeightOptimizer opt(cfg.optimizer);

  RunReport report;
  report.config = cfg;
  for (int e = 1; e <= cfg.schedule.total_epochs; ++e) {
    EpochRecord rec =
        e <= cfg.schedule.baseline_epochs
            ? train_epoch_baseline(model, data, opt, e, cfg.seed)
            : train_epoch_distill(model, data, opt, cfg.perturb, cfg.schedule, e, cfg.seed);
    report.epochs.push_back(rec);
  }
  if (std::holds_alternative<ClassifierModel>(model)) {
    report.final_test = evaluate_metrics(std::get<ClassifierModel>(model), data.test);
  }
  report.total_seconds = elapsed_seconds(start);

  std::filesystem::create_directories(out_dir);
  write_epochs_csv((std::filesystem::path(out_dir) / "epochs.csv").string(), report.epochs);
  write_report_json((std::filesystem::path(out_dir) / "report.json").string(), report);
  return report;
}

RunReport run_from_file(const std::string& config_path, const std::string& out_dir) {
  return run(load_run_config(config_path), out_dir);
}

namespace {
std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string epochs_csv_text(const std::vector<EpochRecord>& epochs) {
  std::string out = "epoch,alpha,task_loss,distill_loss,train_acc,test_acc,macro_f1,seconds\n";
  for (const EpochRecord& r : epochs) {
    out += std::to_string(r.epoch) + "," + fmt_g(r.alpha) + "," + fmt_g(r.task_loss) + "," +
           fmt_g(r.distill_loss) + "," + fmt_g(r.train_acc) + "," + fmt_g(r.test_acc) + "," +
           fmt_g(r.macro_f1) + "," + fmt_g(r.seconds) + "\n";
  }
  return out;
}

void write_epochs_csv(const std::string& path, const std::vector<EpochRecord>& epochs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << epochs_csv_text(epochs);
}

nlohmann::json report_to_json(const RunReport& report) {
  nlohmann::json j;
  j["version"] = report.version;
  j["config"] = config_to_json(report.config);
  j["epochs"] = nlohmann::json::array();
  for (const EpochRecord& r : report.epochs) {
    j["epochs"].push_back({{"epoch", r.epoch},
                           {"alpha", r.alpha},
                           {"task_loss", r.task_loss},
                           {"distill_loss", r.distill_loss},
                           {"train_acc", r.train_acc},
                           {"test_acc", r.test_acc},
                           {"macro_f1", r.macro_f1},
                           {"seconds", r.seconds}});
  }
  j["final"] = {{"test_accuracy", report.final_test.accuracy},
                {"test_macro_f1", report.final_test.macro_f1}};
  j["total_seconds"] = report.total_seconds;
  return j;
}

void write_report_json(const std::string& path, const RunReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << report_to_json(report).dump(2) << "\n";
}

}  // namespace icpd
