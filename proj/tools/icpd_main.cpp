// icpd command-line interface: training runs, the decision-boundary demo,
// gradient checking, and version reporting.
#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "icpd/demo.hpp"
#include "icpd/gradcheck.hpp"
#include "icpd/train.hpp"

namespace {

// 0 success, 1 config error, 2 numeric failure
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  icpd::RunReport report = icpd::run_from_file(config_path, out_dir);
  const icpd::EpochRecord& last = report.epochs.back();
  std::printf("completed %zu epochs in %.2fs\n", report.epochs.size(), report.total_seconds);
  if (report.config.model.type == "classifier") {
    std::printf("final test accuracy %.4f, macro-F1 %.4f\n", report.final_test.accuracy,
                report.final_test.macro_f1);
  } else {
    std::printf("final epoch task loss %.6f\n", last.task_loss);
  }
  std::printf("wrote %s/epochs.csv and %s/report.json\n", out_dir.c_str(), out_dir.c_str());
  return kExitOk;
}

int cmd_demo(const std::string& config_path, const std::string& out_dir) {
  icpd::RunConfig cfg = icpd::load_run_config(config_path);
  icpd::DemoSummary s = icpd::demo_fig1(cfg, out_dir);
  std::printf("train accuracy    %.4f\n", s.train_accuracy);
  std::printf("original accuracy %.4f\n", s.original_accuracy);
  std::printf("i-FGSM accuracy   %.4f\n", s.ifgsm_accuracy);
  std::printf("ICP accuracy      %.4f\n", s.icp_accuracy);
  std::printf("wrote grid.csv, points.csv, summary.json under %s\n", out_dir.c_str());
  return kExitOk;
}

int cmd_gradcheck(int points, std::uint64_t seed) {
  auto results = icpd::run_gradient_checks(points, seed);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%-26s max rel err %10.3e over %d points  %s\n", r.name.c_str(), r.max_rel_err,
                r.points, r.pass ? "ok" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  return all_pass ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iterative constructive perturbation + self-distillation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";

  CLI::App* run_cmd = app.add_subcommand("run", "execute a training run from a config file");
  run_cmd->add_option("--config", config_path, "path to the JSON run config")->required();
  run_cmd->add_option("--out", out_dir, "output directory (default: current)");

  std::string demo_config;
  std::string demo_out = ".";
  CLI::App* demo_cmd =
      app.add_subcommand("demo-fig1", "train on clusters and export perturbation artifacts");
  demo_cmd->add_option("--config", demo_config, "path to the JSON run config")->required();
  demo_cmd->add_option("--out", demo_out, "output directory")->required();

  int gc_points = 100;
  std::uint64_t gc_seed = 20240601;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference checks of all gradients");
  gc_cmd->add_option("--points", gc_points, "random points per case (default 100)");
  gc_cmd->add_option("--seed", gc_seed, "seed for the random probes");

  CLI::App* version_cmd = app.add_subcommand("version", "print the version string");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(config_path, out_dir);
    if (demo_cmd->parsed()) return cmd_demo(demo_config, demo_out);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc_points, gc_seed);
    if (version_cmd->parsed()) {
      std::printf("%s\n", icpd::kVersionString);
      return kExitOk;
    }
  } catch (const icpd::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const icpd::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
