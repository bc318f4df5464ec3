#include "icpd/demo.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "icpd/metrics.hpp"
#include "icpd/train.hpp"

namespace icpd {

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += pred[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

// Sum-reduced cross-entropy keeps per-point input gradients unscaled, so one
// batched refinement perturbs every point as if it were refined alone.
GradOracle sum_loss_oracle(const ClassifierModel& model, const std::vector<int>& labels) {
  return [&model, labels](const Tensor& x) {
    ComputationRecord rec;
    FeaturePass pass = forward_with_features(rec, model, x);
    Tensor loss = classification_loss(rec, pass.output, labels, Reduction::Sum);
    GradientMap grads = rec.backward(loss);
    return LossGrad{loss.values[0], grads.wrt(pass.input).detached()};
  };
}

}  // namespace

DemoSummary demo_fig1(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  if (cfg.model.type != "classifier" || cfg.dataset.kind != DatasetKind::GaussianClusters) {
    throw config_error("demo-fig1 requires a classifier on gaussian-clusters data");
  }

  SplitData data = make_clusters(cfg.dataset);
  AnyModel model = build_model(cfg);
  WeightOptimizer opt(cfg.optimizer);
  for (int e = 1; e <= cfg.schedule.total_epochs; ++e) {
    train_epoch_baseline(model, data, opt, e, cfg.seed);
  }
  const ClassifierModel& clf = std::get<ClassifierModel>(model);

  const double train_acc = evaluate_metrics(clf, data.train).accuracy;
  if (train_acc < cfg.demo.min_train_accuracy) {
    char msg[128];
    std::snprintf(msg, sizeof msg,
                  "demo-fig1: classifier reached train accuracy %.4f, below the required %.4f",
                  train_acc, cfg.demo.min_train_accuracy);
    throw numeric_error(msg);
  }

  // all points, train then test
  const std::size_t n = data.train.size() + data.test.size();
  Tensor points = Tensor::zeros({n, 2});
  std::vector<int> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    points.at(i, 0) = data.train.points.at(i, 0);
    points.at(i, 1) = data.train.points.at(i, 1);
    labels.push_back(data.train.labels[i]);
  }
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    points.at(data.train.size() + i, 0) = data.test.points.at(i, 0);
    points.at(data.train.size() + i, 1) = data.test.points.at(i, 1);
    labels.push_back(data.test.labels[i]);
  }

  GradOracle oracle = sum_loss_oracle(clf, labels);

  RefineResult adversarial =
      ifgsm_refine(points, oracle, cfg.perturb.epsilon, cfg.demo.ifgsm_iters);

  // the base constructive rule (full-gradient descent), same step size
  PerturbConfig icp_cfg = cfg.perturb;
  icp_cfg.variant = Variant::SgdIcp;
  icp_cfg.iterations = cfg.demo.icp_iters;
  RefineResult constructive = icp_refine(points, oracle, icp_cfg);

  std::vector<int> pred0 = predict(clf, points);
  std::vector<int> pred_adv = predict(clf, adversarial.refined);
  std::vector<int> pred_icp = predict(clf, constructive.refined);

  DemoSummary summary;
  summary.train_accuracy = train_acc;
  summary.original_accuracy = accuracy(pred0, labels);
  summary.ifgsm_accuracy = accuracy(pred_adv, labels);
  summary.icp_accuracy = accuracy(pred_icp, labels);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  {
    std::ofstream out(dir / "points.csv");
    if (!out) throw std::runtime_error("cannot write points.csv");
    out << "x0,y0,x_ifgsm,y_ifgsm,x_icp,y_icp,label,pred0,pred_ifgsm,pred_icp\n";
    for (std::size_t i = 0; i < n; ++i) {
      out << fmt_g(points.at(i, 0)) << "," << fmt_g(points.at(i, 1)) << ","
          << fmt_g(adversarial.refined.at(i, 0)) << "," << fmt_g(adversarial.refined.at(i, 1))
          << "," << fmt_g(constructive.refined.at(i, 0)) << ","
          << fmt_g(constructive.refined.at(i, 1)) << "," << labels[i] << "," << pred0[i] << ","
          << pred_adv[i] << "," << pred_icp[i] << "\n";
    }
  }

  {
    // lattice over the data bounding box, padded per side
    double xlo = points.at(0, 0), xhi = xlo, ylo = points.at(0, 1), yhi = ylo;
    for (std::size_t i = 0; i < n; ++i) {
      xlo = std::min(xlo, points.at(i, 0));
      xhi = std::max(xhi, points.at(i, 0));
      ylo = std::min(ylo, points.at(i, 1));
      yhi = std::max(yhi, points.at(i, 1));
    }
    const double xpad = (xhi - xlo) * cfg.demo.pad_fraction;
    const double ypad = (yhi - ylo) * cfg.demo.pad_fraction;
    xlo -= xpad;
    xhi += xpad;
    ylo -= ypad;
    yhi += ypad;

    const std::size_t res = cfg.demo.grid_resolution;
    Tensor grid = Tensor::zeros({res * res, 2});
    for (std::size_t iy = 0; iy < res; ++iy) {
      const double y = ylo + (yhi - ylo) * static_cast<double>(iy) / static_cast<double>(res - 1);
      for (std::size_t ix = 0; ix < res; ++ix) {
        const double x =
            xlo + (xhi - xlo) * static_cast<double>(ix) / static_cast<double>(res - 1);
        grid.at(iy * res + ix, 0) = x;
        grid.at(iy * res + ix, 1) = y;
      }
    }
    std::vector<int> grid_pred = predict(clf, grid);

    std::ofstream out(dir / "grid.csv");
    if (!out) throw std::runtime_error("cannot write grid.csv");
    out << "x,y,pred_class\n";
    for (std::size_t i = 0; i < res * res; ++i) {
      out << fmt_g(grid.at(i, 0)) << "," << fmt_g(grid.at(i, 1)) << "," << grid_pred[i] << "\n";
    }
  }

  {
    nlohmann::json j;
    j["train_accuracy"] = summary.train_accuracy;
    j["original_accuracy"] = summary.original_accuracy;
    j["ifgsm_accuracy"] = summary.ifgsm_accuracy;
    j["icp_accuracy"] = summary.icp_accuracy;
    j["epsilon"] = cfg.perturb.epsilon;
    j["ifgsm_iters"] = cfg.demo.ifgsm_iters;
    j["icp_iters"] = cfg.demo.icp_iters;
    std::ofstream out(dir / "summary.json");
    if (!out) throw std::runtime_error("cannot write summary.json");
    out << j.dump(2) << "\n";
  }

  return summary;
}

}  // namespace icpd
