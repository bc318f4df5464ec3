#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "icpd/dataset.hpp"
#include "icpd/metrics.hpp"
#include "icpd/models.hpp"
#include "icpd/perturb.hpp"
#include "icpd/train.hpp"

using namespace icpd;

namespace {

// J = 0.5 * ||x - c||^2, grad = x - c
GradOracle quadratic_oracle(const Tensor& c) {
  return [c](const Tensor& x) {
    LossGrad lg;
    lg.grad = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double d = x.values[i] - c.values[i];
      lg.grad.values[i] = d;
      lg.loss += 0.5 * d * d;
    }
    return lg;
  };
}

GradOracle fixed_gradient_oracle(const Tensor& g, double loss = 1.0) {
  return [g, loss](const Tensor&) { return LossGrad{loss, g.detached()}; };
}

// small trained classifier on well-separated clusters, shared across cases
struct TrainedToy {
  ClassifierModel model;
  SplitData data;
};

const TrainedToy& trained_toy() {
  static TrainedToy toy = [] {
    DatasetSpec spec;
    spec.classes = 3;
    spec.points_per_class = 60;
    spec.std_dev = 0.35;
    spec.train_split = 0.8;
    spec.seed = 7;
    TrainedToy t;
    t.data = make_clusters(spec);
    ClassifierModel m = make_toy_classifier(2, 3);
    init_params(m, 7);
    AnyModel model = m;
    OptimizerConfig oc;
    oc.learning_rate = 0.1;
    WeightOptimizer opt(oc);
    for (int e = 1; e <= 60; ++e) train_epoch_baseline(model, t.data, opt, e, 7);
    t.model = std::get<ClassifierModel>(model);
    return t;
  }();
  return toy;
}

GradOracle single_point_ce_oracle(const ClassifierModel& model, int label) {
  return [&model, label](const Tensor& x) {
    ComputationRecord rec;
    FeaturePass pass = forward_with_features(rec, model, x);
    Tensor loss = classification_loss(rec, pass.output, {label});
    GradientMap grads = rec.backward(loss);
    return LossGrad{loss.values[0], grads.wrt(pass.input).detached()};
  };
}

GradOracle batch_ce_oracle(const ClassifierModel& model, const std::vector<int>& labels) {
  return [&model, labels](const Tensor& x) {
    ComputationRecord rec;
    FeaturePass pass = forward_with_features(rec, model, x);
    Tensor loss = classification_loss(rec, pass.output, labels);
    GradientMap grads = rec.backward(loss);
    return LossGrad{loss.values[0], grads.wrt(pass.input).detached()};
  };
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape &&
         std::memcmp(a.values.data(), b.values.data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("fgsm_step applies the sign of the gradient") {
  Tensor x({2}, {0.5, -0.25});
  Tensor g({2}, {0.2, -0.1});
  Tensor out = fgsm_step(x, fixed_gradient_oracle(g), 0.1);
  CHECK(out.values[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(out.values[1] == doctest::Approx(-0.35).epsilon(1e-15));
  CHECK(x.values[0] == 0.5);  // input unmodified

  Tensor zero_g = Tensor::zeros({2});
  Tensor same = fgsm_step(x, fixed_gradient_oracle(zero_g), 0.1);
  CHECK(same.values == x.values);

  Tensor bad({3}, {1, 2, 3});
  CHECK_THROWS_AS(fgsm_step(x, fixed_gradient_oracle(bad), 0.1), std::invalid_argument);
  CHECK_THROWS_AS(fgsm_step(x, fixed_gradient_oracle(g), 0.0), std::invalid_argument);
}

TEST_CASE("ifgsm_refine edge iterations") {
  Tensor x({2}, {1.0, 2.0});
  Tensor c({2}, {0.0, 0.0});
  GradOracle oracle = quadratic_oracle(c);

  RefineResult none = ifgsm_refine(x, oracle, 0.1, 0);
  CHECK(none.refined.values == x.values);
  REQUIRE(none.losses.size() == 1);
  CHECK(none.losses[0] == doctest::Approx(0.5 * 5.0));

  RefineResult one = ifgsm_refine(x, oracle, 0.1, 1);
  Tensor single = fgsm_step(x, oracle, 0.1);
  CHECK(one.refined.values == single.values);
  CHECK(one.losses.size() == 2);
}

TEST_CASE("ifgsm is loss-ascending on the trained toy classifier") {
  const TrainedToy& toy = trained_toy();
  int ascents = 0;
  const std::size_t n = std::min<std::size_t>(100, toy.data.test.size());
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x({1, 2}, {toy.data.test.points.at(i, 0), toy.data.test.points.at(i, 1)});
    GradOracle oracle = single_point_ce_oracle(toy.model, toy.data.test.labels[i]);
    RefineResult res = ifgsm_refine(x, oracle, 1e-4, 10);
    if (res.losses.back() >= res.losses.front() - 1e-9) ++ascents;
  }
  CHECK(ascents >= static_cast<int>(n) - 1);  // at least 99/100
}

TEST_CASE("icp_step_sgd follows the full gradient") {
  Tensor x({1}, {1.0});
  Tensor g({1}, {2.0});
  Tensor out = icp_step_sgd(x, fixed_gradient_oracle(g), 0.1);
  CHECK(out.values[0] == doctest::Approx(0.8).epsilon(1e-15));

  Tensor fixed = icp_step_sgd(x, fixed_gradient_oracle(Tensor::zeros({1})), 0.1);
  CHECK(fixed.values == x.values);
}

TEST_CASE("sgd refinement matches the closed-form contraction") {
  // x_T = c + (1-eps)^T (x0 - c) on J = 0.5||x-c||^2
  Tensor x0({1}, {0.0});
  Tensor c({1}, {3.0});
  PerturbConfig cfg;
  cfg.variant = Variant::SgdIcp;
  cfg.epsilon = 0.1;
  cfg.iterations = 5;
  RefineResult res = icp_refine(x0, quadratic_oracle(c), cfg);
  CHECK(res.refined.values[0] == doctest::Approx(1.22853).epsilon(1e-5));
  const double closed = 3.0 + std::pow(0.9, 5) * (0.0 - 3.0);
  CHECK(std::abs(res.refined.values[0] - closed) < 1e-12);
}

TEST_CASE("adam first step collapses to the gradient sign") {
  Rng rng(31);
  Tensor x = Tensor::zeros({6});
  Tensor g = Tensor::zeros({6});
  for (double& v : g.values) v = 3.0 * (2.0 * rng.uniform01() - 1.0);

  PerturbConfig cfg;
  cfg.variant = Variant::AdamIcp;
  cfg.delta = 0.0;
  PerturbState state = PerturbState::zeros_like(x);
  Tensor out = icp_step_adam(x, fixed_gradient_oracle(g), cfg, state);
  CHECK(state.t == 1);
  for (std::size_t i = 0; i < 6; ++i) {
    const double sgn = g.values[i] > 0.0 ? 1.0 : (g.values[i] < 0.0 ? -1.0 : 0.0);
    CHECK(std::abs(out.values[i] - (x.values[i] - cfg.epsilon * sgn)) < 1e-12);
  }
}

TEST_CASE("adam with zero gradients is a fixed point with zero moments") {
  Tensor x({3}, {0.5, -0.5, 1.0});
  PerturbConfig cfg;
  cfg.variant = Variant::AdamIcp;
  PerturbState state = PerturbState::zeros_like(x);
  Tensor cur = x;
  for (int t = 0; t < 5; ++t) {
    cur = icp_step_adam(cur, fixed_gradient_oracle(Tensor::zeros({3}), 0.0), cfg, state);
  }
  CHECK(cur.values == x.values);
  CHECK(state.m.values == std::vector<double>(3, 0.0));
  CHECK(state.v.values == std::vector<double>(3, 0.0));
  CHECK(state.t == 5);
}

TEST_CASE("adam converges toward the quadratic minimizer") {
  Tensor x0({2}, {4.0, -3.0});
  Tensor c({2}, {1.0, 1.0});
  PerturbConfig cfg;
  cfg.variant = Variant::AdamIcp;
  cfg.epsilon = 0.05;
  cfg.iterations = 50;
  RefineResult res = icp_refine(x0, quadratic_oracle(c), cfg);
  auto dist = [&c](const Tensor& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      s += (p.values[i] - c.values[i]) * (p.values[i] - c.values[i]);
    }
    return std::sqrt(s);
  };
  CHECK(dist(res.refined) < dist(x0));
  CHECK(res.losses.back() < res.losses.front());
}

TEST_CASE("ademamix first step carries the slow-moment factor") {
  Rng rng(32);
  Tensor x = Tensor::zeros({6});
  Tensor g = Tensor::zeros({6});
  for (double& v : g.values) v = 2.0 * (2.0 * rng.uniform01() - 1.0);

  PerturbConfig cfg;
  cfg.variant = Variant::AdemamixIcp;
  cfg.delta = 0.0;
  PerturbState state = PerturbState::zeros_like(x);
  Tensor out = icp_step_ademamix(x, fixed_gradient_oracle(g), cfg, state);

  const double factor = 1.0 + cfg.alpha_mix * (1.0 - cfg.beta3);
  CHECK(factor == doctest::Approx(1.0005).epsilon(1e-12));  // defaults
  for (std::size_t i = 0; i < 6; ++i) {
    const double sgn = g.values[i] > 0.0 ? 1.0 : (g.values[i] < 0.0 ? -1.0 : 0.0);
    CHECK(std::abs(out.values[i] - (x.values[i] - cfg.epsilon * sgn * factor)) < 1e-12);
  }
}

TEST_CASE("ademamix with alpha_mix = 0 tracks adam bit-exactly") {
  Tensor c({3}, {0.2, -1.0, 2.0});
  GradOracle oracle = quadratic_oracle(c);

  PerturbConfig adam_cfg;
  adam_cfg.variant = Variant::AdamIcp;
  PerturbConfig mix_cfg = adam_cfg;
  mix_cfg.variant = Variant::AdemamixIcp;
  mix_cfg.alpha_mix = 0.0;

  Tensor xa({3}, {3.0, 3.0, 3.0});
  Tensor xm = xa.detached();
  PerturbState sa = PerturbState::zeros_like(xa);
  PerturbState sm = PerturbState::zeros_like(xm);
  for (int t = 0; t < 50; ++t) {
    xa = icp_step_adam(xa, oracle, adam_cfg, sa);
    xm = icp_step_ademamix(xm, oracle, mix_cfg, sm);
    REQUIRE(bitwise_equal(xa, xm));
  }
}

TEST_CASE("first constructive step descends against the gradient") {
  Rng rng(33);
  for (int trial = 0; trial < 25; ++trial) {
    Tensor x = Tensor::zeros({4});
    Tensor g = Tensor::zeros({4});
    for (double& v : x.values) v = 2.0 * rng.uniform01() - 1.0;
    for (double& v : g.values) v = 3.0 * (2.0 * rng.uniform01() - 1.0);
    GradOracle oracle = fixed_gradient_oracle(g);

    auto inner = [&g](const Tensor& before, const Tensor& after) {
      double s = 0.0;
      for (std::size_t i = 0; i < g.numel(); ++i) {
        s += (after.values[i] - before.values[i]) * g.values[i];
      }
      return s;
    };

    PerturbConfig cfg;
    CHECK(inner(x, icp_step_sgd(x, oracle, cfg.epsilon)) < 0.0);

    cfg.variant = Variant::AdamIcp;
    PerturbState sa = PerturbState::zeros_like(x);
    CHECK(inner(x, icp_step_adam(x, oracle, cfg, sa)) < 0.0);

    cfg.variant = Variant::AdemamixIcp;
    PerturbState sm = PerturbState::zeros_like(x);
    CHECK(inner(x, icp_step_ademamix(x, oracle, cfg, sm)) < 0.0);

    // fgsm ascends: <dx, g> = eps * ||g||_1
    Tensor adv = fgsm_step(x, oracle, cfg.epsilon);
    double l1 = 0.0;
    for (double v : g.values) l1 += std::abs(v);
    CHECK(inner(x, adv) == doctest::Approx(cfg.epsilon * l1).epsilon(1e-12));
  }
}

TEST_CASE("icp_refine contract") {
  Tensor x({2}, {1.0, -1.0});
  Tensor c = Tensor::zeros({2});
  GradOracle oracle = quadratic_oracle(c);

  PerturbConfig cfg;
  cfg.variant = Variant::SgdIcp;
  cfg.iterations = 0;
  RefineResult res = icp_refine(x, oracle, cfg);
  CHECK(res.refined.values == x.values);
  CHECK(res.refined.node == -1);
  REQUIRE(res.losses.size() == 1);

  cfg.variant = Variant::Fgsm;
  CHECK_THROWS_AS(icp_refine(x, oracle, cfg), std::invalid_argument);

  // sgd on the quadratic matches the closed form at every step
  cfg.variant = Variant::SgdIcp;
  cfg.epsilon = 0.25;
  for (int T : {1, 3, 10}) {
    cfg.iterations = T;
    RefineResult r = icp_refine(x, oracle, cfg);
    for (std::size_t i = 0; i < 2; ++i) {
      const double closed = std::pow(1.0 - cfg.epsilon, T) * x.values[i];
      CHECK(std::abs(r.refined.values[i] - closed) < 1e-12);
    }
  }

  // clamp keeps iterates inside the configured box
  cfg.iterations = 5;
  cfg.epsilon = 2.0;  // overshooting step
  cfg.clamp = std::make_pair(-0.5, 0.5);
  RefineResult clamped = icp_refine(x, oracle, cfg);
  for (double v : clamped.refined.values) {
    CHECK(v >= -0.5);
    CHECK(v <= 0.5);
  }
}

TEST_CASE("refinement trajectory is non-increasing on the trained classifier") {
  const TrainedToy& toy = trained_toy();
  PerturbConfig cfg;
  cfg.variant = Variant::SgdIcp;
  cfg.epsilon = 1e-3;
  cfg.iterations = 5;
  const std::size_t n = std::min<std::size_t>(36, toy.data.test.size());
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x({1, 2}, {toy.data.test.points.at(i, 0), toy.data.test.points.at(i, 1)});
    GradOracle oracle = single_point_ce_oracle(toy.model, toy.data.test.labels[i]);
    RefineResult res = icp_refine(x, oracle, cfg);
    for (std::size_t t = 0; t + 1 < res.losses.size(); ++t) {
      CHECK(res.losses[t + 1] <= res.losses[t] + 1e-9);
    }
  }
}

TEST_CASE("state isolation: refining A does not leak into B") {
  const TrainedToy& toy = trained_toy();
  PerturbConfig cfg;
  cfg.variant = Variant::AdamIcp;
  cfg.iterations = 5;

  Tensor a({1, 2}, {toy.data.test.points.at(0, 0), toy.data.test.points.at(0, 1)});
  Tensor b({1, 2}, {toy.data.test.points.at(1, 0), toy.data.test.points.at(1, 1)});
  GradOracle oa = single_point_ce_oracle(toy.model, toy.data.test.labels[0]);
  GradOracle ob = single_point_ce_oracle(toy.model, toy.data.test.labels[1]);

  icp_refine(a, oa, cfg);  // refine A first
  RefineResult b_after_a = icp_refine(b, ob, cfg);
  RefineResult b_alone = icp_refine(b, ob, cfg);
  CHECK(bitwise_equal(b_after_a.refined, b_alone.refined));
}

TEST_CASE("per-sample independence of sgd refinement under mean reduction") {
  const TrainedToy& toy = trained_toy();
  const std::size_t batch = 4;
  Tensor joint = Tensor::zeros({batch, 2});
  std::vector<int> labels;
  for (std::size_t i = 0; i < batch; ++i) {
    joint.at(i, 0) = toy.data.test.points.at(i, 0);
    joint.at(i, 1) = toy.data.test.points.at(i, 1);
    labels.push_back(toy.data.test.labels[i]);
  }

  PerturbConfig cfg;
  cfg.variant = Variant::SgdIcp;
  cfg.epsilon = 0.04;
  cfg.iterations = 3;
  RefineResult joint_res = icp_refine(joint, batch_ce_oracle(toy.model, labels), cfg);

  PerturbConfig solo_cfg = cfg;
  solo_cfg.epsilon = cfg.epsilon / static_cast<double>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    Tensor x({1, 2}, {joint.at(i, 0), joint.at(i, 1)});
    RefineResult solo = icp_refine(x, single_point_ce_oracle(toy.model, labels[i]), solo_cfg);
    CHECK(std::abs(solo.refined.at(0, 0) - joint_res.refined.at(i, 0)) < 1e-10);
    CHECK(std::abs(solo.refined.at(0, 1) - joint_res.refined.at(i, 1)) < 1e-10);
  }
}

TEST_CASE("refinement is deterministic") {
  const TrainedToy& toy = trained_toy();
  Tensor x({1, 2}, {toy.data.test.points.at(2, 0), toy.data.test.points.at(2, 1)});
  GradOracle oracle = single_point_ce_oracle(toy.model, toy.data.test.labels[2]);
  for (Variant v : {Variant::SgdIcp, Variant::AdamIcp, Variant::AdemamixIcp}) {
    PerturbConfig cfg;
    cfg.variant = v;
    cfg.iterations = 5;
    RefineResult r1 = icp_refine(x, oracle, cfg);
    RefineResult r2 = icp_refine(x, oracle, cfg);
    CHECK(bitwise_equal(r1.refined, r2.refined));
    CHECK(r1.losses == r2.losses);
  }
}

TEST_CASE("config validation enforces stated ranges") {
  PerturbConfig cfg;
  cfg.epsilon = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = PerturbConfig{};
  cfg.beta2 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = PerturbConfig{};
  cfg.iterations = -2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = PerturbConfig{};
  cfg.clamp = std::make_pair(1.0, -1.0);
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
