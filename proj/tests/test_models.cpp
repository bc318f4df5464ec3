#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "icpd/models.hpp"
#include "icpd/rng.hpp"

using namespace icpd;

namespace {

Tensor random_batch(Rng& rng, std::size_t rows, std::size_t cols, double span = 2.0) {
  Tensor t = Tensor::zeros({rows, cols});
  for (double& v : t.values) v = span * (2.0 * rng.uniform01() - 1.0);
  return t;
}

}  // namespace

TEST_CASE("init_params is deterministic with zero biases") {
  ClassifierModel a = make_toy_classifier(2, 3);
  ClassifierModel b = make_toy_classifier(2, 3);
  init_params(a, 42);
  init_params(b, 42);
  for (std::size_t l = 0; l < a.features.weights.size(); ++l) {
    CHECK(a.features.weights[l].values == b.features.weights[l].values);
    CHECK(a.features.biases[l].values == std::vector<double>(a.features.biases[l].numel(), 0.0));
  }
  CHECK(a.head_weight.values == b.head_weight.values);
  CHECK(a.head_bias.values == std::vector<double>(3, 0.0));

  ClassifierModel c = make_toy_classifier(2, 3);
  init_params(c, 43);
  CHECK(a.features.weights[0].values != c.features.weights[0].values);
}

TEST_CASE("init_params weight variance tracks 1/fan-in") {
  // one wide layer gives 10^4 draws
  ClassifierModel m;
  m.classes = 2;
  m.features.layers = {{"h1", 100, 100, Act::Tanh}};
  m.features.taps = {"h1"};
  init_params(m, 7);
  const double expected = 1.0 / 100.0;
  double mean = 0.0;
  for (double v : m.features.weights[0].values) mean += v;
  mean /= 1e4;
  double var = 0.0;
  for (double v : m.features.weights[0].values) var += (v - mean) * (v - mean);
  var /= 1e4 - 1;
  CHECK(std::abs(var - expected) / expected < 0.2);
}

TEST_CASE("forward_with_features returns taps in order with batch extent") {
  ClassifierModel m = make_toy_classifier(2, 3);
  init_params(m, 1);
  Rng rng(2);
  Tensor x = random_batch(rng, 5, 2);

  ComputationRecord rec;
  FeaturePass pass = forward_with_features(rec, m, x);
  REQUIRE(pass.features.size() == 3);
  CHECK(pass.features[0].shape == std::vector<std::size_t>{5, 32});
  CHECK(pass.features[1].shape == std::vector<std::size_t>{5, 32});
  CHECK(pass.features[2].shape == std::vector<std::size_t>{5, 16});
  CHECK(pass.output.shape == std::vector<std::size_t>{5, 3});

  // identical inputs and parameters give identical features
  ComputationRecord rec2;
  FeaturePass pass2 = forward_with_features(rec2, m, x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(pass.features[i].values == pass2.features[i].values);

  Tensor bad = random_batch(rng, 5, 3);
  ComputationRecord rec3;
  CHECK_THROWS_AS(forward_with_features(rec3, m, bad), std::invalid_argument);
}

TEST_CASE("classification_loss analytic values") {
  // uniform logits over C classes -> ln C
  {
    ComputationRecord rec;
    Tensor logits = rec.leaf(Tensor::zeros({2, 3}));
    Tensor loss = classification_loss(rec, logits, {0, 2});
    CHECK(loss.values[0] == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  // confident correct logits -> ~0
  {
    ComputationRecord rec;
    Tensor logits = rec.leaf(Tensor({1, 3}, {30.0, 0.0, 0.0}));
    Tensor loss = classification_loss(rec, logits, {0});
    CHECK(loss.values[0] == doctest::Approx(0.0).epsilon(1e-10));
  }
  // logits [2,0,0], label 0 -> 0.2395 (direct softmax cross-entropy)
  {
    ComputationRecord rec;
    Tensor logits = rec.leaf(Tensor({1, 3}, {2.0, 0.0, 0.0}));
    Tensor loss = classification_loss(rec, logits, {0});
    CHECK(loss.values[0] == doctest::Approx(0.2395).epsilon(1e-3));
  }
  // out-of-range label rejected
  {
    ComputationRecord rec;
    Tensor logits = rec.leaf(Tensor::zeros({1, 3}));
    CHECK_THROWS_AS(classification_loss(rec, logits, {3}), std::invalid_argument);
    CHECK_THROWS_AS(classification_loss(rec, logits, {0, 1}), std::invalid_argument);
  }
  // sum reduction is batch * mean for equal per-sample losses
  {
    ComputationRecord rec;
    Tensor logits = rec.leaf(Tensor::zeros({4, 3}));
    Tensor mean_loss = classification_loss(rec, logits, {0, 1, 2, 0}, Reduction::Mean);
    Tensor sum_loss = classification_loss(rec, logits, {0, 1, 2, 0}, Reduction::Sum);
    CHECK(sum_loss.values[0] == doctest::Approx(4.0 * mean_loss.values[0]).epsilon(1e-12));
  }
}

TEST_CASE("classification_loss is permutation-equivariant over the batch") {
  ClassifierModel m = make_toy_classifier(2, 3);
  init_params(m, 3);
  Rng rng(4);
  Tensor x = random_batch(rng, 8, 2);
  std::vector<int> y;
  for (int i = 0; i < 8; ++i) y.push_back(static_cast<int>(rng.bounded(3)));

  auto loss_of = [&m](const Tensor& pts, const std::vector<int>& labels) {
    ComputationRecord rec;
    FeaturePass pass = forward_with_features(rec, m, pts);
    return classification_loss(rec, pass.output, labels).values[0];
  };

  const double base = loss_of(x, y);
  std::vector<std::size_t> perm{5, 2, 7, 0, 3, 6, 1, 4};
  Tensor xp = Tensor::zeros({8, 2});
  std::vector<int> yp(8);
  for (std::size_t i = 0; i < 8; ++i) {
    xp.at(i, 0) = x.at(perm[i], 0);
    xp.at(i, 1) = x.at(perm[i], 1);
    yp[i] = y[perm[i]];
  }
  CHECK(std::abs(loss_of(xp, yp) - base) < 1e-12);
}

TEST_CASE("no batch coupling: per-sample gradient ignores the rest of the batch") {
  ClassifierModel m = make_toy_classifier(2, 3);
  init_params(m, 5);
  Rng rng(6);
  Tensor shared_point = random_batch(rng, 1, 2);

  auto grad_row0 = [&m, &shared_point](const Tensor& rest, const std::vector<int>& rest_y) {
    Tensor batch = Tensor::zeros({1 + rest.rows(), 2});
    batch.at(0, 0) = shared_point.at(0, 0);
    batch.at(0, 1) = shared_point.at(0, 1);
    std::vector<int> labels{1};
    for (std::size_t i = 0; i < rest.rows(); ++i) {
      batch.at(1 + i, 0) = rest.at(i, 0);
      batch.at(1 + i, 1) = rest.at(i, 1);
      labels.push_back(rest_y[i]);
    }
    ComputationRecord rec;
    FeaturePass pass = forward_with_features(rec, m, batch);
    Tensor loss = classification_loss(rec, pass.output, labels);
    Tensor g = rec.backward(loss).wrt(pass.input);
    return std::pair{g.at(0, 0), g.at(0, 1)};
  };

  Tensor rest_a = random_batch(rng, 3, 2);
  Tensor rest_b = random_batch(rng, 3, 2);
  auto ga = grad_row0(rest_a, {0, 1, 2});
  auto gb = grad_row0(rest_b, {2, 0, 1});
  CHECK(std::abs(ga.first - gb.first) < 1e-10);
  CHECK(std::abs(ga.second - gb.second) < 1e-10);
}

TEST_CASE("vae_loss analytic values") {
  // identical reconstruction, mu = 0, log_var = 0 -> exactly 0
  {
    ComputationRecord rec;
    Tensor recon = rec.leaf(Tensor({1, 2}, {0.3, -0.7}));
    Tensor target = rec.constant(Tensor({1, 2}, {0.3, -0.7}));
    Tensor mu = rec.leaf(Tensor({1, 2}, {0.0, 0.0}));
    Tensor lv = rec.leaf(Tensor({1, 2}, {0.0, 0.0}));
    Tensor loss = vae_loss(rec, recon, target, mu, lv);
    CHECK(loss.values[0] == 0.0);
  }
  // mu = [1], log_var = [0], recon = target -> KL = 0.5
  {
    ComputationRecord rec;
    Tensor recon = rec.leaf(Tensor({1, 1}, {0.0}));
    Tensor target = rec.constant(Tensor({1, 1}, {0.0}));
    Tensor mu = rec.leaf(Tensor({1, 1}, {1.0}));
    Tensor lv = rec.leaf(Tensor({1, 1}, {0.0}));
    Tensor loss = vae_loss(rec, recon, target, mu, lv);
    CHECK(loss.values[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  // random case vs an independent evaluation of the two terms
  {
    Rng rng(8);
    const std::size_t b = 3, d = 4, l = 2;
    Tensor recon0 = random_batch(rng, b, d, 1.0);
    Tensor target0 = random_batch(rng, b, d, 1.0);
    Tensor mu0 = random_batch(rng, b, l, 1.0);
    Tensor lv0 = random_batch(rng, b, l, 0.5);

    double mse = 0.0;
    for (std::size_t i = 0; i < b * d; ++i) {
      const double diff = recon0.values[i] - target0.values[i];
      mse += diff * diff;
    }
    mse /= static_cast<double>(b * d);
    double kl = 0.0;
    for (std::size_t i = 0; i < b * l; ++i) {
      kl += std::exp(lv0.values[i]) + mu0.values[i] * mu0.values[i] - 1.0 - lv0.values[i];
    }
    kl *= 0.5 / static_cast<double>(b);

    ComputationRecord rec;
    Tensor loss = vae_loss(rec, rec.leaf(recon0), rec.constant(target0), rec.leaf(mu0),
                           rec.leaf(lv0));
    CHECK(loss.values[0] == doctest::Approx(mse + kl).epsilon(1e-12));
  }
  // shape mismatch rejected
  {
    ComputationRecord rec;
    Tensor recon = rec.leaf(Tensor::zeros({1, 2}));
    Tensor target = rec.constant(Tensor::zeros({1, 3}));
    Tensor mu = rec.leaf(Tensor::zeros({1, 2}));
    CHECK_THROWS_AS(vae_loss(rec, recon, target, mu, mu), std::invalid_argument);
  }
}

TEST_CASE("reparameterize behavior") {
  Tensor mu({1, 3}, {1.0, -2.0, 0.5});
  Tensor lv_tiny = Tensor::full({1, 3}, -50.0);

  // variance -> 0 collapses to mu
  Tensor z = reparameterize(mu, lv_tiny, 9);
  for (std::size_t i = 0; i < 3; ++i) CHECK(z.values[i] == doctest::Approx(mu.values[i]).epsilon(1e-9));

  // same seed twice -> identical sample
  Tensor lv = Tensor::full({1, 3}, 0.3);
  Tensor z1 = reparameterize(mu, lv, 10);
  Tensor z2 = reparameterize(mu, lv, 10);
  CHECK(z1.values == z2.values);

  // Monte Carlo: sample mean over 1e5 draws within 3 standard errors of mu
  const std::size_t draws = 100000;
  Tensor wide_mu = Tensor::full({draws, 1}, 1.5);
  Tensor wide_lv = Tensor::zeros({draws, 1});
  Tensor samples = reparameterize(wide_mu, wide_lv, 1000);
  double acc = 0.0;
  for (double v : samples.values) acc += v;
  const double mean = acc / static_cast<double>(draws);
  const double se = 1.0 / std::sqrt(static_cast<double>(draws));
  CHECK(std::abs(mean - 1.5) < 3.0 * se);
}

TEST_CASE("vae forward shapes and tap placement") {
  VAEModel m;
  m.latent_width = 2;
  m.encoder.layers = {{"e1", 2, 8, Act::Tanh}, {"e2", 8, 8, Act::Tanh}, {"eout", 8, 4, Act::None}};
  m.encoder.taps = {"e1", "e2"};
  m.decoder.layers = {{"d1", 2, 8, Act::Tanh}, {"dout", 8, 2, Act::None}};
  init_params(m, 11);

  Rng rng(12);
  Tensor x = random_batch(rng, 4, 2);
  Tensor noise = standard_normal_like(Tensor::zeros({4, 2}), 13);
  ComputationRecord rec;
  FeaturePass pass = forward_with_features(rec, m, x, noise);
  CHECK(pass.mu.shape == std::vector<std::size_t>{4, 2});
  CHECK(pass.log_var.shape == std::vector<std::size_t>{4, 2});
  CHECK(pass.output.shape == std::vector<std::size_t>{4, 2});
  REQUIRE(pass.features.size() == 2);  // encoder hidden taps only
  CHECK(pass.features[0].shape == std::vector<std::size_t>{4, 8});
}

TEST_CASE("parameter serialization round-trips and rejects mismatches") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "icpd_test_params";
  fs::create_directories(dir);
  const std::string path = (dir / "clf.params").string();

  ClassifierModel m = make_toy_classifier(2, 3);
  init_params(m, 21);
  save_params(path, m);

  ClassifierModel loaded = make_toy_classifier(2, 3);
  init_params(loaded, 99);
  load_params(path, loaded);
  for (std::size_t l = 0; l < m.features.weights.size(); ++l) {
    CHECK(loaded.features.weights[l].values == m.features.weights[l].values);
  }
  CHECK(loaded.head_weight.values == m.head_weight.values);

  // wrong architecture is rejected by the manifest check
  ClassifierModel other;
  other.classes = 3;
  other.features.layers = {{"h1", 2, 8, Act::Tanh}};
  other.features.taps = {"h1"};
  init_params(other, 1);
  CHECK_THROWS(load_params(path, other));

  fs::remove_all(dir);
}

TEST_CASE("model validation rejects inconsistent structures") {
  FeatureNet net;
  net.layers = {{"a", 2, 4, Act::Tanh}, {"b", 5, 3, Act::Tanh}};  // width break
  Rng rng(1);
  init_params(net, rng);
  CHECK_THROWS_AS(net.validate(), std::invalid_argument);

  FeatureNet dup;
  dup.layers = {{"a", 2, 4, Act::Tanh}, {"a", 4, 3, Act::Tanh}};
  init_params(dup, rng);
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

  FeatureNet badtap;
  badtap.layers = {{"a", 2, 4, Act::Tanh}};
  badtap.taps = {"zz"};
  init_params(badtap, rng);
  CHECK_THROWS_AS(badtap.validate(), std::invalid_argument);
}
