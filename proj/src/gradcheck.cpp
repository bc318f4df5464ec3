#include "icpd/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "icpd/models.hpp"
#include "icpd/rng.hpp"
#include "icpd/tensor.hpp"

namespace icpd {

namespace {

constexpr double kStep = 1e-5;

double rel_err(double a, double fd) {
  const double scale = std::max({1.0, std::abs(a), std::abs(fd)});
  return std::abs(a - fd) / scale;
}

double max_rel_err(const Tensor& analytic, const Tensor& fd) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.numel(); ++i) {
    worst = std::max(worst, rel_err(analytic.values[i], fd.values[i]));
  }
  return worst;
}

using Expr = std::function<Tensor(ComputationRecord&, const Tensor&)>;

// max per-coordinate relative error between reverse-mode and central
// differences for a scalar-valued expression of x
double check_expr(const Expr& expr, const Tensor& x) {
  ComputationRecord rec;
  Tensor leaf = rec.leaf(x);
  Tensor loss = expr(rec, leaf);
  Tensor analytic = rec.backward(loss).wrt(leaf);

  Tensor fd = finite_difference_gradient(
      [&expr](const Tensor& probe) {
        ComputationRecord r;
        return expr(r, r.leaf(probe)).values[0];
      },
      x, kStep);
  return max_rel_err(analytic, fd);
}

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values) v = lo + (hi - lo) * rng.uniform01();
  return t;
}

// random values bounded away from zero (for relu's kink and log's domain)
Tensor random_signed_away_from_zero(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values) {
    const double mag = 0.2 + 1.3 * rng.uniform01();
    v = rng.uniform01() < 0.5 ? -mag : mag;
  }
  return t;
}

ClassifierModel small_classifier(std::uint64_t seed) {
  ClassifierModel m;
  m.classes = 3;
  m.features.layers = {{"h1", 2, 8, Act::Tanh}, {"h2", 8, 4, Act::Tanh}};
  m.features.taps = {"h1", "h2"};
  init_params(m, seed);
  return m;
}

VAEModel small_vae(std::uint64_t seed) {
  VAEModel m;
  m.latent_width = 2;
  m.encoder.layers = {{"e1", 2, 6, Act::Tanh}, {"eout", 6, 4, Act::None}};
  m.encoder.taps = {"e1"};
  m.decoder.layers = {{"d1", 2, 6, Act::Tanh}, {"dout", 6, 2, Act::None}};
  init_params(m, seed);
  return m;
}

double classifier_loss_value(const ClassifierModel& model, const Tensor& input,
                             const std::vector<int>& labels) {
  ComputationRecord rec;
  FeaturePass pass = forward_with_features(rec, model, input);
  return classification_loss(rec, pass.output, labels).values[0];
}

double vae_loss_value(const VAEModel& model, const Tensor& input, const Tensor& target,
                      const Tensor& noise) {
  ComputationRecord rec;
  FeaturePass pass = forward_with_features(rec, model, input, noise);
  return vae_loss(rec, pass.output, rec.constant(target), pass.mu, pass.log_var).values[0];
}

// checks d(loss)/d(input) and d(loss)/d(every parameter) for one model
// configuration; returns the worst relative error seen
double check_classifier_loss(std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 17));
  ClassifierModel model = small_classifier(Rng::derive(seed, 18));
  const std::size_t batch = 4;
  Tensor input = random_tensor(rng, {batch, 2}, -2.0, 2.0);
  std::vector<int> labels;
  for (std::size_t i = 0; i < batch; ++i) labels.push_back(static_cast<int>(rng.bounded(3)));

  ComputationRecord rec;
  FeaturePass pass = forward_with_features(rec, model, input);
  Tensor loss = classification_loss(rec, pass.output, labels);
  GradientMap gmap = rec.backward(loss);

  double worst = max_rel_err(
      gmap.wrt(pass.input),
      finite_difference_gradient(
          [&](const Tensor& probe) { return classifier_loss_value(model, probe, labels); },
          input, kStep));

  std::vector<Tensor*> params = parameters(model);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor original = params[p]->detached();
    Tensor fd = finite_difference_gradient(
        [&](const Tensor& probe) {
          ClassifierModel poked = model;
          *parameters(poked)[p] = probe;
          return classifier_loss_value(poked, input, labels);
        },
        original, kStep);
    worst = std::max(worst, max_rel_err(gmap.at_node(pass.param_ids[p]), fd));
  }
  return worst;
}

double check_vae_loss(std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 19));
  VAEModel model = small_vae(Rng::derive(seed, 20));
  const std::size_t batch = 3;
  Tensor input = random_tensor(rng, {batch, 2}, -1.5, 1.5);
  Tensor target = input.detached();
  Tensor noise = standard_normal_like(Tensor::zeros({batch, 2}), Rng::derive(seed, 21));

  ComputationRecord rec;
  FeaturePass pass = forward_with_features(rec, model, input, noise);
  Tensor loss = vae_loss(rec, pass.output, rec.constant(target), pass.mu, pass.log_var);
  GradientMap gmap = rec.backward(loss);

  // target stays fixed while the input moves, matching the refinement oracle
  double worst = max_rel_err(
      gmap.wrt(pass.input),
      finite_difference_gradient(
          [&](const Tensor& probe) { return vae_loss_value(model, probe, target, noise); },
          input, kStep));

  std::vector<Tensor*> params = parameters(model);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor original = params[p]->detached();
    Tensor fd = finite_difference_gradient(
        [&](const Tensor& probe) {
          VAEModel poked = model;
          *parameters(poked)[p] = probe;
          return vae_loss_value(poked, input, target, noise);
        },
        original, kStep);
    worst = std::max(worst, max_rel_err(gmap.at_node(pass.param_ids[p]), fd));
  }
  return worst;
}

}  // namespace

std::vector<GradCheckCase> run_gradient_checks(int points_per_case, std::uint64_t seed,
                                               double tolerance) {
  std::vector<GradCheckCase> results;

  struct PrimitiveCase {
    const char* name;
    std::function<double(Rng&, std::uint64_t)> probe;  // returns max rel err at one point
  };

  std::vector<PrimitiveCase> cases;

  cases.push_back({"matmul-lhs", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {3, 4}, -1.0, 1.0);
    Tensor b = random_tensor(rng, {4, 2}, -1.0, 1.0);
    return check_expr(
        [b](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.matmul(leaf, rec.constant(b))));
        },
        x);
  }});
  cases.push_back({"matmul-rhs", [](Rng& rng, std::uint64_t) {
    Tensor a = random_tensor(rng, {3, 4}, -1.0, 1.0);
    Tensor x = random_tensor(rng, {4, 2}, -1.0, 1.0);
    return check_expr(
        [a](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.matmul(rec.constant(a), leaf)));
        },
        x);
  }});
  cases.push_back({"add", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {2, 5}, -1.0, 1.0);
    Tensor c = random_tensor(rng, {2, 5}, -1.0, 1.0);
    return check_expr(
        [c](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.add(leaf, rec.constant(c))));
        },
        x);
  }});
  cases.push_back({"subtract", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {2, 5}, -1.0, 1.0);
    Tensor c = random_tensor(rng, {2, 5}, -1.0, 1.0);
    return check_expr(
        [c](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.subtract(rec.constant(c), leaf)));
        },
        x);
  }});
  cases.push_back({"elementwise-multiply", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {2, 5}, -1.0, 1.0);
    Tensor c = random_tensor(rng, {2, 5}, -1.5, 1.5);
    return check_expr(
        [c](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.multiply(leaf, rec.constant(c))));
        },
        x);
  }});
  cases.push_back({"relu", [](Rng& rng, std::uint64_t) {
    Tensor x = random_signed_away_from_zero(rng, {3, 4});
    return check_expr(
        [](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.relu(leaf)));
        },
        x);
  }});
  cases.push_back({"tanh", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {3, 4}, -2.0, 2.0);
    return check_expr(
        [](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.tanh(leaf)));
        },
        x);
  }});
  cases.push_back({"exp", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {3, 4}, -1.0, 1.0);
    return check_expr(
        [](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.exp(leaf)));
        },
        x);
  }});
  cases.push_back({"log", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {3, 4}, 0.5, 2.0);
    return check_expr(
        [](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.log(leaf)));
        },
        x);
  }});
  cases.push_back({"mean-reduce", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {7}, -1.0, 1.0);
    Tensor c = random_tensor(rng, {7}, -1.0, 1.0);
    return check_expr(
        [c](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.multiply(leaf, rec.constant(c)));
        },
        x);
  }});
  cases.push_back({"sum-reduce", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {7}, -1.0, 1.0);
    Tensor c = random_tensor(rng, {7}, -1.0, 1.0);
    return check_expr(
        [c](ComputationRecord& rec, const Tensor& leaf) {
          return rec.sum_reduce(rec.multiply(leaf, rec.constant(c)));
        },
        x);
  }});
  cases.push_back({"broadcast-add-bias-input", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {3, 4}, -1.0, 1.0);
    Tensor b = random_tensor(rng, {4}, -1.0, 1.0);
    return check_expr(
        [b](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.bias_add(leaf, rec.constant(b))));
        },
        x);
  }});
  cases.push_back({"broadcast-add-bias-bias", [](Rng& rng, std::uint64_t) {
    Tensor a = random_tensor(rng, {3, 4}, -1.0, 1.0);
    Tensor x = random_tensor(rng, {4}, -1.0, 1.0);
    return check_expr(
        [a](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.bias_add(rec.constant(a), leaf)));
        },
        x);
  }});
  cases.push_back({"softmax", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {4, 5}, -2.0, 2.0);
    Tensor c = random_tensor(rng, {4, 5}, -1.0, 1.0);
    return check_expr(
        [c](ComputationRecord& rec, const Tensor& leaf) {
          return rec.mean_reduce(rec.square(rec.multiply(rec.softmax(leaf), rec.constant(c))));
        },
        x);
  }});
  cases.push_back({"square", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {3, 4}, -1.5, 1.5);
    return check_expr(
        [](ComputationRecord& rec, const Tensor& leaf) { return rec.mean_reduce(rec.square(leaf)); },
        x);
  }});
  cases.push_back({"two-layer-tanh-chain", [](Rng& rng, std::uint64_t) {
    Tensor x = random_tensor(rng, {2, 3}, -1.0, 1.0);
    Tensor w1 = random_tensor(rng, {3, 5}, -0.8, 0.8);
    Tensor b1 = random_tensor(rng, {5}, -0.3, 0.3);
    Tensor w2 = random_tensor(rng, {5, 2}, -0.8, 0.8);
    return check_expr(
        [w1, b1, w2](ComputationRecord& rec, const Tensor& leaf) {
          Tensor h = rec.tanh(rec.bias_add(rec.matmul(leaf, rec.constant(w1)), rec.constant(b1)));
          return rec.mean_reduce(rec.square(rec.tanh(rec.matmul(h, rec.constant(w2)))));
        },
        x);
  }});
  cases.push_back({"classification-loss", [](Rng&, std::uint64_t point_seed) {
    return check_classifier_loss(point_seed);
  }});
  cases.push_back({"vae-loss", [](Rng&, std::uint64_t point_seed) {
    return check_vae_loss(point_seed);
  }});

  for (const PrimitiveCase& c : cases) {
    GradCheckCase result;
    result.name = c.name;
    result.points = points_per_case;
    Rng rng(Rng::derive(seed, std::hash<std::string>{}(c.name)));
    for (int p = 0; p < points_per_case; ++p) {
      const std::uint64_t point_seed = Rng::derive(seed, rng.next_u64());
      result.max_rel_err = std::max(result.max_rel_err, c.probe(rng, point_seed));
    }
    result.pass = result.max_rel_err < tolerance;
    results.push_back(result);
  }
  return results;
}

}  // namespace icpd
