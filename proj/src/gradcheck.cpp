#include <algorithm>
#include <cmath>
#include <utility>

#include "pldp/gradcheck.hpp"
#include "pldp/losses.hpp"
#include "pldp/matrix.hpp"

namespace pldp {

namespace {

constexpr double kEps = 1e-5;

std::vector<double> draw_values(Rng& rng, int64_t n, double lo, double hi) {
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

Tensor rand_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0, bool grad = true) {
  const int64_t n = numel(shape);
  return Tensor::leaf(std::move(shape), draw_values(rng, n, lo, hi), grad);
}

// Pairwise-distinct values so max-style kinks sit away from the probe.
Tensor rand_distinct(Rng& rng, Shape shape, double margin = 1e-3, bool grad = true) {
  const int64_t n = numel(shape);
  std::vector<double> v;
  for (int attempt = 0; attempt < 100; ++attempt) {
    v = draw_values(rng, n, -1.0, 1.0);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    bool ok = true;
    for (size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i] - sorted[i - 1] < margin) ok = false;
    if (ok) break;
  }
  return Tensor::leaf(std::move(shape), std::move(v), grad);
}

// Values kept at least `margin` away from `edge` (for clamp/relu kinks).
Tensor rand_off_edge(Rng& rng, Shape shape, double edge, double margin = 1e-3, bool grad = true) {
  const int64_t n = numel(shape);
  std::vector<double> v = draw_values(rng, n, -1.0, 1.0);
  for (double& x : v) {
    while (std::fabs(x - edge) < margin) x = rng.uniform(-1.0, 1.0);
  }
  return Tensor::leaf(std::move(shape), std::move(v), grad);
}

std::vector<double> rand_unit_values(Rng& rng, int dim) {
  std::vector<double> v(static_cast<size_t>(dim));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
  } while (norm < 1e-6);
  for (double& x : v) x /= norm;
  return v;
}

Tensor rand_unit(Rng& rng, int dim, bool grad = false) {
  return Tensor::leaf({dim}, rand_unit_values(rng, dim), grad);
}

Matrix rand_unit_rows(Rng& rng, int rows, int dim) {
  Matrix m(rows, dim);
  for (int i = 0; i < rows; ++i) {
    const std::vector<double> v = rand_unit_values(rng, dim);
    std::copy(v.begin(), v.end(), m.row(i));
  }
  return m;
}

// Collapses any tensor to a scalar with fixed distinct weights, so the check
// sees every Jacobian entry instead of just row sums.
Tensor collapse(Graph& g, const Tensor& t, const Tensor& w) {
  return g.dot(g.reshape(t, {static_cast<int>(t.size())}), w);
}

Tensor weights_for(Rng& rng, int64_t n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (size_t i = 0; i < w.size(); ++i) w[i] = 0.25 + 0.5 * rng.uniform() + 0.1 * static_cast<double>(i);
  return Tensor::leaf({static_cast<int>(n)}, std::move(w));
}

// One suite entry: `trials` random instances of `instance`, worst error wins.
// `instance` receives a per-trial RNG and returns one measured error.
GradCheckCase make_case(const std::string& name, int trials, uint64_t seed,
                        std::function<double(Rng&)> instance) {
  return GradCheckCase{name, [name, trials, seed, instance = std::move(instance)]() {
                         Rng root(seed);
                         Rng rng = root.child(name);
                         double worst = 0.0;
                         for (int t = 0; t < trials; ++t)
                           worst = std::max(worst, instance(rng));
                         return worst;
                       }};
}

LossConfig gradcheck_loss_config() {
  LossConfig cfg;
  cfg.tau = 0.4;
  cfg.lambda = 0.5;
  cfg.negative_count = 6;
  cfg.dataset_size = 50;
  return cfg;
}

}  // namespace

std::vector<GradCheckCase> build_gradcheck_suite(int trials, uint64_t seed) {
  if (trials < 1) throw ConfigError("gradcheck needs at least 1 trial");
  std::vector<GradCheckCase> cases;
  auto add = [&](const std::string& name, std::function<double(Rng&)> fn) {
    cases.push_back(make_case(name, trials, seed, std::move(fn)));
  };

  // ----- elementwise binary, through each operand -----
  add("add/lhs", [](Rng& rng) {
    Tensor b = rand_tensor(rng, {2, 3}, -1, 1, false);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.add(x, b), w); },
        rand_tensor(rng, {2, 3}), kEps);
  });
  add("add/rhs", [](Rng& rng) {
    Tensor a = rand_tensor(rng, {2, 3}, -1, 1, false);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.add(a, x), w); },
        rand_tensor(rng, {2, 3}), kEps);
  });
  add("sub/lhs", [](Rng& rng) {
    Tensor b = rand_tensor(rng, {2, 3}, -1, 1, false);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.sub(x, b), w); },
        rand_tensor(rng, {2, 3}), kEps);
  });
  add("sub/rhs", [](Rng& rng) {
    Tensor a = rand_tensor(rng, {2, 3}, -1, 1, false);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.sub(a, x), w); },
        rand_tensor(rng, {2, 3}), kEps);
  });
  add("mul/lhs", [](Rng& rng) {
    Tensor b = rand_tensor(rng, {2, 3}, -1, 1, false);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.mul(x, b), w); },
        rand_tensor(rng, {2, 3}), kEps);
  });
  add("mul/rhs", [](Rng& rng) {
    Tensor a = rand_tensor(rng, {2, 3}, -1, 1, false);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.mul(a, x), w); },
        rand_tensor(rng, {2, 3}), kEps);
  });
  add("div/numerator", [](Rng& rng) {
    Tensor b = rand_off_edge(rng, {2, 3}, 0.0, 0.4, false);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.div(x, b), w); },
        rand_tensor(rng, {2, 3}), kEps);
  });
  add("div/denominator", [](Rng& rng) {
    Tensor a = rand_tensor(rng, {2, 3}, -1, 1, false);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.div(a, x), w); },
        rand_off_edge(rng, {2, 3}, 0.0, 0.4), kEps);
  });

  // ----- elementwise unary -----
  add("add_scalar", [](Rng& rng) {
    const double c = rng.uniform(-2.0, 2.0);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.add_scalar(x, c), w); },
        rand_tensor(rng, {2, 3}), kEps);
  });
  add("mul_scalar", [](Rng& rng) {
    const double c = rng.uniform(-2.0, 2.0);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.mul_scalar(x, c), w); },
        rand_tensor(rng, {2, 3}), kEps);
  });
  add("clamp_min", [](Rng& rng) {
    const double lo = rng.uniform(-0.5, 0.5);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.clamp_min(x, lo), w); },
        rand_off_edge(rng, {2, 3}, lo), kEps);
  });
  add("exp", [](Rng& rng) {
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.exp(x), w); },
        rand_tensor(rng, {2, 3}), kEps);
  });
  add("log", [](Rng& rng) {
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.log(x), w); },
        rand_tensor(rng, {2, 3}, 0.3, 2.0), kEps);
  });
  add("relu", [](Rng& rng) {
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.relu(x), w); },
        rand_off_edge(rng, {2, 3}, 0.0), kEps);
  });
  add("sigmoid", [](Rng& rng) {
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.sigmoid(x), w); },
        rand_tensor(rng, {2, 3}, -3.0, 3.0), kEps);
  });

  // ----- reductions / vector ops -----
  add("sum", [](Rng& rng) {
    return finite_difference_check([&](Graph& g, const Tensor& x) { return g.sum(x); },
                                   rand_tensor(rng, {7}), kEps);
  });
  add("mean", [](Rng& rng) {
    return finite_difference_check([&](Graph& g, const Tensor& x) { return g.mean(x); },
                                   rand_tensor(rng, {2, 4}), kEps);
  });
  add("dot/lhs", [](Rng& rng) {
    Tensor b = rand_tensor(rng, {6}, -1, 1, false);
    return finite_difference_check([&](Graph& g, const Tensor& x) { return g.dot(x, b); },
                                   rand_tensor(rng, {6}), kEps);
  });
  add("dot/rhs", [](Rng& rng) {
    Tensor a = rand_tensor(rng, {6}, -1, 1, false);
    return finite_difference_check([&](Graph& g, const Tensor& x) { return g.dot(a, x); },
                                   rand_tensor(rng, {6}), kEps);
  });
  add("softmax", [](Rng& rng) {
    Tensor w = weights_for(rng, 5);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.softmax(x), w); },
        rand_tensor(rng, {5}, -2.0, 2.0), kEps);
  });
  add("l2_normalize", [](Rng& rng) {
    Tensor w = weights_for(rng, 6);
    Tensor x = rand_tensor(rng, {6});
    double norm = 0.0;
    for (double v : x.values()) norm += v * v;
    if (std::sqrt(norm) < 0.5) x.values()[0] += 1.0;  // keep away from the degenerate zone
    return finite_difference_check(
        [&](Graph& g, const Tensor& v) { return collapse(g, g.l2_normalize(v), w); }, x, kEps);
  });
  add("cosine_similarity/lhs", [](Rng& rng) {
    Tensor b = rand_unit(rng, 6);
    Tensor x = rand_tensor(rng, {6});
    x.values()[0] += x.values()[0] >= 0 ? 1.0 : -1.0;
    return finite_difference_check(
        [&](Graph& g, const Tensor& v) { return g.cosine_similarity(v, b); }, x, kEps);
  });
  add("cosine_similarity/rhs", [](Rng& rng) {
    Tensor a = rand_unit(rng, 6);
    Tensor x = rand_tensor(rng, {6});
    x.values()[0] += x.values()[0] >= 0 ? 1.0 : -1.0;
    return finite_difference_check(
        [&](Graph& g, const Tensor& v) { return g.cosine_similarity(a, v); }, x, kEps);
  });
  add("pick", [](Rng& rng) {
    const int idx = static_cast<int>(rng.uniform_int(7));
    return finite_difference_check([&](Graph& g, const Tensor& x) { return g.pick(x, idx); },
                                   rand_tensor(rng, {7}), kEps);
  });
  add("concat", [](Rng& rng) {
    Tensor a = rand_tensor(rng, {3}, -1, 1, false);
    Tensor c = rand_tensor(rng, {2}, -1, 1, false);
    Tensor w = weights_for(rng, 9);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.concat({a, x, c}), w); },
        rand_tensor(rng, {4}), kEps);
  });
  add("reshape", [](Rng& rng) {
    Tensor w = weights_for(rng, 12);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.reshape(x, {3, 4}), w); },
        rand_tensor(rng, {2, 6}), kEps);
  });

  // ----- linear algebra / convolution -----
  add("matmul/lhs", [](Rng& rng) {
    Tensor b = rand_tensor(rng, {4, 2}, -1, 1, false);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.matmul(x, b), w); },
        rand_tensor(rng, {3, 4}), kEps);
  });
  add("matmul/rhs", [](Rng& rng) {
    Tensor a = rand_tensor(rng, {3, 4}, -1, 1, false);
    Tensor w = weights_for(rng, 6);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.matmul(a, x), w); },
        rand_tensor(rng, {4, 2}), kEps);
  });
  add("conv2d/input", [](Rng& rng) {
    const int stride = 1 + static_cast<int>(rng.uniform_int(2));
    const int padding = static_cast<int>(rng.uniform_int(2));
    Tensor k = rand_tensor(rng, {3, 2, 3, 3}, -1, 1, false);
    const int out_side = (5 + 2 * padding - 3) / stride + 1;
    Tensor w = weights_for(rng, static_cast<int64_t>(3) * out_side * out_side);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.conv2d(x, k, stride, padding), w); },
        rand_tensor(rng, {2, 5, 5}), kEps);
  });
  add("conv2d/kernel", [](Rng& rng) {
    const int stride = 1 + static_cast<int>(rng.uniform_int(2));
    const int padding = static_cast<int>(rng.uniform_int(2));
    Tensor x = rand_tensor(rng, {2, 5, 5}, -1, 1, false);
    const int out_side = (5 + 2 * padding - 3) / stride + 1;
    Tensor w = weights_for(rng, static_cast<int64_t>(3) * out_side * out_side);
    return finite_difference_check(
        [&](Graph& g, const Tensor& k) { return collapse(g, g.conv2d(x, k, stride, padding), w); },
        rand_tensor(rng, {3, 2, 3, 3}), kEps);
  });

  // ----- spatial ops -----
  add("max_pool2d", [](Rng& rng) {
    Tensor w = weights_for(rng, 2 * 2 * 2);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.max_pool2d(x, 2, 2), w); },
        rand_distinct(rng, {2, 4, 4}), kEps);
  });
  add("avg_pool2d", [](Rng& rng) {
    Tensor w = weights_for(rng, 2 * 2 * 2);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.avg_pool2d(x, 2, 2), w); },
        rand_tensor(rng, {2, 4, 4}), kEps);
  });
  add("global_avg_pool", [](Rng& rng) {
    Tensor w = weights_for(rng, 3);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.global_avg_pool(x), w); },
        rand_tensor(rng, {3, 4, 4}), kEps);
  });
  add("global_max_pool", [](Rng& rng) {
    Tensor w = weights_for(rng, 3);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.global_max_pool(x), w); },
        rand_distinct(rng, {3, 4, 4}), kEps);
  });
  add("add_channel_bias/input", [](Rng& rng) {
    Tensor b = rand_tensor(rng, {3}, -1, 1, false);
    Tensor w = weights_for(rng, 3 * 4 * 4);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.add_channel_bias(x, b), w); },
        rand_tensor(rng, {3, 4, 4}), kEps);
  });
  add("add_channel_bias/bias", [](Rng& rng) {
    Tensor x = rand_tensor(rng, {3, 4, 4}, -1, 1, false);
    Tensor w = weights_for(rng, 3 * 4 * 4);
    return finite_difference_check(
        [&](Graph& g, const Tensor& b) { return collapse(g, g.add_channel_bias(x, b), w); },
        rand_tensor(rng, {3}), kEps);
  });
  add("scale_channels/input", [](Rng& rng) {
    Tensor s = rand_tensor(rng, {3}, 0.2, 1.5, false);
    Tensor w = weights_for(rng, 3 * 4 * 4);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.scale_channels(x, s), w); },
        rand_tensor(rng, {3, 4, 4}), kEps);
  });
  add("scale_channels/scales", [](Rng& rng) {
    Tensor x = rand_tensor(rng, {3, 4, 4}, -1, 1, false);
    Tensor w = weights_for(rng, 3 * 4 * 4);
    return finite_difference_check(
        [&](Graph& g, const Tensor& s) { return collapse(g, g.scale_channels(x, s), w); },
        rand_tensor(rng, {3}, 0.2, 1.5), kEps);
  });
  add("scale_spatial/input", [](Rng& rng) {
    Tensor m = rand_tensor(rng, {1, 4, 4}, 0.2, 1.5, false);
    Tensor w = weights_for(rng, 3 * 4 * 4);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.scale_spatial(x, m), w); },
        rand_tensor(rng, {3, 4, 4}), kEps);
  });
  add("scale_spatial/map", [](Rng& rng) {
    Tensor x = rand_tensor(rng, {3, 4, 4}, -1, 1, false);
    Tensor w = weights_for(rng, 3 * 4 * 4);
    return finite_difference_check(
        [&](Graph& g, const Tensor& m) { return collapse(g, g.scale_spatial(x, m), w); },
        rand_tensor(rng, {1, 4, 4}, 0.2, 1.5), kEps);
  });
  add("channel_mean_map", [](Rng& rng) {
    Tensor w = weights_for(rng, 4 * 4);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.channel_mean_map(x), w); },
        rand_tensor(rng, {3, 4, 4}), kEps);
  });
  add("channel_max_map", [](Rng& rng) {
    Tensor w = weights_for(rng, 4 * 4);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return collapse(g, g.channel_max_map(x), w); },
        rand_distinct(rng, {3, 4, 4}), kEps);
  });
  add("concat_channels/first", [](Rng& rng) {
    Tensor b = rand_tensor(rng, {3, 4, 4}, -1, 1, false);
    Tensor w = weights_for(rng, 5 * 4 * 4);
    return finite_difference_check(
        [&](Graph& g, const Tensor& a) { return collapse(g, g.concat_channels(a, b), w); },
        rand_tensor(rng, {2, 4, 4}), kEps);
  });
  add("concat_channels/second", [](Rng& rng) {
    Tensor a = rand_tensor(rng, {2, 4, 4}, -1, 1, false);
    Tensor w = weights_for(rng, 5 * 4 * 4);
    return finite_difference_check(
        [&](Graph& g, const Tensor& b) { return collapse(g, g.concat_channels(a, b), w); },
        rand_tensor(rng, {3, 4, 4}), kEps);
  });

  // ----- training losses (embeddings normalized inside the probe so the
  // checked input is unconstrained) -----
  add("similarity_h/lhs", [](Rng& rng) {
    Tensor b = rand_unit(rng, 8);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) {
          return similarity_h(g, g.l2_normalize(x), b, 0.4, 0.12);
        },
        rand_tensor(rng, {8}, 0.3, 1.0), kEps);
  });
  add("similarity_h/rhs", [](Rng& rng) {
    Tensor a = rand_unit(rng, 8);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) {
          return similarity_h(g, a, g.l2_normalize(x), 0.4, 0.12);
        },
        rand_tensor(rng, {8}, 0.3, 1.0), kEps);
  });
  add("nce_loss/image", [](Rng& rng) {
    const LossConfig cfg = gradcheck_loss_config();
    Tensor patch = rand_unit(rng, 8);
    Matrix negs = rand_unit_rows(rng, 6, 8);
    Tensor negatives = Tensor::leaf({6, 8}, std::move(negs.data));
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) {
          return nce_loss(g, g.l2_normalize(x), patch, negatives, cfg);
        },
        rand_tensor(rng, {8}, 0.3, 1.0), kEps);
  });
  add("nce_loss/patch", [](Rng& rng) {
    const LossConfig cfg = gradcheck_loss_config();
    Tensor image = rand_unit(rng, 8);
    Matrix negs = rand_unit_rows(rng, 6, 8);
    Tensor negatives = Tensor::leaf({6, 8}, std::move(negs.data));
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) {
          return nce_loss(g, image, g.l2_normalize(x), negatives, cfg);
        },
        rand_tensor(rng, {8}, 0.3, 1.0), kEps);
  });
  add("nce_loss/negatives", [](Rng& rng) {
    const LossConfig cfg = gradcheck_loss_config();
    Tensor image = rand_unit(rng, 8);
    Tensor patch = rand_unit(rng, 8);
    Matrix negs = rand_unit_rows(rng, 6, 8);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) { return nce_loss(g, image, patch, x, cfg); },
        Tensor::leaf({6, 8}, std::move(negs.data), true), kEps);
  });
  add("nce_loss/no_negatives", [](Rng& rng) {
    const LossConfig cfg = gradcheck_loss_config();
    Tensor patch = rand_unit(rng, 8);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) {
          return nce_loss(g, g.l2_normalize(x), patch, Tensor(), cfg);
        },
        rand_tensor(rng, {8}, 0.3, 1.0), kEps);
  });
  add("pld_loss/image", [](Rng& rng) {
    const LossConfig cfg = gradcheck_loss_config();
    const Matrix ic = rand_unit_rows(rng, 3, 8);
    const Matrix pc = rand_unit_rows(rng, 3, 8);
    std::vector<double> ia(3, 0.0), pa(3, 0.0);
    ia[static_cast<size_t>(rng.uniform_int(3))] = 1.0;
    pa[static_cast<size_t>(rng.uniform_int(3))] = 1.0;
    Tensor patch = rand_unit(rng, 8);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) {
          return pld_loss(g, g.l2_normalize(x), patch, ic, pc, ia, pa, cfg);
        },
        rand_tensor(rng, {8}, 0.3, 1.0), kEps);
  });
  add("pld_loss/patch", [](Rng& rng) {
    const LossConfig cfg = gradcheck_loss_config();
    const Matrix ic = rand_unit_rows(rng, 3, 8);
    const Matrix pc = rand_unit_rows(rng, 3, 8);
    std::vector<double> ia(3, 0.0), pa(3, 0.0);
    ia[static_cast<size_t>(rng.uniform_int(3))] = 1.0;
    pa[static_cast<size_t>(rng.uniform_int(3))] = 1.0;
    Tensor image = rand_unit(rng, 8);
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) {
          return pld_loss(g, image, g.l2_normalize(x), ic, pc, ia, pa, cfg);
        },
        rand_tensor(rng, {8}, 0.3, 1.0), kEps);
  });
  add("total_loss/combined", [](Rng& rng) {
    const LossConfig cfg = gradcheck_loss_config();
    const Matrix ic = rand_unit_rows(rng, 3, 8);
    const Matrix pc = rand_unit_rows(rng, 3, 8);
    std::vector<double> ia(3, 0.0), pa(3, 0.0);
    ia[static_cast<size_t>(rng.uniform_int(3))] = 1.0;
    pa[static_cast<size_t>(rng.uniform_int(3))] = 1.0;
    Tensor patch = rand_unit(rng, 8);
    Matrix negs = rand_unit_rows(rng, 6, 8);
    Tensor negatives = Tensor::leaf({6, 8}, std::move(negs.data));
    return finite_difference_check(
        [&](Graph& g, const Tensor& x) {
          Tensor emb = g.l2_normalize(x);
          Tensor nce = nce_loss(g, emb, patch, negatives, cfg);
          Tensor pld = pld_loss(g, emb, patch, ic, pc, ia, pa, cfg);
          return total_loss(g, nce, pld, cfg.lambda);
        },
        rand_tensor(rng, {8}, 0.3, 1.0), kEps);
  });

  return cases;
}

}  // namespace pldp
