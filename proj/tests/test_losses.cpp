#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "pldp/error.hpp"
#include "pldp/gradcheck.hpp"
#include "pldp/losses.hpp"
#include "pldp/rng.hpp"
#include "pldp/tensor.hpp"

using namespace pldp;

namespace {

Tensor unit2(double c) {
  // Unit vector at cosine c against [1, 0]: the dot with [1,0] is exactly c.
  double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  return Tensor::leaf({2}, {c, s});
}

std::vector<double> normalized(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

std::vector<double> random_unit(int dim, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(dim));
  for (auto& x : v) x = rng.normal();
  return normalized(std::move(v));
}

Matrix rows_of(const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) m.at(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  return m;
}

LossConfig cfg_with(double tau, int negs, int n) {
  LossConfig c;
  c.tau = tau;
  c.negative_count = negs;
  c.dataset_size = n;
  return c;
}

// Scalar reference for the similarity gate, independent of the graph ops.
double h_ref(double cos, double tau, double ratio) {
  double e = std::exp(cos / tau);
  return e / (e + ratio);
}

}  // namespace

TEST_CASE("similarity gate matches hand-computed values") {
  Graph g;
  Tensor a = Tensor::leaf({3}, {1.0, 0.0, 0.0});

  // Identical embeddings, tau 0.4, ratio 1: e^2.5 / (e^2.5 + 1).
  Tensor h_same = similarity_h(g, a, a, 0.4, 1.0);
  CHECK(std::abs(h_same.scalar_value() - 0.9241418199787564) < 1e-12);

  // Orthogonal embeddings: exp(0) = 1 regardless of tau, so exactly 1/2.
  Tensor b = Tensor::leaf({3}, {0.0, 1.0, 0.0});
  Tensor h_orth = similarity_h(g, a, b, 0.37, 1.0);
  CHECK(h_orth.scalar_value() == 0.5);

  // Vanishing ratio pushes the gate to 1.
  Tensor h_lim1 = similarity_h(g, a, a, 0.4, 1e-9);
  CHECK(h_lim1.scalar_value() > 1.0 - 1e-8);
  Tensor h_lim0 = similarity_h(g, a, b, 0.4, 1e-9);
  CHECK(h_lim0.scalar_value() > 1.0 - 1e-8);
  Tensor anti = Tensor::leaf({3}, {-1.0, 0.0, 0.0});
  Tensor h_lim_neg = similarity_h(g, a, anti, 0.4, 1e-9);
  CHECK(h_lim_neg.scalar_value() > 1.0 - 1e-7);
}

TEST_CASE("similarity gate stays in (0,1) and increases with cosine") {
  Graph g;
  Tensor a = Tensor::leaf({2}, {1.0, 0.0});
  double prev = -1.0;
  for (int i = 0; i <= 2000; ++i) {
    double c = -1.0 + 2.0 * i / 2000.0;
    double h = similarity_h(g, a, unit2(c), 0.4, 64.0 / 600.0).scalar_value();
    CHECK(h > 0.0);
    CHECK(h < 1.0);
    CHECK(h > prev);
    prev = h;
  }
}

TEST_CASE("similarity gate rejects invalid knobs") {
  Graph g;
  Tensor a = Tensor::leaf({2}, {1.0, 0.0});
  CHECK_THROWS_AS(similarity_h(g, a, a, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(similarity_h(g, a, a, -0.4, 1.0), ConfigError);
  CHECK_THROWS_AS(similarity_h(g, a, a, 0.4, 0.0), ConfigError);
  CHECK_THROWS_AS(similarity_h(g, a, a, 0.4, -0.5), ConfigError);
  LossConfig bad = cfg_with(0.4, 64, 0);
  CHECK_THROWS_AS(noise_ratio(bad), ConfigError);
  CHECK(noise_ratio(cfg_with(0.4, 64, 600)) == 64.0 / 600.0);
}

TEST_CASE("contrastive loss without negatives reduces to the positive term") {
  Graph g;
  Tensor a = Tensor::leaf({3}, {0.0, 1.0, 0.0});
  LossConfig cfg = cfg_with(0.4, 64, 64);  // ratio exactly 1
  Tensor loss = nce_loss(g, a, a, Tensor(), cfg);
  CHECK(std::abs(loss.scalar_value() - 0.07888973429254963) < 1e-12);
}

TEST_CASE("contrastive loss is nonnegative across random configurations") {
  Rng rng(2024);
  const double taus[3] = {0.2, 0.4, 0.6};
  for (int t = 0; t < 1000; ++t) {
    int dim = 4 + static_cast<int>(rng.uniform_int(8));
    int n_neg = 1 + static_cast<int>(rng.uniform_int(5));
    LossConfig cfg = cfg_with(taus[rng.uniform_int(3)], 16 + static_cast<int>(rng.uniform_int(64)),
                              100 + static_cast<int>(rng.uniform_int(900)));
    Graph g;
    Tensor f = Tensor::leaf({dim}, random_unit(dim, rng));
    Tensor gt = Tensor::leaf({dim}, random_unit(dim, rng));
    std::vector<double> negs;
    for (int i = 0; i < n_neg; ++i) {
      std::vector<double> v = random_unit(dim, rng);
      negs.insert(negs.end(), v.begin(), v.end());
    }
    Tensor nt = Tensor::leaf({n_neg, dim}, negs);
    double loss = nce_loss(g, f, gt, nt, cfg).scalar_value();
    CHECK(loss >= 0.0);
    CHECK(std::isfinite(loss));
  }
}

TEST_CASE("raising the positive cosine strictly lowers the contrastive loss") {
  Rng rng(7);
  std::vector<double> negs;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> v = random_unit(2, rng);
    negs.insert(negs.end(), v.begin(), v.end());
  }
  Tensor nt = Tensor::leaf({4, 2}, negs);
  LossConfig cfg = cfg_with(0.4, 64, 600);
  double prev = std::numeric_limits<double>::infinity();
  // Sweep the image embedding so the negative terms (which compare against
  // the fixed patch embedding) stay constant and only the positive moves.
  for (int i = 0; i <= 40; ++i) {
    double c = -1.0 + 2.0 * i / 40.0;
    Graph g;
    Tensor fi = unit2(c);
    Tensor gt = Tensor::leaf({2}, {1.0, 0.0});
    double loss = nce_loss(g, fi, gt, nt, cfg).scalar_value();
    CHECK(loss < prev);
    prev = loss;
  }
}

TEST_CASE("contrastive loss validates negative shapes") {
  Graph g;
  Tensor a = Tensor::leaf({3}, {1.0, 0.0, 0.0});
  Tensor bad = Tensor::leaf({2, 2}, {1.0, 0.0, 0.0, 1.0});
  CHECK_THROWS_AS(nce_loss(g, a, a, bad, cfg_with(0.4, 64, 600)), DimensionError);
}

TEST_CASE("one-hot parsing accepts exactly one hot entry") {
  CHECK(one_hot_index({1.0, 0.0, 0.0}) == 0);
  CHECK(one_hot_index({0.0, 0.0, 1.0}) == 2);
  CHECK_THROWS_AS(one_hot_index({0.5, 0.5}), AssignmentError);
  CHECK_THROWS_AS(one_hot_index({1.0, 1.0}), AssignmentError);
  CHECK_THROWS_AS(one_hot_index({0.0, 0.0}), AssignmentError);
  CHECK_THROWS_AS(one_hot_index({}), AssignmentError);
  CHECK_THROWS_AS(one_hot_index({2.0, 0.0}), AssignmentError);
}

TEST_CASE("group loss hits log k at the uniform point") {
  // Patch embedding orthogonal to both centers -> equal gates -> uniform
  // softmax -> each term is log 2.
  Matrix C = rows_of({{1.0, 0.0}, {-1.0, 0.0}});
  Graph g;
  Tensor img = Tensor::leaf({2}, {0.0, 1.0});
  Tensor pat = Tensor::leaf({2}, {0.0, 1.0});
  LossConfig cfg = cfg_with(0.4, 64, 600);
  for (int hot = 0; hot < 2; ++hot) {
    std::vector<double> onehot = {hot == 0 ? 1.0 : 0.0, hot == 1 ? 1.0 : 0.0};
    Tensor loss = pld_loss(g, img, pat, C, C, onehot, onehot, cfg);
    CHECK(std::abs(loss.scalar_value() - std::log(2.0)) < 1e-12);
  }

  // Same at k = 3 in four dimensions: log 3.
  Matrix C3 = rows_of({{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}});
  Tensor e4 = Tensor::leaf({4}, {0.0, 0.0, 0.0, 1.0});
  Tensor loss3 = pld_loss(g, e4, e4, C3, C3, {1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}, cfg);
  CHECK(std::abs(loss3.scalar_value() - std::log(3.0)) < 1e-12);
}

TEST_CASE("group loss matches a scalar oracle at the antipodal configuration") {
  // Embedding sits exactly on its assigned center; the other center is
  // antipodal. Both terms use the same geometry, so A = B.
  const double tau = 0.4, ratio = 64.0 / 600.0;
  Matrix C = rows_of({{1.0, 0.0}, {-1.0, 0.0}});
  Graph g;
  Tensor emb = Tensor::leaf({2}, {1.0, 0.0});
  LossConfig cfg = cfg_with(tau, 64, 600);
  Tensor loss = pld_loss(g, emb, emb, C, C, {1.0, 0.0}, {1.0, 0.0}, cfg);

  double h_hit = h_ref(1.0, tau, ratio);
  double h_anti = h_ref(-1.0, tau, ratio);
  double p = std::exp(h_hit) / (std::exp(h_hit) + std::exp(h_anti));
  double want = -std::log(p);  // 0.5*A + 0.5*B with A = B = -log p
  CHECK(std::abs(loss.scalar_value() - want) < 1e-12);
}

TEST_CASE("moving a patch embedding toward its assigned center lowers term A") {
  // Well-spread centers; the sweep walks the normalized chord from a far
  // starting point onto center 0.
  Matrix C = rows_of({{1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
                      {0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0},
                      {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0}});
  std::vector<double> p0 = normalized({-1.0, 0.2, 0.0, 0.1, 0.0, 0.0, 0.15, 0.0});
  std::vector<double> target = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  LossConfig cfg = cfg_with(0.4, 64, 600);
  Tensor img = Tensor::leaf({8}, target);

  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 50; ++i) {
    double t = static_cast<double>(i) / 50.0;
    std::vector<double> p(8);
    for (int j = 0; j < 8; ++j) p[static_cast<size_t>(j)] = (1.0 - t) * p0[static_cast<size_t>(j)] + t * target[static_cast<size_t>(j)];
    Graph g;
    Tensor pat = Tensor::leaf({8}, normalized(p));
    // Only term A moves: the image embedding (term B's input) is fixed.
    Tensor loss = pld_loss(g, img, pat, C, C, {1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, cfg);
    CHECK(loss.scalar_value() < prev);
    prev = loss.scalar_value();
  }
}

TEST_CASE("group loss validates assignments and shapes") {
  Matrix C = rows_of({{1.0, 0.0}, {0.0, 1.0}});
  Matrix C1 = rows_of({{1.0, 0.0}});
  Graph g;
  Tensor e = Tensor::leaf({2}, {1.0, 0.0});
  LossConfig cfg = cfg_with(0.4, 64, 600);
  CHECK_THROWS_AS(pld_loss(g, e, e, C, C, {0.5, 0.5}, {1.0, 0.0}, cfg), AssignmentError);
  CHECK_THROWS_AS(pld_loss(g, e, e, C, C, {1.0, 0.0}, {1.0, 0.0, 0.0}, cfg), AssignmentError);
  CHECK_THROWS_AS(pld_loss(g, e, e, C1, C1, {1.0}, {1.0}, cfg), ConfigError);
  Matrix D = rows_of({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}});
  CHECK_THROWS_AS(pld_loss(g, e, e, D, D, {1.0, 0.0}, {1.0, 0.0}, cfg), DimensionError);
}

TEST_CASE("combined objective: ablation identity and arithmetic") {
  Graph g;
  Tensor nce = Tensor::scalar(0.08);
  Tensor pld = Tensor::scalar(0.70);
  Tensor same = total_loss(g, nce, pld, 0.0);
  CHECK(same.same_node(nce));
  Tensor zero_no_pld = total_loss(g, nce, Tensor(), 0.0);
  CHECK(zero_no_pld.same_node(nce));

  Tensor sum = total_loss(g, nce, pld, 0.5);
  CHECK(std::abs(sum.scalar_value() - 0.43) < 1e-15);
  CHECK_THROWS_AS(total_loss(g, nce, Tensor(), 0.5), ConfigError);
  CHECK_THROWS_AS(total_loss(g, nce, pld, -0.1), ConfigError);
}

TEST_CASE("combined gradient is the weighted sum of the part gradients") {
  Rng rng(99);
  const int dim = 6;
  const double lambda = 0.5;
  LossConfig cfg = cfg_with(0.4, 64, 600);
  Matrix C = rows_of({{1, 0, 0, 0, 0, 0}, {0, 1, 0, 0, 0, 0}, {0, 0, 1, 0, 0, 0}});

  Tensor img = Tensor::leaf({dim}, random_unit(dim, rng), true, "img");
  Tensor pat = Tensor::leaf({dim}, random_unit(dim, rng), true, "pat");
  std::vector<double> negs;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> v = random_unit(dim, rng);
    negs.insert(negs.end(), v.begin(), v.end());
  }
  Tensor nt = Tensor::leaf({5, dim}, negs);
  std::vector<double> hot = {0.0, 1.0, 0.0};

  Graph g_total;
  Tensor lt = total_loss(g_total, nce_loss(g_total, img, pat, nt, cfg),
                         pld_loss(g_total, img, pat, C, C, hot, hot, cfg), lambda);
  GradMap gm_total;
  g_total.backward(lt, gm_total);

  Graph g_nce;
  GradMap gm_nce;
  g_nce.backward(nce_loss(g_nce, img, pat, nt, cfg), gm_nce);

  Graph g_pld;
  GradMap gm_pld;
  g_pld.backward(pld_loss(g_pld, img, pat, C, C, hot, hot, cfg), gm_pld);

  for (const Tensor* t : {&img, &pat}) {
    const auto& total = gm_total.at(t->node());
    const auto& a = gm_nce.at(t->node());
    const auto& b = gm_pld.at(t->node());
    for (int j = 0; j < dim; ++j) {
      CHECK(std::abs(total[static_cast<size_t>(j)] -
                     (a[static_cast<size_t>(j)] + lambda * b[static_cast<size_t>(j)])) < 1e-12);
    }
  }
}

TEST_CASE("loss gradients pass finite-difference checks") {
  Rng rng(555);
  const int dim = 5;
  LossConfig cfg = cfg_with(0.4, 64, 600);
  std::vector<double> fixed = random_unit(dim, rng);
  std::vector<double> negs;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> v = random_unit(dim, rng);
    negs.insert(negs.end(), v.begin(), v.end());
  }
  Matrix C = rows_of({{1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}});
  std::vector<double> hot = {0.0, 0.0, 1.0};

  SUBCASE("contrastive, through the patch embedding") {
    ScalarFn fn = [&](Graph& g, const Tensor& x) {
      Tensor f = Tensor::leaf({dim}, fixed);
      Tensor nt = Tensor::leaf({3, dim}, negs);
      return nce_loss(g, f, g.l2_normalize(x), nt, cfg);
    };
    Tensor x = Tensor::leaf({dim}, random_unit(dim, rng), true);
    CHECK(finite_difference_check(fn, x, 1e-5) < 1e-4);
  }

  SUBCASE("contrastive, through the image embedding") {
    ScalarFn fn = [&](Graph& g, const Tensor& x) {
      Tensor gt = Tensor::leaf({dim}, fixed);
      Tensor nt = Tensor::leaf({3, dim}, negs);
      return nce_loss(g, g.l2_normalize(x), gt, nt, cfg);
    };
    Tensor x = Tensor::leaf({dim}, random_unit(dim, rng), true);
    CHECK(finite_difference_check(fn, x, 1e-5) < 1e-4);
  }

  SUBCASE("group loss, through both embeddings") {
    ScalarFn fn = [&](Graph& g, const Tensor& x) {
      Tensor img = Tensor::leaf({dim}, fixed);
      return pld_loss(g, img, g.l2_normalize(x), C, C, hot, hot, cfg);
    };
    Tensor x = Tensor::leaf({dim}, random_unit(dim, rng), true);
    CHECK(finite_difference_check(fn, x, 1e-5) < 1e-4);

    ScalarFn fn2 = [&](Graph& g, const Tensor& x) {
      Tensor pat = Tensor::leaf({dim}, fixed);
      return pld_loss(g, g.l2_normalize(x), pat, C, C, hot, hot, cfg);
    };
    Tensor y = Tensor::leaf({dim}, random_unit(dim, rng), true);
    CHECK(finite_difference_check(fn2, y, 1e-5) < 1e-4);
  }

  SUBCASE("combined objective end to end") {
    ScalarFn fn = [&](Graph& g, const Tensor& x) {
      Tensor img = Tensor::leaf({dim}, fixed);
      Tensor nt = Tensor::leaf({3, dim}, negs);
      Tensor e = g.l2_normalize(x);
      return total_loss(g, nce_loss(g, img, e, nt, cfg), pld_loss(g, img, e, C, C, hot, hot, cfg), 0.5);
    };
    Tensor x = Tensor::leaf({dim}, random_unit(dim, rng), true);
    CHECK(finite_difference_check(fn, x, 1e-5) < 1e-4);
  }
}
