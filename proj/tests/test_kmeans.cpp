#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "doctest.h"
#include "pldp/error.hpp"
#include "pldp/kmeans.hpp"
#include "pldp/memory_bank.hpp"
#include "pldp/rng.hpp"

using namespace pldp;

namespace {

Matrix rows_of(const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) m.at(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  return m;
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

std::vector<double> axisN(int dim, int i) {
  std::vector<double> v(static_cast<size_t>(dim), 0.0);
  v[static_cast<size_t>(i)] = 1.0;
  return v;
}

double sq_dist(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Partition cost with unit-normalized mean centers, for brute-force oracles.
double partition_sse(const Matrix& X, const std::vector<int>& labels, int k) {
  Matrix centers(k, X.cols);
  std::vector<int> counts(static_cast<size_t>(k), 0);
  for (int i = 0; i < X.rows; ++i) {
    counts[static_cast<size_t>(labels[static_cast<size_t>(i)])]++;
    for (int j = 0; j < X.cols; ++j) centers.at(labels[static_cast<size_t>(i)], j) += X.at(i, j);
  }
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<size_t>(c)] == 0) return std::numeric_limits<double>::infinity();
    double n = 0.0;
    for (int j = 0; j < X.cols; ++j) n += centers.at(c, j) * centers.at(c, j);
    n = std::sqrt(n);
    if (n < 1e-12) return std::numeric_limits<double>::infinity();
    for (int j = 0; j < X.cols; ++j) centers.at(c, j) /= n;
  }
  double sse = 0.0;
  for (int i = 0; i < X.rows; ++i) {
    sse += sq_dist(X.row(i), centers.row(labels[static_cast<size_t>(i)]), X.cols);
  }
  return sse;
}

}  // namespace

TEST_CASE("two exactly repeated points split perfectly at k = 2") {
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({1.0, 0.0});
  for (int i = 0; i < 5; ++i) pts.push_back({0.0, 1.0});
  Matrix X = rows_of(pts);
  Rng rng(1);
  ClusterModel m = kmeans_fit(X, 2, rng);
  CHECK(m.inertia < 1e-15);
  // Centers are the two distinct points, in some order.
  std::set<std::pair<double, double>> got = {{m.centers.at(0, 0), m.centers.at(0, 1)},
                                             {m.centers.at(1, 0), m.centers.at(1, 1)}};
  std::set<std::pair<double, double>> want = {{1.0, 0.0}, {0.0, 1.0}};
  CHECK(got == want);
  for (int i = 0; i < 5; ++i) CHECK(m.assignments[static_cast<size_t>(i)] == m.assignments[0]);
  for (int i = 5; i < 10; ++i) CHECK(m.assignments[static_cast<size_t>(i)] == m.assignments[5]);
  CHECK(m.assignments[0] != m.assignments[5]);
}

TEST_CASE("eight random sphere points: best restart equals the exhaustive optimum") {
  for (uint64_t seed : {11ull, 22ull, 33ull}) {
    Rng data(seed);
    Matrix X(8, 3);
    for (int i = 0; i < 8; ++i) {
      std::vector<double> p = random_unit(3, data);
      for (int j = 0; j < 3; ++j) X.at(i, j) = p[static_cast<size_t>(j)];
    }

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> labels(8, 0);
    for (int mask = 1; mask < 255; ++mask) {  // skip the two empty-part labelings
      for (int i = 0; i < 8; ++i) labels[static_cast<size_t>(i)] = (mask >> i) & 1;
      best = std::min(best, partition_sse(X, labels, 2));
    }

    Rng fit_rng(seed + 1000);
    ClusterModel m = kmeans_fit(X, 2, fit_rng);
    CHECK(m.inertia >= best - 1e-9);
    CHECK(m.inertia <= best + 1e-9);
  }
}

TEST_CASE("identical points at k = 3 trigger the repair rule") {
  std::vector<double> p = normalized({1.0, 2.0, 2.0});
  std::vector<std::vector<double>> pts(6, p);
  Matrix X = rows_of(pts);
  Rng rng(5);
  ClusterModel m = kmeans_fit(X, 3, rng);
  CHECK(m.centers.rows == 3);
  for (int c = 0; c < 3; ++c) {
    for (int j = 0; j < 3; ++j) CHECK(m.centers.at(c, j) == doctest::Approx(p[static_cast<size_t>(j)]).epsilon(1e-12));
  }
  // With all centers coincident the tie rule sends every point to index 0.
  for (int i = 0; i < 6; ++i) CHECK(m.assignments[static_cast<size_t>(i)] == 0);
  CHECK(m.inertia < 1e-15);
}

TEST_CASE("nearest-center lookup: exact hit, tie rule, rescale invariance") {
  ClusterModel m;
  m.centers = rows_of({{1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0}});

  CHECK(assign_cluster(m, {1.0, 0.0}) == 0);
  CHECK(assign_cluster(m, {0.0, -1.0}) == 1);
  // (0, 1) is exactly sqrt(2) from centers 0 and 2 and farther from 1.
  CHECK(assign_cluster(m, {0.0, 1.0}) == 0);

  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v = random_unit(2, rng);
    std::vector<double> scaled(v);
    double s = 0.25 + 3.75 * rng.uniform();
    for (double& x : scaled) x *= s;
    CHECK(assign_cluster(m, normalized(scaled)) == assign_cluster(m, v));
  }

  CHECK_THROWS_AS(assign_cluster(m, {1.0, 0.0, 0.0}), DimensionError);
}

TEST_CASE("assignment-step inertia never increases and no cluster ends empty") {
  Rng data(77);
  Matrix X(40, 5);
  for (int i = 0; i < 40; ++i) {
    std::vector<double> p = random_unit(5, data);
    for (int j = 0; j < 5; ++j) X.at(i, j) = p[static_cast<size_t>(j)];
  }
  Rng rng(78);
  ClusterModel m = kmeans_fit(X, 4, rng);
  REQUIRE(m.inertia_trace.size() >= 2);
  for (size_t t = 1; t < m.inertia_trace.size(); ++t) {
    CHECK(m.inertia_trace[t] <= m.inertia_trace[t - 1] + 1e-12);
  }
  std::vector<int> counts(4, 0);
  for (int a : m.assignments) counts[static_cast<size_t>(a)]++;
  for (int c = 0; c < 4; ++c) CHECK(counts[static_cast<size_t>(c)] > 0);
  // Fixed point: every center is the normalized mean of its members.
  Matrix sums(4, 5);
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 5; ++j) sums.at(m.assignments[static_cast<size_t>(i)], j) += X.at(i, j);
  }
  for (int c = 0; c < 4; ++c) {
    double n = 0.0;
    for (int j = 0; j < 5; ++j) n += sums.at(c, j) * sums.at(c, j);
    n = std::sqrt(n);
    for (int j = 0; j < 5; ++j) CHECK(std::abs(m.centers.at(c, j) - sums.at(c, j) / n) < 1e-6);
  }
}

TEST_CASE("well-separated planted blobs are recovered exactly") {
  Rng rng(101);
  const int per = 20, dim = 8;
  std::vector<std::vector<double>> centers = {axisN(dim, 0), axisN(dim, 3), axisN(dim, 6)};
  Matrix X(3 * per, dim);
  std::vector<int> truth(static_cast<size_t>(3 * per));
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < per; ++i) {
      std::vector<double> p(centers[static_cast<size_t>(b)]);
      for (double& x : p) x += 0.02 * rng.normal();
      p = normalized(std::move(p));
      int r = b * per + i;
      truth[static_cast<size_t>(r)] = b;
      for (int j = 0; j < dim; ++j) X.at(r, j) = p[static_cast<size_t>(j)];
    }
  }
  Rng fit_rng(102);
  ClusterModel m = kmeans_fit(X, 3, fit_rng);
  // Same-blob points share a label and the three labels are distinct.
  std::set<int> labels;
  for (int b = 0; b < 3; ++b) {
    int l = m.assignments[static_cast<size_t>(b * per)];
    labels.insert(l);
    for (int i = 1; i < per; ++i) CHECK(m.assignments[static_cast<size_t>(b * per + i)] == l);
  }
  CHECK(labels.size() == 3);
  CHECK(m.inertia < 3 * per * 0.01);
}

TEST_CASE("refresh is deterministic and the two banks are independent") {
  Rng init(200);
  const int n = 30, dim = 6, k = 3;
  MemoryBank ibank(n, dim, 0.0, init);
  MemoryBank pbank(n, dim, 0.0, init);
  Rng data = init.child("fill");
  for (int i = 0; i < n; ++i) {
    ibank.update(i, random_unit(dim, data));
    pbank.update(i, random_unit(dim, data));
  }

  Rng seed_a(300), seed_b(300);
  BankClusters a = refresh_clusters(ibank, pbank, k, seed_a);
  BankClusters b = refresh_clusters(ibank, pbank, k, seed_b);
  CHECK(a.image_model.centers.data == b.image_model.centers.data);
  CHECK(a.patch_model.centers.data == b.patch_model.centers.data);
  CHECK(a.image_assignment == b.image_assignment);
  CHECK(a.patch_assignment == b.patch_assignment);

  // Scrambling the patch bank must not budge the image model.
  Rng init2(201);
  MemoryBank pbank2(n, dim, 0.0, init2);
  Rng perm_rng(400);
  std::vector<int> perm = perm_rng.shuffled_indices(n);
  for (int i = 0; i < n; ++i) pbank2.update(i, pbank.entry(perm[static_cast<size_t>(i)]));
  Rng seed_c(300);
  BankClusters c = refresh_clusters(ibank, pbank2, k, seed_c);
  CHECK(c.image_model.centers.data == a.image_model.centers.data);
  CHECK(c.image_assignment == a.image_assignment);
}

TEST_CASE("three repeated distinct embeddings give zero-inertia clusters") {
  Rng init(500);
  const int n = 12, dim = 8;
  MemoryBank ibank(n, dim, 0.0, init);
  MemoryBank pbank(n, dim, 0.0, init);
  std::vector<std::vector<double>> vals = {axisN(dim, 1), axisN(dim, 4), axisN(dim, 7)};
  for (int i = 0; i < n; ++i) {
    ibank.update(i, vals[static_cast<size_t>(i % 3)]);
    pbank.update(i, vals[static_cast<size_t>(i % 3)]);
  }
  Rng seed(501);
  BankClusters bc = refresh_clusters(ibank, pbank, 3, seed);
  CHECK(bc.image_model.inertia < 1e-15);
  std::set<std::vector<double>> got;
  for (int c = 0; c < 3; ++c) {
    got.insert(std::vector<double>(bc.image_model.centers.row(c), bc.image_model.centers.row(c) + dim));
  }
  std::set<std::vector<double>> want(vals.begin(), vals.end());
  CHECK(got == want);
  // Same-value slots share an assignment.
  for (int i = 0; i < n; ++i) {
    CHECK(bc.image_assignment[static_cast<size_t>(i)] == bc.image_assignment[static_cast<size_t>(i % 3)]);
  }
}

TEST_CASE("uninitialized slots are reported unassigned") {
  Rng init(600);
  const int n = 10, dim = 4, k = 2;
  MemoryBank ibank(n, dim, 0.0, init);
  MemoryBank pbank(n, dim, 0.0, init);
  Rng data = init.child("fill");
  for (int i = 0; i < n; ++i) {
    if (i % 2 == 0) ibank.update(i, random_unit(dim, data));
    pbank.update(i, random_unit(dim, data));
  }
  Rng seed(601);
  BankClusters bc = refresh_clusters(ibank, pbank, k, seed);
  for (int i = 0; i < n; ++i) {
    if (i % 2 == 0) {
      CHECK(bc.image_assignment[static_cast<size_t>(i)] >= 0);
      CHECK(bc.image_assignment[static_cast<size_t>(i)] < k);
    } else {
      CHECK(bc.image_assignment[static_cast<size_t>(i)] == -1);
    }
  }
}

TEST_CASE("too few points or initialized entries fail loudly") {
  Matrix X(2, 4);
  X.at(0, 0) = 1.0;
  X.at(1, 1) = 1.0;
  Rng rng(700);
  CHECK_THROWS_AS(kmeans_fit(X, 3, rng), InsufficientDataError);
  CHECK_THROWS_AS(kmeans_fit(X, 0, rng), ConfigError);
  KmeansOptions bad;
  bad.restarts = 0;
  CHECK_THROWS_AS(kmeans_fit(X, 2, rng, bad), ConfigError);

  Rng init(701);
  MemoryBank ibank(8, 4, 0.0, init);
  MemoryBank pbank(8, 4, 0.0, init);
  Rng data = init.child("fill");
  for (int i = 0; i < 2; ++i) ibank.update(i, random_unit(4, data));
  for (int i = 0; i < 8; ++i) pbank.update(i, random_unit(4, data));
  Rng seed(702);
  CHECK_THROWS_AS(refresh_clusters(ibank, pbank, 3, seed), InsufficientDataError);
}
