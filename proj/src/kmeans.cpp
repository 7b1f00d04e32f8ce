#include "pldp/kmeans.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pldp/error.hpp"

namespace pldp {

namespace {

double squared_distance(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Nearest center by squared Euclidean distance, ties -> lowest index.
int nearest_center(const Matrix& centers, const double* x, double* best_out) {
  int best = 0;
  double best_d = squared_distance(x, centers.row(0), centers.cols);
  for (int c = 1; c < centers.rows; ++c) {
    double d = squared_distance(x, centers.row(c), centers.cols);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best_out != nullptr) *best_out = best_d;
  return best;
}

Matrix kmeanspp_seed(const Matrix& X, int k, Rng& rng) {
  const int n = X.rows;
  const int dim = X.cols;
  Matrix centers(k, dim);
  std::vector<double> dist2(static_cast<size_t>(n), 0.0);

  int first = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
  for (int j = 0; j < dim; ++j) centers.at(0, j) = X.at(first, j);

  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = squared_distance(X.row(i), centers.row(0), dim);
      for (int p = 1; p < c; ++p) {
        double d = squared_distance(X.row(i), centers.row(p), dim);
        if (d < best) best = d;
      }
      dist2[static_cast<size_t>(i)] = best;
      total += best;
    }
    int pick;
    if (total <= 0.0) {
      // Every point coincides with a chosen center; fall back to uniform.
      pick = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
    } else {
      double r = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        cum += dist2[static_cast<size_t>(i)];
        if (r < cum) {
          pick = i;
          break;
        }
      }
    }
    for (int j = 0; j < dim; ++j) centers.at(c, j) = X.at(pick, j);
  }
  return centers;
}

ClusterModel lloyd_once(const Matrix& X, int k, Rng& rng, const KmeansOptions& opts) {
  const int n = X.rows;
  const int dim = X.cols;

  Matrix centers = kmeanspp_seed(X, k, rng);
  std::vector<int> assign(static_cast<size_t>(n), 0);
  std::vector<double> d2min(static_cast<size_t>(n), 0.0);
  ClusterModel model;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // Assignment step.
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      assign[static_cast<size_t>(i)] = nearest_center(centers, X.row(i), &d2min[static_cast<size_t>(i)]);
      inertia += d2min[static_cast<size_t>(i)];
    }
    model.inertia_trace.push_back(inertia);

    // Repair: hand each empty cluster the point currently farthest from its
    // own center (ties -> lowest point index); a point donates once per round.
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int i = 0; i < n; ++i) counts[static_cast<size_t>(assign[static_cast<size_t>(i)])]++;
    std::vector<uint8_t> donated(static_cast<size_t>(n), 0);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] > 0) continue;
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (donated[static_cast<size_t>(i)]) continue;
        if (d2min[static_cast<size_t>(i)] > far_d) {
          far_d = d2min[static_cast<size_t>(i)];
          far = i;
        }
      }
      if (far < 0) break;  // fewer undonated points than empty clusters
      counts[static_cast<size_t>(assign[static_cast<size_t>(far)])]--;
      assign[static_cast<size_t>(far)] = c;
      counts[static_cast<size_t>(c)]++;
      donated[static_cast<size_t>(far)] = 1;
    }

    // Update step: unit-normalized member means; clusters left without
    // members (or with a vanishing mean) keep their previous center.
    Matrix sums(k, dim);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int c = assign[static_cast<size_t>(i)];
      counts[static_cast<size_t>(c)]++;
      double* s = sums.row(c);
      const double* x = X.row(i);
      for (int j = 0; j < dim; ++j) s[j] += x[j];
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) continue;
      double* s = sums.row(c);
      double nrm = 0.0;
      for (int j = 0; j < dim; ++j) nrm += s[j] * s[j];
      nrm = std::sqrt(nrm);
      if (nrm < 1e-12) continue;
      double* ctr = centers.row(c);
      double moved = 0.0;
      for (int j = 0; j < dim; ++j) {
        double v = s[j] / nrm;
        double d = v - ctr[j];
        moved += d * d;
        ctr[j] = v;
      }
      shift = std::max(shift, std::sqrt(moved));
    }
    if (shift < opts.tol) break;
  }

  // Final evaluation with the settled centers.
  double inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    assign[static_cast<size_t>(i)] = nearest_center(centers, X.row(i), &d2min[static_cast<size_t>(i)]);
    inertia += d2min[static_cast<size_t>(i)];
  }
  model.inertia_trace.push_back(inertia);
  model.centers = std::move(centers);
  model.assignments = std::move(assign);
  model.inertia = inertia;
  return model;
}

}  // namespace

ClusterModel kmeans_fit(const Matrix& X, int k, Rng& rng, const KmeansOptions& opts) {
  if (k < 1) throw ConfigError("cluster count must be positive, got " + std::to_string(k));
  if (X.cols < 1) throw ConfigError("clustering needs at least 1 feature dimension");
  if (X.rows < k) {
    throw InsufficientDataError("cannot fit " + std::to_string(k) + " clusters to " +
                                std::to_string(X.rows) + " points");
  }
  if (opts.restarts < 1) throw ConfigError("restarts must be positive, got " + std::to_string(opts.restarts));
  if (opts.max_iter < 1) throw ConfigError("max_iter must be positive, got " + std::to_string(opts.max_iter));
  if (!(opts.tol >= 0.0)) throw ConfigError("tol must be non-negative");

  ClusterModel best;
  bool have = false;
  for (int r = 0; r < opts.restarts; ++r) {
    ClusterModel m = lloyd_once(X, k, rng, opts);
    if (!have || m.inertia < best.inertia) {
      best = std::move(m);
      have = true;
    }
  }
  return best;
}

int assign_cluster(const ClusterModel& model, const std::vector<double>& embedding) {
  if (model.centers.rows < 1) throw ConfigError("cluster model has no centers");
  if (static_cast<int>(embedding.size()) != model.centers.cols) {
    throw DimensionError("embedding dim " + std::to_string(embedding.size()) +
                         " does not match center dim " + std::to_string(model.centers.cols));
  }
  return nearest_center(model.centers, embedding.data(), nullptr);
}

namespace {

// Fits one bank's initialized entries and scatters assignments back to
// bank-sized indexing (-1 for uninitialized slots).
void refresh_one(const MemoryBank& bank, int k, Rng rng, const KmeansOptions& opts,
                 ClusterModel* model, std::vector<int>* assignment) {
  MemoryBank::Snapshot snap = bank.snapshot();
  std::vector<int> rows;
  rows.reserve(static_cast<size_t>(bank.size()));
  for (int i = 0; i < bank.size(); ++i) {
    if (snap.initialized[static_cast<size_t>(i)]) rows.push_back(i);
  }
  if (static_cast<int>(rows.size()) < k) {
    throw InsufficientDataError("bank has " + std::to_string(rows.size()) +
                                " initialized entries, need at least " + std::to_string(k) +
                                " to fit " + std::to_string(k) + " clusters");
  }
  Matrix X(static_cast<int>(rows.size()), bank.dim());
  for (int i = 0; i < X.rows; ++i) {
    const double* src = snap.entries.row(rows[static_cast<size_t>(i)]);
    double* dst = X.row(i);
    for (int j = 0; j < X.cols; ++j) dst[j] = src[j];
  }
  *model = kmeans_fit(X, k, rng, opts);
  assignment->assign(static_cast<size_t>(bank.size()), -1);
  for (int i = 0; i < X.rows; ++i) {
    (*assignment)[static_cast<size_t>(rows[static_cast<size_t>(i)])] = model->assignments[static_cast<size_t>(i)];
  }
}

}  // namespace

BankClusters refresh_clusters(const MemoryBank& image_bank, const MemoryBank& patch_bank, int k,
                              const Rng& rng, const KmeansOptions& opts) {
  BankClusters out;
  refresh_one(image_bank, k, rng.child("image"), opts, &out.image_model, &out.image_assignment);
  refresh_one(patch_bank, k, rng.child("patch"), opts, &out.patch_model, &out.patch_assignment);
  return out;
}

}  // namespace pldp
