#pragma once

#include <vector>

#include "pldp/matrix.hpp"
#include "pldp/memory_bank.hpp"
#include "pldp/rng.hpp"

namespace pldp {

// Spherical k-means: input rows and centers live on the unit sphere, the
// objective is the sum of squared Euclidean distances to the assigned
// center (equivalently, maximal total cosine similarity).
struct ClusterModel {
  Matrix centers;                     // k x dim, unit rows
  std::vector<int> assignments;       // one entry per input row
  double inertia = 0.0;               // sum of squared distances at the end
  // Assignment-step inertia recorded at the start of every Lloyd iteration
  // of the winning restart; non-increasing by construction.
  std::vector<double> inertia_trace;
};

struct KmeansOptions {
  int restarts = 20;
  int max_iter = 100;
  double tol = 1e-6;  // max center shift (Euclidean) considered converged
};

// Fits k centers to the rows of X (which must be unit-normalized).
// Runs `restarts` independent seedings and keeps the lowest-inertia fit;
// ties keep the earliest restart. Each Lloyd round assigns every point to
// its nearest center (ties -> lowest center index), repairs empty clusters
// by granting them the point farthest from its current center (ties ->
// lowest point index; a point donates at most once per round), then moves
// every center to the unit-normalized mean of its members.
ClusterModel kmeans_fit(const Matrix& X, int k, Rng& rng, const KmeansOptions& opts = {});

// Nearest-center lookup under the fit's distance rule.
int assign_cluster(const ClusterModel& model, const std::vector<double>& embedding);

// Cluster state for both banks, refreshed from snapshots of their
// initialized entries only. Assignment vectors are bank-sized with -1 for
// slots that were uninitialized at refresh time.
struct BankClusters {
  ClusterModel image_model;
  ClusterModel patch_model;
  std::vector<int> image_assignment;
  std::vector<int> patch_assignment;
};

// Fits k clusters per bank using independent random streams derived from
// `rng` ("image" / "patch"), so either fit is reproducible on its own.
// Requires each bank to hold at least k initialized entries.
BankClusters refresh_clusters(const MemoryBank& image_bank, const MemoryBank& patch_bank, int k,
                              const Rng& rng, const KmeansOptions& opts = {});

}  // namespace pldp
