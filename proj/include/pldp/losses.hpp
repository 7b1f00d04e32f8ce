#pragma once

#include <vector>

#include "pldp/matrix.hpp"
#include "pldp/tensor.hpp"

namespace pldp {

// Knobs of the contrastive objective.
struct LossConfig {
  double tau = 0.4;        // similarity temperature, > 0
  double lambda = 0.5;     // weight of the group-discrimination term, >= 0
  int negative_count = 64; // negatives drawn per positive (|D_n|)
  int dataset_size = 0;    // N, the number of bank slots backing the ratio
};

void validate_loss_config(const LossConfig& cfg);

// |D_n| / N — the noise ratio appearing in the similarity denominator.
double noise_ratio(const LossConfig& cfg);

// Temperature-scaled similarity gate:
//   h(a, b) = exp(<a,b>/tau) / (exp(<a,b>/tau) + ratio)
// Both inputs must be unit vectors of equal dimension. Output is a scalar
// tensor strictly inside (0, 1), strictly increasing in <a,b>.
Tensor similarity_h(Graph& g, const Tensor& a, const Tensor& b, double tau, double ratio);

// Noise-contrastive loss for one positive pair against a set of negatives:
//   -log h(f, g_t) - sum_neg log(1 - h(neg, g_t))
// `negatives` is an n x d tensor of unit rows, or a default-constructed
// Tensor for the no-negative variant. Log arguments are clamped at 1e-12.
Tensor nce_loss(Graph& g, const Tensor& image_emb, const Tensor& patch_emb, const Tensor& negatives,
                const LossConfig& cfg);

// Group-discrimination loss. Each embedding is classified against the k
// cluster centers of the opposite path: term A applies cross-entropy to
// softmax(h(C_k, patch_emb)) at the image's cluster, term B symmetrically
// to softmax(h(PC_k, image_emb)) at the patch's cluster; the result is
// 0.5*A + 0.5*B. Centers enter as constants; gradients flow only into the
// embeddings. Assignments are one-hot vectors over k.
Tensor pld_loss(Graph& g, const Tensor& image_emb, const Tensor& patch_emb,
                const Matrix& image_centers, const Matrix& patch_centers,
                const std::vector<double>& image_assignment,
                const std::vector<double>& patch_assignment, const LossConfig& cfg);

// Combined objective nce + lambda * pld. With lambda == 0 this returns the
// nce tensor itself (same node), so the ablation is structurally exact.
Tensor total_loss(Graph& g, const Tensor& nce, const Tensor& pld, double lambda);

// Index of the single 1 in a one-hot vector; rejects anything else.
int one_hot_index(const std::vector<double>& v);

}  // namespace pldp
