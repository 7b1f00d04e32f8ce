#include "pldp/losses.hpp"

#include <string>

#include "pldp/error.hpp"

namespace pldp {

namespace {

constexpr double kLogClamp = 1e-12;

// Elementwise h over a vector of inner products: e/(e + ratio).
Tensor gate_of_sims(Graph& g, const Tensor& sims, double tau, double ratio) {
  Tensor e = g.exp(g.mul_scalar(sims, 1.0 / tau));
  return g.div(e, g.add_scalar(e, ratio));
}

// k inner products of each center row with an embedding, as one vector.
Tensor center_sims(Graph& g, const Matrix& centers, const Tensor& emb) {
  Tensor c = Tensor::leaf({centers.rows, centers.cols}, centers.data);
  Tensor col = g.reshape(emb, {centers.cols, 1});
  return g.reshape(g.matmul(c, col), {centers.rows});
}

void check_embedding(const Tensor& t, const char* what) {
  if (!t.defined()) throw ConfigError(std::string(what) + " embedding is undefined");
  if (t.rank() != 1) {
    throw RankError(std::string(what) + " embedding must be rank-1, got " + shape_str(t.shape()));
  }
}

}  // namespace

void validate_loss_config(const LossConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw ConfigError("tau must be positive, got " + std::to_string(cfg.tau));
  if (!(cfg.lambda >= 0.0)) throw ConfigError("lambda must be non-negative, got " + std::to_string(cfg.lambda));
  if (cfg.negative_count < 0) {
    throw ConfigError("negative_count must be non-negative, got " + std::to_string(cfg.negative_count));
  }
  if (cfg.dataset_size < 1) {
    throw ConfigError("dataset_size must be positive, got " + std::to_string(cfg.dataset_size));
  }
}

double noise_ratio(const LossConfig& cfg) {
  validate_loss_config(cfg);
  if (cfg.negative_count < 1) {
    throw ConfigError("noise ratio needs at least one negative per positive");
  }
  return static_cast<double>(cfg.negative_count) / static_cast<double>(cfg.dataset_size);
}

Tensor similarity_h(Graph& g, const Tensor& a, const Tensor& b, double tau, double ratio) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive, got " + std::to_string(tau));
  if (!(ratio > 0.0)) throw ConfigError("ratio must be positive, got " + std::to_string(ratio));
  check_embedding(a, "first");
  check_embedding(b, "second");
  Tensor e = g.exp(g.mul_scalar(g.dot(a, b), 1.0 / tau));
  return g.div(e, g.add_scalar(e, ratio));
}

Tensor nce_loss(Graph& g, const Tensor& image_emb, const Tensor& patch_emb, const Tensor& negatives,
                const LossConfig& cfg) {
  double ratio = noise_ratio(cfg);
  check_embedding(image_emb, "image");
  check_embedding(patch_emb, "patch");

  Tensor h_pos = similarity_h(g, image_emb, patch_emb, cfg.tau, ratio);
  Tensor loss = g.mul_scalar(g.log(g.clamp_min(h_pos, kLogClamp)), -1.0);

  if (negatives.defined()) {
    if (negatives.rank() != 2 || negatives.shape()[1] != image_emb.shape()[0]) {
      throw DimensionError("negatives must be n x " + std::to_string(image_emb.shape()[0]) +
                           ", got " + shape_str(negatives.shape()));
    }
    int n = negatives.shape()[0];
    Tensor sims = g.reshape(g.matmul(negatives, g.reshape(patch_emb, {image_emb.shape()[0], 1})), {n});
    Tensor h_neg = gate_of_sims(g, sims, cfg.tau, ratio);
    Tensor one_minus = g.add_scalar(g.mul_scalar(h_neg, -1.0), 1.0);
    Tensor neg_term = g.mul_scalar(g.sum(g.log(g.clamp_min(one_minus, kLogClamp))), -1.0);
    loss = g.add(loss, neg_term);
  }
  return loss;
}

int one_hot_index(const std::vector<double>& v) {
  if (v.empty()) throw AssignmentError("assignment vector is empty");
  int hot = -1;
  for (size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 1.0) {
      if (hot >= 0) throw AssignmentError("assignment vector has more than one 1");
      hot = static_cast<int>(i);
    } else if (v[i] != 0.0) {
      throw AssignmentError("assignment vector entry " + std::to_string(i) + " is " +
                            std::to_string(v[i]) + ", expected 0 or 1");
    }
  }
  if (hot < 0) throw AssignmentError("assignment vector has no 1");
  return hot;
}

Tensor pld_loss(Graph& g, const Tensor& image_emb, const Tensor& patch_emb,
                const Matrix& image_centers, const Matrix& patch_centers,
                const std::vector<double>& image_assignment,
                const std::vector<double>& patch_assignment, const LossConfig& cfg) {
  double ratio = noise_ratio(cfg);
  check_embedding(image_emb, "image");
  check_embedding(patch_emb, "patch");
  int k = image_centers.rows;
  if (k < 2) throw ConfigError("group discrimination needs at least 2 clusters, got " + std::to_string(k));
  if (patch_centers.rows != k) {
    throw DimensionError("center matrices disagree on k: " + std::to_string(k) + " vs " +
                         std::to_string(patch_centers.rows));
  }
  if (image_centers.cols != patch_emb.shape()[0] || patch_centers.cols != image_emb.shape()[0]) {
    throw DimensionError("center dim does not match embedding dim");
  }
  if (static_cast<int>(image_assignment.size()) != k || static_cast<int>(patch_assignment.size()) != k) {
    throw AssignmentError("assignment vector length must equal k = " + std::to_string(k));
  }
  int idx_img = one_hot_index(image_assignment);
  int idx_patch = one_hot_index(patch_assignment);

  // Term A: the patch embedding, classified against the image-path centers,
  // should land in the image's cluster.
  Tensor logits_a = gate_of_sims(g, center_sims(g, image_centers, patch_emb), cfg.tau, ratio);
  Tensor term_a = g.mul_scalar(g.log(g.clamp_min(g.pick(g.softmax(logits_a), idx_img), kLogClamp)), -1.0);

  // Term B: the image embedding against the patch-path centers.
  Tensor logits_b = gate_of_sims(g, center_sims(g, patch_centers, image_emb), cfg.tau, ratio);
  Tensor term_b = g.mul_scalar(g.log(g.clamp_min(g.pick(g.softmax(logits_b), idx_patch), kLogClamp)), -1.0);

  return g.add(g.mul_scalar(term_a, 0.5), g.mul_scalar(term_b, 0.5));
}

Tensor total_loss(Graph& g, const Tensor& nce, const Tensor& pld, double lambda) {
  if (!nce.defined()) throw ConfigError("combined loss needs a defined contrastive term");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative, got " + std::to_string(lambda));
  if (lambda == 0.0) return nce;
  if (!pld.defined()) {
    throw ConfigError("lambda > 0 requires a defined group-discrimination term");
  }
  return g.add(nce, g.mul_scalar(pld, lambda));
}

}  // namespace pldp
