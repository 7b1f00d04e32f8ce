#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pldp/image.hpp"
#include "pldp/jigsaw.hpp"
#include "pldp/tensor.hpp"

namespace pldp {

// Shape of the convolutional backbone and its projection heads.
struct EncoderConfig {
  std::vector<int> channels = {16, 32, 64};  // per stage, strictly increasing
  int blocks_per_stage = 1;                  // residual blocks per stage
  bool cbam = false;                         // attention block after each stage
  int cbam_reduction = 8;                    // channel-attention bottleneck ratio
  int embed_dim = 128;                       // projection head output
  int grid = 3;                              // jigsaw grid (fixes the g-head width)
  int input_size = 224;                      // H = W of full images
  int input_pool = 1;                        // front average-pool factor (1 = off)
  int num_classes = 3;                       // classification head width

  int patches() const { return grid * grid; }
  int feature_dim() const { return channels.back(); }
  int concat_dim() const { return patches() * channels.back(); }
};

void validate_encoder_config(const EncoderConfig& cfg);

// Named parameter tensors (all grad-enabled leaves). The map is ordered so
// every traversal — init, SGD, checkpointing — sees one canonical order.
struct EncoderParams {
  EncoderConfig config;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) > 0; }
  std::vector<Tensor> all() const;
};

// Fan-in-scaled normal init (std = sqrt(2 / fan_in)) for weights, zeros for
// biases. Every tensor draws from its own substream keyed by parameter
// name, so the result is independent of initialization order.
EncoderParams init_params(const EncoderConfig& cfg, uint64_t seed);

// Backbone forward pass for a [3 x H x W] input of any size the stage
// stack can reduce; returns the globally averaged feature vector.
Tensor backbone_features(Graph& g, const EncoderParams& p, const Tensor& x);

// Full-image path: validates the configured input size first.
Tensor encode_image(Graph& g, const EncoderParams& p, const Tensor& image);
Tensor encode_image(Graph& g, const EncoderParams& p, const ImageSample& image);

// Patch path: every patch runs through the shared backbone; the per-patch
// features are concatenated in the sample's (shuffled) patch order.
Tensor encode_patches(Graph& g, const EncoderParams& p, const JigsawSample& sample);

// Linear heads onto the unit sphere.
Tensor project_f(Graph& g, const EncoderParams& p, const Tensor& feature);
Tensor project_g(Graph& g, const EncoderParams& p, const Tensor& concat_feature);

// Classification logits from a backbone feature.
Tensor classify(Graph& g, const EncoderParams& p, const Tensor& feature);

// Attention block of one stage: channel gate (shared bottleneck MLP over
// average- and max-pooled descriptors, summed, sigmoid), then spatial gate
// (7x7 conv over the channel mean/max maps, sigmoid). Shape-preserving.
Tensor cbam_block(Graph& g, const EncoderParams& p, int stage, const Tensor& x);

}  // namespace pldp
