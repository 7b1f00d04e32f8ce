#include "pldp/encoder.hpp"

#include <cmath>

#include "pldp/error.hpp"
#include "pldp/rng.hpp"

namespace pldp {

namespace {

int bottleneck_dim(const EncoderConfig& cfg, int stage_channels) {
  int b = stage_channels / cfg.cbam_reduction;
  return b < 1 ? 1 : b;
}

Tensor init_tensor(const std::string& name, Shape shape, double std_dev, Rng& root) {
  Rng stream = root.child(name);
  std::vector<double> v(static_cast<size_t>(numel(shape)));
  if (std_dev > 0.0) {
    for (double& x : v) x = stream.normal(0.0, std_dev);
  }
  return Tensor::leaf(std::move(shape), std::move(v), true, name);
}

double conv_std(int in_ch, int kh, int kw) { return std::sqrt(2.0 / (in_ch * kh * kw)); }
double linear_std(int in_dim) { return std::sqrt(2.0 / in_dim); }

// Linear layer y = W x + b for a rank-1 input.
Tensor linear(Graph& g, const Tensor& w, const Tensor& b, const Tensor& x) {
  int out = w.shape()[0];
  int in = w.shape()[1];
  if (x.rank() != 1 || x.shape()[0] != in) {
    throw ShapeError("linear layer expects input [" + std::to_string(in) + "], got " +
                     shape_str(x.shape()));
  }
  Tensor y = g.reshape(g.matmul(w, g.reshape(x, {in, 1})), {out});
  return g.add(y, b);
}

Tensor conv_bias_relu(Graph& g, const EncoderParams& p, const std::string& prefix, const Tensor& x,
                      int stride, int padding) {
  Tensor y = g.conv2d(x, p.at(prefix + ".w"), stride, padding);
  return g.relu(g.add_channel_bias(y, p.at(prefix + ".b")));
}

Tensor residual_block(Graph& g, const EncoderParams& p, const std::string& prefix, const Tensor& x) {
  Tensor y = conv_bias_relu(g, p, prefix + ".conv1", x, 1, 1);
  y = g.add_channel_bias(g.conv2d(y, p.at(prefix + ".conv2.w"), 1, 1), p.at(prefix + ".conv2.b"));
  return g.relu(g.add(x, y));
}

}  // namespace

void validate_encoder_config(const EncoderConfig& cfg) {
  if (cfg.channels.size() < 2) {
    throw ConfigError("encoder needs at least 2 stages, got " + std::to_string(cfg.channels.size()));
  }
  for (size_t s = 0; s < cfg.channels.size(); ++s) {
    if (cfg.channels[s] < 1) throw ConfigError("stage channel counts must be positive");
    if (s > 0 && cfg.channels[s] <= cfg.channels[s - 1]) {
      throw ConfigError("stage channels must be strictly increasing");
    }
  }
  if (cfg.blocks_per_stage < 1) throw ConfigError("blocks_per_stage must be positive");
  if (cfg.cbam_reduction < 1) throw ConfigError("cbam_reduction must be positive");
  if (cfg.embed_dim < 1) throw ConfigError("embed_dim must be positive");
  if (cfg.grid < 1) throw ConfigError("grid must be positive");
  if (cfg.input_size < 1) throw ConfigError("input_size must be positive");
  if (cfg.input_size % cfg.grid != 0) {
    throw ConfigError("input_size " + std::to_string(cfg.input_size) + " not divisible by grid " +
                      std::to_string(cfg.grid));
  }
  if (cfg.input_pool < 1) throw ConfigError("input_pool must be >= 1");
  if (cfg.num_classes < 2) throw ConfigError("num_classes must be >= 2");
}

const Tensor& EncoderParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ConfigError("unknown parameter tensor: " + name);
  return it->second;
}

std::vector<Tensor> EncoderParams::all() const {
  std::vector<Tensor> out;
  out.reserve(tensors.size());
  for (const auto& [name, t] : tensors) out.push_back(t);
  return out;
}

EncoderParams init_params(const EncoderConfig& cfg, uint64_t seed) {
  validate_encoder_config(cfg);
  Rng root(seed);
  EncoderParams p;
  p.config = cfg;
  auto add = [&](const std::string& name, Shape shape, double std_dev) {
    p.tensors.emplace(name, init_tensor(name, std::move(shape), std_dev, root));
  };

  const int stages = static_cast<int>(cfg.channels.size());
  add("stem.w", {cfg.channels[0], 3, 3, 3}, conv_std(3, 3, 3));
  add("stem.b", {cfg.channels[0]}, 0.0);
  for (int s = 0; s < stages; ++s) {
    const int c = cfg.channels[static_cast<size_t>(s)];
    const std::string stage = "stage" + std::to_string(s);
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      const std::string block = stage + ".block" + std::to_string(b);
      add(block + ".conv1.w", {c, c, 3, 3}, conv_std(c, 3, 3));
      add(block + ".conv1.b", {c}, 0.0);
      add(block + ".conv2.w", {c, c, 3, 3}, conv_std(c, 3, 3));
      add(block + ".conv2.b", {c}, 0.0);
    }
    if (cfg.cbam) {
      const int r = bottleneck_dim(cfg, c);
      add(stage + ".cbam.mlp1.w", {r, c}, linear_std(c));
      add(stage + ".cbam.mlp1.b", {r}, 0.0);
      add(stage + ".cbam.mlp2.w", {c, r}, linear_std(r));
      add(stage + ".cbam.mlp2.b", {c}, 0.0);
      add(stage + ".cbam.conv.w", {1, 2, 7, 7}, conv_std(2, 7, 7));
      add(stage + ".cbam.conv.b", {1}, 0.0);
    }
    if (s + 1 < stages) {
      const int cn = cfg.channels[static_cast<size_t>(s + 1)];
      add("down" + std::to_string(s) + ".w", {cn, c, 3, 3}, conv_std(c, 3, 3));
      add("down" + std::to_string(s) + ".b", {cn}, 0.0);
    }
  }
  const int feat = cfg.feature_dim();
  add("head_f.w", {cfg.embed_dim, feat}, linear_std(feat));
  add("head_f.b", {cfg.embed_dim}, 0.0);
  add("head_g.w", {cfg.embed_dim, cfg.concat_dim()}, linear_std(cfg.concat_dim()));
  add("head_g.b", {cfg.embed_dim}, 0.0);
  add("classifier.w", {cfg.num_classes, feat}, linear_std(feat));
  add("classifier.b", {cfg.num_classes}, 0.0);
  return p;
}

Tensor cbam_block(Graph& g, const EncoderParams& p, int stage, const Tensor& x) {
  const std::string prefix = "stage" + std::to_string(stage) + ".cbam";
  if (!p.has(prefix + ".mlp1.w")) {
    throw ConfigError("no attention parameters for stage " + std::to_string(stage));
  }
  // Channel gate: shared bottleneck MLP over both pooled descriptors.
  auto mlp = [&](const Tensor& v) {
    Tensor h = g.relu(linear(g, p.at(prefix + ".mlp1.w"), p.at(prefix + ".mlp1.b"), v));
    return linear(g, p.at(prefix + ".mlp2.w"), p.at(prefix + ".mlp2.b"), h);
  };
  Tensor channel_gate = g.sigmoid(g.add(mlp(g.global_avg_pool(x)), mlp(g.global_max_pool(x))));
  Tensor x1 = g.scale_channels(x, channel_gate);

  // Spatial gate: 7x7 conv over the stacked mean/max maps of the gated input.
  Tensor maps = g.concat_channels(g.channel_mean_map(x1), g.channel_max_map(x1));
  Tensor s = g.add_channel_bias(g.conv2d(maps, p.at(prefix + ".conv.w"), 1, 3), p.at(prefix + ".conv.b"));
  return g.scale_spatial(x1, g.sigmoid(s));
}

Tensor backbone_features(Graph& g, const EncoderParams& p, const Tensor& x) {
  if (x.rank() != 3 || x.shape()[0] != 3) {
    throw ShapeError("backbone expects a [3 x H x W] input, got " + shape_str(x.shape()));
  }
  const EncoderConfig& cfg = p.config;
  Tensor y = x;
  if (cfg.input_pool > 1) y = g.avg_pool2d(y, cfg.input_pool, cfg.input_pool);
  y = conv_bias_relu(g, p, "stem", y, 2, 1);
  y = g.max_pool2d(y, 2, 2);
  const int stages = static_cast<int>(cfg.channels.size());
  for (int s = 0; s < stages; ++s) {
    const std::string stage = "stage" + std::to_string(s);
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      y = residual_block(g, p, stage + ".block" + std::to_string(b), y);
    }
    if (cfg.cbam) y = cbam_block(g, p, s, y);
    if (s + 1 < stages) y = conv_bias_relu(g, p, "down" + std::to_string(s), y, 2, 1);
  }
  return g.global_avg_pool(y);
}

Tensor encode_image(Graph& g, const EncoderParams& p, const Tensor& image) {
  const int n = p.config.input_size;
  if (image.rank() != 3 || image.shape()[0] != 3 || image.shape()[1] != n || image.shape()[2] != n) {
    throw ShapeError("expected a [3 x " + std::to_string(n) + " x " + std::to_string(n) +
                     "] image, got " + shape_str(image.shape()));
  }
  return backbone_features(g, p, image);
}

Tensor encode_image(Graph& g, const EncoderParams& p, const ImageSample& image) {
  return encode_image(g, p, image.pixels);
}

Tensor encode_patches(Graph& g, const EncoderParams& p, const JigsawSample& sample) {
  if (sample.patches.empty()) throw EmptyInputError("jigsaw sample has no patches");
  const int side = p.config.input_size / p.config.grid;
  std::vector<Tensor> feats;
  feats.reserve(sample.patches.size());
  for (size_t i = 0; i < sample.patches.size(); ++i) {
    const Tensor& patch = sample.patches[i];
    if (patch.rank() != 3 || patch.shape()[0] != 3 || patch.shape()[1] != side ||
        patch.shape()[2] != side) {
      throw ShapeError("patch " + std::to_string(i) + " must be [3 x " + std::to_string(side) +
                       " x " + std::to_string(side) + "], got " + shape_str(patch.shape()));
    }
    feats.push_back(backbone_features(g, p, patch));
  }
  return feats.size() == 1 ? feats[0] : g.concat(feats);
}

Tensor project_f(Graph& g, const EncoderParams& p, const Tensor& feature) {
  return g.l2_normalize(linear(g, p.at("head_f.w"), p.at("head_f.b"), feature));
}

Tensor project_g(Graph& g, const EncoderParams& p, const Tensor& concat_feature) {
  return g.l2_normalize(linear(g, p.at("head_g.w"), p.at("head_g.b"), concat_feature));
}

Tensor classify(Graph& g, const EncoderParams& p, const Tensor& feature) {
  return linear(g, p.at("classifier.w"), p.at("classifier.b"), feature);
}

}  // namespace pldp
