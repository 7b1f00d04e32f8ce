#include "pldp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <utility>

#include "pldp/checkpoint.hpp"

namespace pldp {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void validate_common(const TrainConfig& cfg) {
  validate_encoder_config(cfg.encoder);
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr))
    throw ConfigError("learning rate must be positive and finite, got " + fmt(cfg.lr));
  if (cfg.batch_size <= 0)
    throw ConfigError("batch_size must be positive, got " + std::to_string(cfg.batch_size));
  if (cfg.max_epochs <= 0)
    throw ConfigError("max_epochs must be positive, got " + std::to_string(cfg.max_epochs));
  if (cfg.lr_decay_every > 0 && !(cfg.lr_decay_factor > 0.0 && cfg.lr_decay_factor <= 1.0))
    throw ConfigError("lr_decay_factor must lie in (0, 1], got " + fmt(cfg.lr_decay_factor));
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw ConfigError("sgd momentum must lie in [0, 1), got " + fmt(cfg.momentum));
  if (cfg.early_stop) {
    if (cfg.stop_patience <= 0)
      throw ConfigError("stop_patience must be positive, got " + std::to_string(cfg.stop_patience));
    if (cfg.stop_min_delta < 0.0)
      throw ConfigError("stop_min_delta must be non-negative, got " + fmt(cfg.stop_min_delta));
  }
}

// Deep copy: fresh value buffers so later SGD steps cannot reach the copy.
EncoderParams clone_params(const EncoderParams& p) {
  EncoderParams c;
  c.config = p.config;
  for (const auto& [name, t] : p.tensors)
    c.tensors.emplace(name, Tensor::leaf(t.shape(), t.values(), t.requires_grad(), name));
  return c;
}

Tensor cross_entropy(Graph& g, const Tensor& logits, int label) {
  Tensor p = g.pick(g.softmax(logits), label);
  return g.mul_scalar(g.log(g.clamp_min(p, 1e-12)), -1.0);
}

}  // namespace

double TrainConfig::lr_at(int epoch) const {
  if (lr_decay_every <= 0) return lr;
  const int steps = epoch / lr_decay_every;
  return lr * std::pow(lr_decay_factor, static_cast<double>(steps));
}

TrainConfig pretext_defaults() {
  TrainConfig c;
  c.stage = Stage::pretext;
  c.lr = 1e-3;
  c.batch_size = 32;
  c.max_epochs = 3000;
  c.lr_decay_every = 0;
  c.early_stop = false;
  return c;
}

TrainConfig finetune_defaults() {
  TrainConfig c;
  c.stage = Stage::finetune;
  c.lr = 1e-4;
  c.batch_size = 32;
  c.max_epochs = 300;
  c.lr_decay_factor = 0.9;
  c.lr_decay_every = 30;
  c.early_stop = true;
  c.stop_min_delta = 1e-6;
  c.stop_patience = 20;
  return c;
}

TrainConfig baseline_defaults() {
  TrainConfig c = finetune_defaults();
  c.stage = Stage::baseline;
  return c;
}

void TrainHistory::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "epoch,loss,lr,seconds\n";
  for (const EpochRecord& e : epochs)
    out << e.epoch << ',' << fmt(e.loss) << ',' << fmt(e.lr) << ',' << fmt(e.seconds) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

void TrainHistory::save_json(const std::string& path) const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "{\n";
  os << "  \"stop_reason\": \"" << stop_reason << "\",\n";
  os << "  \"best_epoch\": " << best_epoch << ",\n";
  os << "  \"best_loss\": " << best_loss << ",\n";
  os << "  \"pld_evaluations\": " << pld_evaluations << ",\n";
  os << "  \"epochs\": [";
  for (size_t i = 0; i < epochs.size(); ++i) {
    const EpochRecord& e = epochs[i];
    os << (i == 0 ? "" : ",") << "\n    {\"epoch\": " << e.epoch << ", \"loss\": " << e.loss
       << ", \"lr\": " << e.lr << ", \"seconds\": " << e.seconds << "}";
  }
  os << (epochs.empty() ? "]" : "\n  ]") << "\n}\n";
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << os.str();
  if (!out) throw IoError("failed writing '" + path + "'");
}

EarlyStop::EarlyStop(double min_delta, int patience)
    : min_delta_(min_delta), patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (min_delta < 0.0) throw ConfigError("early stop min_delta must be non-negative");
  if (patience <= 0) throw ConfigError("early stop patience must be positive");
}

bool EarlyStop::observe(double loss) {
  if (!has_best_ || best_ - loss >= min_delta_) {
    best_ = loss;
    has_best_ = true;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

void sgd_step(EncoderParams& params, double lr, double momentum, SgdState* state,
              const std::set<std::string>* only) {
  if (!std::isfinite(lr)) throw ConfigError("sgd_step: learning rate must be finite");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("sgd_step: momentum must lie in [0, 1), got " + fmt(momentum));
  if (momentum > 0.0 && state == nullptr)
    throw ConfigError("sgd_step: momentum > 0 requires an SgdState");
  for (auto& [name, t] : params.tensors) {
    if (!t.has_grad()) continue;
    if (only != nullptr && only->count(name) == 0) {
      t.zero_grad();  // drop gradients of frozen parameters
      continue;
    }
    const std::vector<double>& g = t.grad();
    for (double v : g)
      if (!std::isfinite(v)) throw TrainingError("non-finite gradient in tensor '" + name + "'");
    std::vector<double>& val = t.values();
    if (momentum > 0.0) {
      std::vector<double>& vel = state->velocity[name];
      vel.resize(g.size(), 0.0);
      for (size_t i = 0; i < g.size(); ++i) {
        vel[i] = momentum * vel[i] + g[i];
        val[i] -= lr * vel[i];
      }
    } else {
      for (size_t i = 0; i < g.size(); ++i) val[i] -= lr * g[i];
    }
    t.zero_grad();
  }
}

LoadedDataset load_split_images(const DatasetManifest& manifest, Split split) {
  LoadedDataset d;
  for (const ManifestEntry& e : manifest.of_split(split)) {
    ImageSample img = load_image(manifest.resolve(e));
    img.label = e.label;
    img.sample_index = d.size();
    d.images.push_back(std::move(img));
  }
  return d;
}

// ===== self-supervised stage =====

PretextResult pretext_train(const TrainConfig& cfg, const LoadedDataset& train) {
  if (cfg.stage != Stage::pretext) throw ConfigError("pretext_train: config stage is not pretext");
  validate_common(cfg);
  if (cfg.clusters <= 0)
    throw ConfigError("clusters must be positive, got " + std::to_string(cfg.clusters));
  if (cfg.loss.lambda > 0.0 && cfg.clusters < 2)
    throw ConfigError("group discrimination needs at least 2 clusters, got " +
                      std::to_string(cfg.clusters));
  if (!(cfg.bank_momentum >= 0.0 && cfg.bank_momentum < 1.0))
    throw ConfigError("bank_momentum must lie in [0, 1), got " + fmt(cfg.bank_momentum));
  const int n = train.size();
  if (n == 0) throw EmptyInputError("pretext_train: empty training set");

  LossConfig loss_cfg = cfg.loss;
  loss_cfg.dataset_size = n;
  validate_loss_config(loss_cfg);

  const Rng root(cfg.seed);
  EncoderParams params = init_params(cfg.encoder, cfg.seed);
  Rng ibank_rng = root.child("image-bank-init");
  Rng pbank_rng = root.child("patch-bank-init");
  MemoryBank image_bank(n, cfg.encoder.embed_dim, cfg.bank_momentum, ibank_rng);
  MemoryBank patch_bank(n, cfg.encoder.embed_dim, cfg.bank_momentum, pbank_rng);

  const int k = cfg.clusters;
  const bool pld_enabled = loss_cfg.lambda > 0.0;
  BankClusters clusters;
  bool clusters_valid = false;

  TrainHistory history;
  SgdState sgd_state;
  double best = std::numeric_limits<double>::infinity();
  EncoderParams best_params = clone_params(params);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    const double lr = cfg.lr_at(epoch);
    const Rng epoch_rng = root.child("epoch", static_cast<uint64_t>(epoch));

    // Group discrimination needs cluster structure; refresh once per epoch,
    // after both banks hold enough real (non-random) entries.
    bool use_pld = false;
    if (pld_enabled && image_bank.initialized_count() >= 10 * k &&
        patch_bank.initialized_count() >= 10 * k) {
      const Rng kmeans_rng = epoch_rng.child("clusters");
      clusters = refresh_clusters(image_bank, patch_bank, k, kmeans_rng);
      clusters_valid = true;
      use_pld = true;
    }

    Rng shuffle_rng = epoch_rng.child("shuffle");
    const std::vector<int> perm = shuffle_rng.shuffled_indices(n);
    // One stream for all per-sample draws, consumed in visit order, keeps
    // the epoch reproducible regardless of batching internals.
    Rng sample_rng = epoch_rng.child("samples");

    double loss_sum = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int end = std::min(n, start + cfg.batch_size);
      Graph graph;
      std::vector<Tensor> losses;
      struct FreshEmbedding {
        int index;
        std::vector<double> image;
        std::vector<double> patch;
      };
      std::vector<FreshEmbedding> fresh;
      losses.reserve(static_cast<size_t>(end - start));
      fresh.reserve(static_cast<size_t>(end - start));

      for (int pos = start; pos < end; ++pos) {
        const int idx = perm[static_cast<size_t>(pos)];
        const ImageSample& img = train.images[static_cast<size_t>(idx)];

        JigsawSample jig = apply_jigsaw(img, cfg.encoder.grid, sample_rng);
        jig.source_index = idx;

        Tensor negatives;  // undefined = contrast against the positive alone
        const int eligible = static_cast<int>(image_bank.eligible_negatives(idx).size());
        const int n_neg = std::min(loss_cfg.negative_count, eligible);
        if (n_neg > 0) {
          Matrix m = image_bank.sample_negatives(idx, n_neg, sample_rng);
          negatives = Tensor::leaf({m.rows, m.cols}, std::move(m.data));
        }

        Tensor image_emb = project_f(graph, params, encode_image(graph, params, img));
        Tensor patch_emb = project_g(graph, params, encode_patches(graph, params, jig));
        Tensor nce = nce_loss(graph, image_emb, patch_emb, negatives, loss_cfg);

        Tensor sample_loss = nce;
        if (use_pld) {
          const int ia = clusters.image_assignment[static_cast<size_t>(idx)];
          const int pa = clusters.patch_assignment[static_cast<size_t>(idx)];
          if (ia >= 0 && pa >= 0) {
            std::vector<double> ia_hot(static_cast<size_t>(k), 0.0);
            std::vector<double> pa_hot(static_cast<size_t>(k), 0.0);
            ia_hot[static_cast<size_t>(ia)] = 1.0;
            pa_hot[static_cast<size_t>(pa)] = 1.0;
            Tensor pld = pld_loss(graph, image_emb, patch_emb, clusters.image_model.centers,
                                  clusters.patch_model.centers, ia_hot, pa_hot, loss_cfg);
            ++history.pld_evaluations;
            sample_loss = total_loss(graph, nce, pld, loss_cfg.lambda);
          }
        }
        losses.push_back(sample_loss);
        fresh.push_back({idx, image_emb.values(), patch_emb.values()});
      }

      Tensor batch_loss = graph.mean(graph.concat(losses));
      graph.backward(batch_loss);
      sgd_step(params, lr, cfg.momentum, &sgd_state);
      // Bank refresh strictly after the parameter step, with the embeddings
      // the step was computed from.
      for (const auto& f : fresh) {
        image_bank.update(f.index, f.image);
        patch_bank.update(f.index, f.patch);
      }
      loss_sum += batch_loss.scalar_value() * static_cast<double>(end - start);
    }

    const double mean_loss = loss_sum / static_cast<double>(n);
    history.epochs.push_back({epoch, mean_loss, lr, elapsed_seconds(t0)});
    if (mean_loss < best) {
      best = mean_loss;
      history.best_epoch = epoch;
      best_params = clone_params(params);
    }
  }

  history.stop_reason = "max-epochs";
  history.best_loss = best;
  return PretextResult{std::move(best_params), std::move(image_bank), std::move(patch_bank),
                       std::move(clusters),    clusters_valid,        std::move(history)};
}

// ===== supervised stages =====

namespace {

// Shared loop for fine-tuning and the from-scratch baseline. Takes ownership
// of `params` (callers pass freshly built tensors).
SupervisedResult supervised_train(const TrainConfig& cfg, EncoderParams params,
                                  const LoadedDataset& train) {
  validate_common(cfg);
  const int n = train.size();
  if (n == 0) throw EmptyInputError("supervised training: empty training set");
  for (const ImageSample& img : train.images) {
    if (img.label < 0 || img.label >= cfg.encoder.num_classes)
      throw LabelError("supervised training: sample " + std::to_string(img.sample_index) +
                       " has label " + std::to_string(img.label) + ", expected [0, " +
                       std::to_string(cfg.encoder.num_classes) + ")");
  }

  const Rng root(cfg.seed);
  SgdState sgd_state;
  std::set<std::string> head_only = {"classifier.w", "classifier.b"};
  const std::set<std::string>* only = cfg.freeze_backbone ? &head_only : nullptr;

  TrainHistory history;
  EarlyStop stopper(cfg.stop_min_delta, cfg.stop_patience);
  double best = std::numeric_limits<double>::infinity();
  EncoderParams best_params = clone_params(params);
  history.stop_reason = "max-epochs";

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    const double lr = cfg.lr_at(epoch);
    Rng shuffle_rng = root.child("epoch", static_cast<uint64_t>(epoch)).child("shuffle");
    const std::vector<int> perm = shuffle_rng.shuffled_indices(n);

    double loss_sum = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int end = std::min(n, start + cfg.batch_size);
      Graph graph;
      std::vector<Tensor> losses;
      losses.reserve(static_cast<size_t>(end - start));
      for (int pos = start; pos < end; ++pos) {
        const ImageSample& img = train.images[static_cast<size_t>(perm[static_cast<size_t>(pos)])];
        Tensor logits = classify(graph, params, encode_image(graph, params, img));
        losses.push_back(cross_entropy(graph, logits, img.label));
      }
      Tensor batch_loss = graph.mean(graph.concat(losses));
      graph.backward(batch_loss);
      sgd_step(params, lr, cfg.momentum, &sgd_state, only);
      loss_sum += batch_loss.scalar_value() * static_cast<double>(end - start);
    }

    const double mean_loss = loss_sum / static_cast<double>(n);
    history.epochs.push_back({epoch, mean_loss, lr, elapsed_seconds(t0)});
    if (mean_loss < best) {
      best = mean_loss;
      history.best_epoch = epoch;
      best_params = clone_params(params);
    }
    if (cfg.early_stop && stopper.observe(mean_loss)) {
      history.stop_reason = "early-stop";
      break;
    }
  }

  history.best_loss = best;
  return SupervisedResult{std::move(best_params), std::move(history)};
}

}  // namespace

EncoderParams finetune_start_params(const TrainConfig& cfg, const EncoderParams& pretrained) {
  validate_encoder_config(cfg.encoder);

  // Template carries the expected tensor set for cfg.encoder AND the fresh
  // classifier head for (config, seed) — identical to the baseline's head.
  EncoderParams expected = init_params(cfg.encoder, cfg.seed);
  EncoderParams start;
  start.config = cfg.encoder;
  for (const auto& [name, tmpl] : expected.tensors) {
    if (name == "classifier.w" || name == "classifier.b") {
      start.tensors.emplace(name, Tensor::leaf(tmpl.shape(), tmpl.values(), true, name));
      continue;
    }
    auto it = pretrained.tensors.find(name);
    if (it == pretrained.tensors.end())
      throw CheckpointError("pretrained parameters are missing tensor '" + name + "'");
    if (it->second.shape() != tmpl.shape())
      throw CheckpointError("pretrained tensor '" + name + "' has shape " +
                            shape_str(it->second.shape()) + ", expected " +
                            shape_str(tmpl.shape()));
    start.tensors.emplace(name, Tensor::leaf(it->second.shape(), it->second.values(), true, name));
  }
  for (const auto& [name, t] : pretrained.tensors) {
    if (expected.tensors.count(name) == 0)
      throw CheckpointError("pretrained parameters carry unexpected tensor '" + name + "'");
  }
  return start;
}

SupervisedResult finetune(const TrainConfig& cfg, const EncoderParams& pretrained,
                          const LoadedDataset& train) {
  if (cfg.stage != Stage::finetune) throw ConfigError("finetune: config stage is not finetune");
  return supervised_train(cfg, finetune_start_params(cfg, pretrained), train);
}

SupervisedResult supervised_baseline_train(const TrainConfig& cfg, const LoadedDataset& train) {
  if (cfg.stage != Stage::baseline)
    throw ConfigError("supervised_baseline_train: config stage is not baseline");
  validate_encoder_config(cfg.encoder);
  return supervised_train(cfg, init_params(cfg.encoder, cfg.seed), train);
}

MetricsReport evaluate_classifier(const EncoderParams& params, const LoadedDataset& data) {
  const int n = data.size();
  if (n == 0) throw EmptyInputError("evaluate_classifier: empty dataset");
  const int k = params.config.num_classes;
  Matrix probabilities(n, k);
  std::vector<int> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const ImageSample& img = data.images[static_cast<size_t>(i)];
    if (img.label < 0 || img.label >= k)
      throw LabelError("evaluate_classifier: sample " + std::to_string(i) + " has label " +
                       std::to_string(img.label) + ", expected [0, " + std::to_string(k) + ")");
    Graph graph;
    Tensor probs = graph.softmax(classify(graph, params, encode_image(graph, params, img)));
    const std::vector<double>& v = probs.values();
    for (int j = 0; j < k; ++j) probabilities.at(i, j) = v[static_cast<size_t>(j)];
    labels[static_cast<size_t>(i)] = img.label;
  }
  return evaluate_predictions(probabilities, labels);
}

// ===== checkpoint IO =====

namespace {

constexpr const char* kMetaChannels = "_meta/channels";
constexpr const char* kMetaScalars[] = {
    "_meta/blocks_per_stage", "_meta/cbam",       "_meta/cbam_reduction",
    "_meta/embed_dim",        "_meta/grid",       "_meta/input_size",
    "_meta/input_pool",       "_meta/num_classes"};

std::map<std::string, Tensor> encode_meta(const EncoderConfig& cfg) {
  std::map<std::string, Tensor> out;
  std::vector<double> ch(cfg.channels.begin(), cfg.channels.end());
  const int stages = static_cast<int>(ch.size());
  out.emplace(kMetaChannels, Tensor::leaf({stages}, std::move(ch)));
  const double vals[] = {static_cast<double>(cfg.blocks_per_stage),
                         cfg.cbam ? 1.0 : 0.0,
                         static_cast<double>(cfg.cbam_reduction),
                         static_cast<double>(cfg.embed_dim),
                         static_cast<double>(cfg.grid),
                         static_cast<double>(cfg.input_size),
                         static_cast<double>(cfg.input_pool),
                         static_cast<double>(cfg.num_classes)};
  for (size_t i = 0; i < std::size(kMetaScalars); ++i)
    out.emplace(kMetaScalars[i], Tensor::scalar(vals[i]));
  return out;
}

double meta_scalar(const std::map<std::string, Tensor>& t, const std::string& name) {
  auto it = t.find(name);
  if (it == t.end()) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
  return it->second.scalar_value();
}

EncoderConfig decode_meta(const std::map<std::string, Tensor>& t) {
  auto it = t.find(kMetaChannels);
  if (it == t.end())
    throw CheckpointError("checkpoint is missing tensor '" + std::string(kMetaChannels) + "'");
  EncoderConfig cfg;
  cfg.channels.clear();
  for (double v : it->second.values()) cfg.channels.push_back(static_cast<int>(std::llround(v)));
  cfg.blocks_per_stage = static_cast<int>(std::llround(meta_scalar(t, "_meta/blocks_per_stage")));
  cfg.cbam = meta_scalar(t, "_meta/cbam") != 0.0;
  cfg.cbam_reduction = static_cast<int>(std::llround(meta_scalar(t, "_meta/cbam_reduction")));
  cfg.embed_dim = static_cast<int>(std::llround(meta_scalar(t, "_meta/embed_dim")));
  cfg.grid = static_cast<int>(std::llround(meta_scalar(t, "_meta/grid")));
  cfg.input_size = static_cast<int>(std::llround(meta_scalar(t, "_meta/input_size")));
  cfg.input_pool = static_cast<int>(std::llround(meta_scalar(t, "_meta/input_pool")));
  cfg.num_classes = static_cast<int>(std::llround(meta_scalar(t, "_meta/num_classes")));
  return cfg;
}

Tensor matrix_tensor(const Matrix& m) {
  return Tensor::leaf({m.rows, m.cols}, m.data);
}

Tensor mask_tensor(const std::vector<uint8_t>& mask) {
  std::vector<double> v(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) v[i] = mask[i] ? 1.0 : 0.0;
  return Tensor::leaf({static_cast<int>(mask.size())}, std::move(v));
}

Tensor int_vector_tensor(const std::vector<int>& xs) {
  std::vector<double> v(xs.begin(), xs.end());
  return Tensor::leaf({static_cast<int>(xs.size())}, std::move(v));
}

}  // namespace

void save_encoder_checkpoint(const EncoderParams& params, const std::string& path) {
  std::map<std::string, Tensor> out = encode_meta(params.config);
  for (const auto& [name, t] : params.tensors) out.emplace(name, t);
  save_checkpoint(path, out);
}

void save_pretext_checkpoint(const PretextResult& result, const std::string& path) {
  std::map<std::string, Tensor> out = encode_meta(result.params.config);
  for (const auto& [name, t] : result.params.tensors) out.emplace(name, t);
  out.emplace("_state/bank_momentum", Tensor::scalar(result.image_bank.momentum()));
  out.emplace("_state/image_bank/acc", matrix_tensor(result.image_bank.accumulators()));
  out.emplace("_state/image_bank/mask", mask_tensor(result.image_bank.initialized_mask()));
  out.emplace("_state/patch_bank/acc", matrix_tensor(result.patch_bank.accumulators()));
  out.emplace("_state/patch_bank/mask", mask_tensor(result.patch_bank.initialized_mask()));
  out.emplace("_state/clusters/valid", Tensor::scalar(result.clusters_valid ? 1.0 : 0.0));
  if (result.clusters_valid) {
    out.emplace("_state/clusters/image_centers", matrix_tensor(result.clusters.image_model.centers));
    out.emplace("_state/clusters/patch_centers", matrix_tensor(result.clusters.patch_model.centers));
    out.emplace("_state/clusters/image_assignment",
                int_vector_tensor(result.clusters.image_assignment));
    out.emplace("_state/clusters/patch_assignment",
                int_vector_tensor(result.clusters.patch_assignment));
  }
  save_checkpoint(path, out);
}

EncoderParams load_encoder_checkpoint(const std::string& path) {
  const std::map<std::string, Tensor> stored = load_checkpoint(path);
  const EncoderConfig cfg = decode_meta(stored);
  validate_encoder_config(cfg);

  // Rebuild the canonical tensor set for this architecture; the seed only
  // shapes the template, every value is replaced from the file.
  EncoderParams expected = init_params(cfg, 0);
  EncoderParams out;
  out.config = cfg;
  for (const auto& [name, tmpl] : expected.tensors) {
    auto it = stored.find(name);
    if (it == stored.end()) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape() != tmpl.shape())
      throw CheckpointError("checkpoint tensor '" + name + "' has shape " +
                            shape_str(it->second.shape()) + ", expected " +
                            shape_str(tmpl.shape()));
    out.tensors.emplace(name, Tensor::leaf(it->second.shape(), it->second.values(), true, name));
  }
  return out;
}

}  // namespace pldp
