#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pldp/dataset.hpp"
#include "pldp/encoder.hpp"
#include "pldp/kmeans.hpp"
#include "pldp/losses.hpp"
#include "pldp/memory_bank.hpp"
#include "pldp/metrics.hpp"

namespace pldp {

enum class Stage { pretext, finetune, baseline };

struct TrainConfig {
  Stage stage = Stage::pretext;
  double lr = 1e-3;
  int batch_size = 32;
  int max_epochs = 3000;
  double lr_decay_factor = 1.0;  // multiplicative decay
  int lr_decay_every = 0;        // epochs between decays; 0 disables
  bool early_stop = false;
  double stop_min_delta = 1e-6;
  int stop_patience = 20;
  double momentum = 0.0;  // SGD momentum knob; plain SGD by default
  uint64_t seed = 1;
  LossConfig loss;          // dataset_size is filled in from the data
  EncoderConfig encoder;
  double bank_momentum = 0.5;
  int clusters = 3;
  bool freeze_backbone = false;  // diagnostic linear-probe mode

  // Learning rate in effect at a (0-based) epoch.
  double lr_at(int epoch) const;
};

// Stage presets. The pretext preset keeps the reference settings
// (lr 1e-3, batch 32, 3000 epochs); small-scale runs override max_epochs.
TrainConfig pretext_defaults();
// lr 1e-4, decay 0.9 every 30 epochs, batch 32, early stop 1e-6 / 20.
TrainConfig finetune_defaults();
TrainConfig baseline_defaults();

struct EpochRecord {
  int epoch = 0;  // 0-based
  double loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;  // wall time, excluded from determinism guarantees
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::string stop_reason;  // "max-epochs" or "early-stop"
  int best_epoch = -1;
  double best_loss = 0.0;
  uint64_t pld_evaluations = 0;  // pretext only
  void save_csv(const std::string& path) const;   // epoch,loss,lr,seconds
  void save_json(const std::string& path) const;
};

// Stops when `patience` consecutive observations fail to improve on the
// best seen loss by at least `min_delta`.
class EarlyStop {
 public:
  EarlyStop(double min_delta, int patience);
  // Returns true when training should stop after this observation.
  bool observe(double loss);
  double best() const { return best_; }
  int stale_epochs() const { return stale_; }

 private:
  double min_delta_;
  int patience_;
  double best_;
  int stale_ = 0;
  bool has_best_ = false;
};

// Plain SGD over every grad-carrying parameter: p <- p - lr * g (with the
// optional momentum buffer: v <- m*v + g, p <- p - lr*v). Consumes and
// zeroes the accumulated gradients. Parameters without gradients are left
// alone; non-finite gradients abort with a diagnostic naming the tensor.
// `only` restricts the update to the named tensors.
struct SgdState {
  std::map<std::string, std::vector<double>> velocity;
};
void sgd_step(EncoderParams& params, double lr, double momentum = 0.0, SgdState* state = nullptr,
              const std::set<std::string>* only = nullptr);

// In-memory split with bank indexing: sample_index = position in `images`.
struct LoadedDataset {
  std::vector<ImageSample> images;
  int size() const { return static_cast<int>(images.size()); }
};
LoadedDataset load_split_images(const DatasetManifest& manifest, Split split);

struct PretextResult {
  EncoderParams params;   // best-loss epoch parameters
  MemoryBank image_bank;  // end-of-training bank state
  MemoryBank patch_bank;
  BankClusters clusters;  // last refresh (empty centers if never refreshed)
  bool clusters_valid = false;
  TrainHistory history;
};

// Self-supervised stage: per epoch, refresh clusters (once both banks hold
// >= 10*k initialized entries and lambda > 0), then for every shuffled
// mini-batch build the joint loss over both paths with bank negatives,
// take one SGD step, and EMA-update both banks with the batch's
// forward-time embeddings. Labels are ignored.
PretextResult pretext_train(const TrainConfig& cfg, const LoadedDataset& train);

struct SupervisedResult {
  EncoderParams params;  // best-loss epoch parameters
  TrainHistory history;
};

// Supervised stage on cross-entropy over the classifier logits. Fine-tuning
// starts from pretrained parameters with a freshly initialized classifier
// head; the baseline trains the same architecture from scratch. Both use
// the same head initialization for a given (config, seed).
//
// finetune_start_params builds that starting point: deep copies of the
// pretrained backbone tensors plus a fresh classifier head drawn exactly as
// init_params(cfg.encoder, cfg.seed) would draw it. Missing, extra, or
// wrongly shaped pretrained tensors abort with a diagnostic naming the
// tensor.
EncoderParams finetune_start_params(const TrainConfig& cfg, const EncoderParams& pretrained);
SupervisedResult finetune(const TrainConfig& cfg, const EncoderParams& pretrained,
                          const LoadedDataset& train);
SupervisedResult supervised_baseline_train(const TrainConfig& cfg, const LoadedDataset& train);

// Softmax-probability evaluation of a trained classifier.
MetricsReport evaluate_classifier(const EncoderParams& params, const LoadedDataset& data);

// Checkpoint IO. Encoder checkpoints carry the parameters plus enough
// metadata to rebuild the EncoderConfig; pretext checkpoints add the final
// bank accumulators/masks and cluster state.
void save_encoder_checkpoint(const EncoderParams& params, const std::string& path);
void save_pretext_checkpoint(const PretextResult& result, const std::string& path);
EncoderParams load_encoder_checkpoint(const std::string& path);

}  // namespace pldp
