#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pldp/dataset.hpp"
#include "pldp/encoder.hpp"
#include "pldp/losses.hpp"
#include "pldp/trainer.hpp"

namespace pldp {

// Flat key=value run configuration. The key set is fixed: every knob has a
// default, files and overrides may only change known keys. Precedence is
// defaults < config file < explicit overrides, applied in that order.
class KeyValueConfig {
 public:
  // The full default table (single-machine scale).
  static KeyValueConfig defaults();

  // Parses a config file: one `key = value` per line, `#` starts a comment,
  // blank lines ignored. Unknown keys or malformed lines raise ConfigError
  // naming the offending line.
  void load_file(const std::string& path);

  // Applies one `key=value` override string (the --set form).
  void apply_override(const std::string& assignment);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;

  // Typed accessors; all raise ConfigError naming the key on bad syntax.
  int get_int(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;      // comma-separated
  std::vector<double> get_double_list(const std::string& key) const;

  // Sorted `key=value` lines; the file is itself a loadable config.
  std::string snapshot() const;
  void save_snapshot(const std::string& path) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Splits a comma-separated config value into trimmed items ("" -> empty).
std::vector<std::string> config_list_items(const std::string& value);

// Materialize typed configs from the key table.
EncoderConfig encoder_from(const KeyValueConfig& cfg);

// Writes an architecture back into the encoder.* keys, so a snapshot taken
// after loading a checkpoint records the shapes actually used.
void store_encoder(KeyValueConfig& cfg, const EncoderConfig& e);
SynthConfig synth_from(const KeyValueConfig& cfg);
LossConfig loss_from(const KeyValueConfig& cfg);

// Stage-scoped training config: reads the pretext.* / finetune.* /
// baseline.* section plus the shared loss.*, encoder.* and seed keys.
TrainConfig train_from(const KeyValueConfig& cfg, Stage stage);

}  // namespace pldp
