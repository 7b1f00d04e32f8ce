#include <cctype>
#include <fstream>
#include <sstream>

#include "pldp/config.hpp"
#include "pldp/error.hpp"

namespace pldp {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(trim(cur));
  if (parts.size() == 1 && parts[0].empty()) parts.clear();
  return parts;
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + s + "'");
  }
}

int64_t parse_integer(const std::string& key, const std::string& s) {
  try {
    size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + s + "'");
  }
}

}  // namespace

KeyValueConfig KeyValueConfig::defaults() {
  KeyValueConfig cfg;
  auto& v = cfg.values_;
  v["seed"] = "1";

  v["encoder.channels"] = "8,16,32";
  v["encoder.blocks"] = "1";
  v["encoder.embed_dim"] = "64";
  v["encoder.cbam"] = "false";
  v["encoder.cbam_reduction"] = "4";
  v["encoder.grid"] = "3";
  v["encoder.input_size"] = "96";
  v["encoder.input_pool"] = "1";
  v["encoder.classes"] = "3";

  v["loss.tau"] = "0.4";
  v["loss.lambda"] = "0.5";
  v["loss.negatives"] = "64";

  v["pretext.lr"] = "0.001";
  v["pretext.batch"] = "32";
  v["pretext.epochs"] = "200";
  v["pretext.momentum"] = "0";
  v["pretext.bank_momentum"] = "0.5";
  v["pretext.clusters"] = "3";

  v["finetune.lr"] = "0.0001";
  v["finetune.batch"] = "32";
  v["finetune.epochs"] = "300";
  v["finetune.decay"] = "0.9";
  v["finetune.decay_every"] = "30";
  v["finetune.early_stop"] = "true";
  v["finetune.min_delta"] = "1e-06";
  v["finetune.patience"] = "20";
  v["finetune.momentum"] = "0";
  v["finetune.freeze_backbone"] = "false";

  v["baseline.lr"] = "0.0001";
  v["baseline.batch"] = "32";
  v["baseline.epochs"] = "300";
  v["baseline.decay"] = "0.9";
  v["baseline.decay_every"] = "30";
  v["baseline.early_stop"] = "true";
  v["baseline.min_delta"] = "1e-06";
  v["baseline.patience"] = "20";
  v["baseline.momentum"] = "0";

  v["data.per_class"] = "250";
  v["data.size"] = "96";
  v["data.line_density"] = "5,8,11";
  v["data.blob_intensity"] = "0.22,0.33,0.44";
  v["data.blob_count"] = "4";
  v["data.noise_std"] = "0.04";

  v["sweep.taus"] = "0.2,0.4,0.6";
  v["sweep.lambdas"] = "0.1,0.25,0.5,1.0";
  v["sweep.seeds"] = "";  // empty = use the top-level seed

  v["gradcheck.trials"] = "100";
  return cfg;
}

void KeyValueConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config file '" + path + "' line " + std::to_string(lineno) +
                        ": expected key=value, got '" + stripped + "'");
    set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

void KeyValueConfig::apply_override(const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "': expected key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

int KeyValueConfig::get_int(const std::string& key) const {
  return static_cast<int>(parse_integer(key, get(key)));
}

uint64_t KeyValueConfig::get_u64(const std::string& key) const {
  const int64_t v = parse_integer(key, get(key));
  if (v < 0) throw ConfigError("config key '" + key + "': expected a non-negative integer");
  return static_cast<uint64_t>(v);
}

double KeyValueConfig::get_double(const std::string& key) const {
  return parse_double(key, get(key));
}

bool KeyValueConfig::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + s + "'");
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const std::string& p : split_commas(get(key)))
    out.push_back(static_cast<int>(parse_integer(key, p)));
  return out;
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& p : split_commas(get(key))) out.push_back(parse_double(key, p));
  return out;
}

std::string KeyValueConfig::snapshot() const {
  std::ostringstream out;  // std::map iterates in key order
  for (const auto& [k, v] : values_) out << k << "=" << v << "\n";
  return out.str();
}

void KeyValueConfig::save_snapshot(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config snapshot '" + path + "'");
  out << snapshot();
}

std::vector<std::string> config_list_items(const std::string& value) {
  return split_commas(value);
}

EncoderConfig encoder_from(const KeyValueConfig& cfg) {
  EncoderConfig e;
  e.channels = cfg.get_int_list("encoder.channels");
  e.blocks_per_stage = cfg.get_int("encoder.blocks");
  e.embed_dim = cfg.get_int("encoder.embed_dim");
  e.cbam = cfg.get_bool("encoder.cbam");
  e.cbam_reduction = cfg.get_int("encoder.cbam_reduction");
  e.grid = cfg.get_int("encoder.grid");
  e.input_size = cfg.get_int("encoder.input_size");
  e.input_pool = cfg.get_int("encoder.input_pool");
  e.num_classes = cfg.get_int("encoder.classes");
  return e;
}

void store_encoder(KeyValueConfig& cfg, const EncoderConfig& e) {
  std::ostringstream ch;
  for (size_t i = 0; i < e.channels.size(); ++i) {
    if (i > 0) ch << ",";
    ch << e.channels[i];
  }
  cfg.set("encoder.channels", ch.str());
  cfg.set("encoder.blocks", std::to_string(e.blocks_per_stage));
  cfg.set("encoder.embed_dim", std::to_string(e.embed_dim));
  cfg.set("encoder.cbam", e.cbam ? "true" : "false");
  cfg.set("encoder.cbam_reduction", std::to_string(e.cbam_reduction));
  cfg.set("encoder.grid", std::to_string(e.grid));
  cfg.set("encoder.input_size", std::to_string(e.input_size));
  cfg.set("encoder.input_pool", std::to_string(e.input_pool));
  cfg.set("encoder.classes", std::to_string(e.num_classes));
}

SynthConfig synth_from(const KeyValueConfig& cfg) {
  SynthConfig s;
  s.per_class = cfg.get_int("data.per_class");
  s.image_size = cfg.get_int("data.size");
  const auto density = cfg.get_double_list("data.line_density");
  const auto intensity = cfg.get_double_list("data.blob_intensity");
  if (density.size() != 3)
    throw ConfigError("config key 'data.line_density': expected 3 values, got " +
                      std::to_string(density.size()));
  if (intensity.size() != 3)
    throw ConfigError("config key 'data.blob_intensity': expected 3 values, got " +
                      std::to_string(intensity.size()));
  for (int i = 0; i < 3; ++i) {
    s.line_density[static_cast<size_t>(i)] = density[static_cast<size_t>(i)];
    s.blob_intensity[static_cast<size_t>(i)] = intensity[static_cast<size_t>(i)];
  }
  s.blob_count_mean = cfg.get_double("data.blob_count");
  s.noise_std = cfg.get_double("data.noise_std");
  s.seed = cfg.get_u64("seed");
  return s;
}

LossConfig loss_from(const KeyValueConfig& cfg) {
  LossConfig l;
  l.tau = cfg.get_double("loss.tau");
  l.lambda = cfg.get_double("loss.lambda");
  l.negative_count = cfg.get_int("loss.negatives");
  return l;  // dataset_size is bound to the split by the trainer
}

TrainConfig train_from(const KeyValueConfig& cfg, Stage stage) {
  TrainConfig t;
  t.stage = stage;
  t.seed = cfg.get_u64("seed");
  t.loss = loss_from(cfg);
  t.encoder = encoder_from(cfg);
  if (stage == Stage::pretext) {
    t.lr = cfg.get_double("pretext.lr");
    t.batch_size = cfg.get_int("pretext.batch");
    t.max_epochs = cfg.get_int("pretext.epochs");
    t.momentum = cfg.get_double("pretext.momentum");
    t.bank_momentum = cfg.get_double("pretext.bank_momentum");
    t.clusters = cfg.get_int("pretext.clusters");
    return t;
  }
  const std::string p = stage == Stage::finetune ? "finetune." : "baseline.";
  t.lr = cfg.get_double(p + "lr");
  t.batch_size = cfg.get_int(p + "batch");
  t.max_epochs = cfg.get_int(p + "epochs");
  t.lr_decay_factor = cfg.get_double(p + "decay");
  t.lr_decay_every = cfg.get_int(p + "decay_every");
  t.early_stop = cfg.get_bool(p + "early_stop");
  t.stop_min_delta = cfg.get_double(p + "min_delta");
  t.stop_patience = cfg.get_int(p + "patience");
  t.momentum = cfg.get_double(p + "momentum");
  if (stage == Stage::finetune) t.freeze_backbone = cfg.get_bool("finetune.freeze_backbone");
  return t;
}

}  // namespace pldp
