// Flat key=value run configuration: file parsing, overrides, typed access,
// snapshots, and materialization into the typed config structs.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "pldp/config.hpp"
#include "pldp/error.hpp"

using namespace pldp;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& contents) {
    path = fs::temp_directory_path() /
           ("pldp_cfg_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".txt");
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { fs::remove(path); }
  static int counter;
};
int TempFile::counter = 0;

}  // namespace

TEST_CASE("defaults expose the documented single-machine defaults") {
  const KeyValueConfig cfg = KeyValueConfig::defaults();
  CHECK(cfg.get_u64("seed") == 1);
  CHECK(cfg.get_int_list("encoder.channels") == std::vector<int>{8, 16, 32});
  CHECK(cfg.get_int("encoder.input_size") == 96);
  CHECK(cfg.get_int("encoder.grid") == 3);
  CHECK(cfg.get_double("loss.tau") == 0.4);
  CHECK(cfg.get_double("loss.lambda") == 0.5);
  CHECK(cfg.get_int("loss.negatives") == 64);
  CHECK(cfg.get_int("pretext.epochs") == 200);
  CHECK(cfg.get_int("pretext.clusters") == 3);
  CHECK(cfg.get_double("finetune.lr") == 1e-4);
  CHECK(cfg.get_bool("finetune.early_stop"));
  CHECK_FALSE(cfg.get_bool("finetune.freeze_backbone"));
  CHECK(cfg.get_int("baseline.epochs") == 300);
  CHECK(cfg.get_int("data.per_class") == 250);
  CHECK(cfg.get_double_list("sweep.taus") == std::vector<double>{0.2, 0.4, 0.6});
  CHECK(cfg.get_double_list("sweep.lambdas") == std::vector<double>{0.1, 0.25, 0.5, 1.0});
  CHECK(cfg.get("sweep.seeds").empty());
  CHECK(cfg.get_int("gradcheck.trials") == 100);
}

TEST_CASE("config files support comments, blanks, and spacing around '='") {
  TempFile f(
      "# a comment line\n"
      "\n"
      "loss.tau = 0.25   # trailing comment\n"
      "  encoder.grid=2\n"
      "pretext.epochs =  7\n");
  KeyValueConfig cfg = KeyValueConfig::defaults();
  cfg.load_file(f.path.string());
  CHECK(cfg.get_double("loss.tau") == 0.25);
  CHECK(cfg.get_int("encoder.grid") == 2);
  CHECK(cfg.get_int("pretext.epochs") == 7);
  CHECK(cfg.get_int("pretext.batch") == 32);  // untouched keys keep defaults
}

TEST_CASE("unknown keys and malformed lines are rejected with the offender named") {
  KeyValueConfig cfg = KeyValueConfig::defaults();
  CHECK_THROWS_WITH_AS(cfg.set("nope.key", "1"), doctest::Contains("nope.key"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("justakey"), ConfigError);

  TempFile bad_key("loss.taau = 0.3\n");
  CHECK_THROWS_WITH_AS(cfg.load_file(bad_key.path.string()), doctest::Contains("loss.taau"),
                       ConfigError);
  TempFile bad_line("loss.tau 0.3\n");
  CHECK_THROWS_WITH_AS(cfg.load_file(bad_line.path.string()), doctest::Contains("line 1"),
                       ConfigError);
  CHECK_THROWS_AS(cfg.load_file("/nonexistent/config.txt"), ConfigError);
}

TEST_CASE("typed getters name the key on a syntax error") {
  KeyValueConfig cfg = KeyValueConfig::defaults();
  cfg.set("loss.tau", "abc");
  CHECK_THROWS_WITH_AS(cfg.get_double("loss.tau"), doctest::Contains("loss.tau"), ConfigError);
  cfg.set("pretext.epochs", "7.5");
  CHECK_THROWS_WITH_AS(cfg.get_int("pretext.epochs"), doctest::Contains("pretext.epochs"),
                       ConfigError);
  cfg.set("encoder.cbam", "maybe");
  CHECK_THROWS_WITH_AS(cfg.get_bool("encoder.cbam"), doctest::Contains("encoder.cbam"),
                       ConfigError);
  cfg.set("seed", "-3");
  CHECK_THROWS_AS(cfg.get_u64("seed"), ConfigError);
  CHECK_THROWS_AS(cfg.get("no.such.key"), ConfigError);
}

TEST_CASE("boolean values accept true/false/1/0 only") {
  KeyValueConfig cfg = KeyValueConfig::defaults();
  for (const char* v : {"true", "1"}) {
    cfg.set("encoder.cbam", v);
    CHECK(cfg.get_bool("encoder.cbam"));
  }
  for (const char* v : {"false", "0"}) {
    cfg.set("encoder.cbam", v);
    CHECK_FALSE(cfg.get_bool("encoder.cbam"));
  }
  cfg.set("encoder.cbam", "TRUE");
  CHECK_THROWS_AS(cfg.get_bool("encoder.cbam"), ConfigError);
}

TEST_CASE("snapshot is sorted, round-trips through load_file, and reflects overrides") {
  KeyValueConfig cfg = KeyValueConfig::defaults();
  cfg.apply_override("loss.lambda=0.75");
  cfg.apply_override("encoder.channels = 4,8");
  const std::string snap = cfg.snapshot();

  // Sorted: each line's key is >= the previous line's key.
  std::istringstream lines(snap);
  std::string line, prev;
  int count = 0;
  while (std::getline(lines, line)) {
    const std::string key = line.substr(0, line.find('='));
    CHECK(prev <= key);
    prev = key;
    ++count;
  }
  CHECK(count == static_cast<int>(cfg.entries().size()));

  TempFile f(snap);
  KeyValueConfig reloaded = KeyValueConfig::defaults();
  reloaded.load_file(f.path.string());
  CHECK(reloaded.snapshot() == snap);
  CHECK(reloaded.get_double("loss.lambda") == 0.75);
  CHECK(reloaded.get_int_list("encoder.channels") == std::vector<int>{4, 8});
}

TEST_CASE("config_list_items trims items and maps empty to an empty list") {
  CHECK(config_list_items("") == std::vector<std::string>{});
  CHECK(config_list_items("0.2") == std::vector<std::string>{"0.2"});
  CHECK(config_list_items(" 0.2 , 0.4,0.6 ") == std::vector<std::string>{"0.2", "0.4", "0.6"});
}

TEST_CASE("encoder_from and store_encoder are inverses over the key table") {
  KeyValueConfig cfg = KeyValueConfig::defaults();
  cfg.apply_override("encoder.channels=4,8");
  cfg.apply_override("encoder.embed_dim=16");
  cfg.apply_override("encoder.cbam=true");
  cfg.apply_override("encoder.input_pool=2");
  const EncoderConfig e = encoder_from(cfg);
  CHECK(e.channels == std::vector<int>{4, 8});
  CHECK(e.embed_dim == 16);
  CHECK(e.cbam);
  CHECK(e.input_pool == 2);
  CHECK(e.input_size == 96);

  KeyValueConfig other = KeyValueConfig::defaults();
  store_encoder(other, e);
  const EncoderConfig round = encoder_from(other);
  CHECK(round.channels == e.channels);
  CHECK(round.blocks_per_stage == e.blocks_per_stage);
  CHECK(round.embed_dim == e.embed_dim);
  CHECK(round.cbam == e.cbam);
  CHECK(round.cbam_reduction == e.cbam_reduction);
  CHECK(round.grid == e.grid);
  CHECK(round.input_size == e.input_size);
  CHECK(round.input_pool == e.input_pool);
  CHECK(round.num_classes == e.num_classes);
}

TEST_CASE("synth_from validates the 3-class shape of the density lists") {
  KeyValueConfig cfg = KeyValueConfig::defaults();
  cfg.set("seed", "42");
  const SynthConfig s = synth_from(cfg);
  CHECK(s.per_class == 250);
  CHECK(s.image_size == 96);
  CHECK(s.seed == 42);
  CHECK(s.line_density == std::array<double, 3>{5.0, 8.0, 11.0});

  cfg.set("data.line_density", "5,8");
  CHECK_THROWS_WITH_AS(synth_from(cfg), doctest::Contains("data.line_density"), ConfigError);
  cfg.set("data.line_density", "5,8,11");
  cfg.set("data.blob_intensity", "0.2,0.3,0.4,0.5");
  CHECK_THROWS_WITH_AS(synth_from(cfg), doctest::Contains("data.blob_intensity"), ConfigError);
}

TEST_CASE("train_from reads the section matching the stage") {
  KeyValueConfig cfg = KeyValueConfig::defaults();
  cfg.apply_override("seed=9");
  cfg.apply_override("pretext.lr=0.002");
  cfg.apply_override("pretext.clusters=5");
  cfg.apply_override("finetune.lr=0.0005");
  cfg.apply_override("finetune.freeze_backbone=true");
  cfg.apply_override("baseline.patience=11");
  cfg.apply_override("loss.lambda=0.25");

  const TrainConfig p = train_from(cfg, Stage::pretext);
  CHECK(p.stage == Stage::pretext);
  CHECK(p.lr == 0.002);
  CHECK(p.clusters == 5);
  CHECK(p.max_epochs == 200);
  CHECK(p.seed == 9);
  CHECK(p.loss.lambda == 0.25);
  CHECK_FALSE(p.early_stop);
  CHECK_FALSE(p.freeze_backbone);

  const TrainConfig f = train_from(cfg, Stage::finetune);
  CHECK(f.stage == Stage::finetune);
  CHECK(f.lr == 0.0005);
  CHECK(f.freeze_backbone);
  CHECK(f.early_stop);
  CHECK(f.stop_patience == 20);
  CHECK(f.lr_decay_factor == 0.9);
  CHECK(f.lr_decay_every == 30);

  const TrainConfig b = train_from(cfg, Stage::baseline);
  CHECK(b.stage == Stage::baseline);
  CHECK(b.stop_patience == 11);
  CHECK_FALSE(b.freeze_backbone);
  CHECK(b.lr == 1e-4);
}
