// pldp — one binary for the whole workflow: synthetic data generation,
// self-supervised pretraining, fine-tuning, supervised baselines,
// evaluation, the tau x lambda ablation sweep, and the gradient self-check.
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "pldp/config.hpp"
#include "pldp/dataset.hpp"
#include "pldp/error.hpp"
#include "pldp/gradcheck.hpp"
#include "pldp/metrics.hpp"
#include "pldp/trainer.hpp"

namespace fs = std::filesystem;
using namespace pldp;

namespace {

constexpr double kGradTolerance = 1e-4;

// Options shared by every subcommand.
struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", args.overrides, "override one config key (key=value, repeatable)");
  cmd->add_option("--out", args.out_dir, "output directory for artifacts")->required();
  cmd->add_option("--seed", args.seed, "seed override (wins over config and --set)")
      ->trigger_on_parse()
      ->each([&args](const std::string&) { args.seed_given = true; });
}

// Defaults, then config file, then --set in order, then the --seed flag.
KeyValueConfig resolve_config(const CommonArgs& args) {
  KeyValueConfig cfg = KeyValueConfig::defaults();
  if (!args.config_path.empty()) cfg.load_file(args.config_path);
  for (const std::string& kv : args.overrides) cfg.apply_override(kv);
  if (args.seed_given) cfg.set("seed", std::to_string(args.seed));
  return cfg;
}

// Output directory plus the ledger of everything written into it.
class RunDir {
 public:
  explicit RunDir(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  }

  // Registers a relative artifact path and returns where to write it.
  std::string file(const std::string& rel) {
    listed_.push_back(rel);
    return (dir_ / rel).string();
  }

  // Registers a path some library call already wrote.
  void note(const std::string& rel) { listed_.push_back(rel); }

  const fs::path& dir() const { return dir_; }

  void write_run_manifest() {
    listed_.push_back("run_manifest.txt");
    std::ofstream out(dir_ / "run_manifest.txt");
    if (!out) throw IoError("cannot write run manifest in '" + dir_.string() + "'");
    for (const std::string& rel : listed_) out << rel << "\n";
  }

 private:
  fs::path dir_;
  std::vector<std::string> listed_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_history(const std::string& label, const TrainHistory& h) {
  std::cout << label << ": " << h.epochs.size() << " epochs (" << h.stop_reason
            << "), best loss " << h.best_loss << " at epoch " << h.best_epoch << "\n";
}

void save_history(RunDir& run, const TrainHistory& h) {
  h.save_csv(run.file("history.csv"));
  h.save_json(run.file("history.json"));
}

uint64_t parse_seed_token(const std::string& token) {
  try {
    size_t pos = 0;
    const unsigned long long v = std::stoull(token, &pos);
    if (pos != token.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key 'sweep.seeds': expected an integer, got '" + token + "'");
  }
}

// ----- subcommand bodies -----

int run_gen_data(const CommonArgs& args) {
  const KeyValueConfig cfg = resolve_config(args);
  RunDir run(args.out_dir);
  cfg.save_snapshot(run.file("resolved_config.txt"));

  const SynthConfig sc = synth_from(cfg);
  GenReport report;
  const DatasetManifest manifest = generate_synthetic(sc, run.dir().string(), &report);
  run.note("manifest.csv");
  run.note("gen_report.json");
  for (const ManifestEntry& e : manifest.entries) run.note(e.path);
  run.write_run_manifest();

  std::cout << "gen-data: " << manifest.entries.size() << " images under " << args.out_dir
            << "; probe accuracy train " << report.probe_train_accuracy << "%, test "
            << report.probe_test_accuracy << "%\n";
  return 0;
}

int run_pretrain(const CommonArgs& args, const std::string& data_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const KeyValueConfig cfg = resolve_config(args);
  RunDir run(args.out_dir);
  cfg.save_snapshot(run.file("resolved_config.txt"));

  const DatasetManifest manifest = load_manifest(data_path);
  const LoadedDataset train = load_split_images(manifest, Split::train);
  const TrainConfig tc = train_from(cfg, Stage::pretext);
  std::cout << "pretrain: " << train.size() << " train images, tau " << tc.loss.tau
            << ", lambda " << tc.loss.lambda << ", " << tc.max_epochs << " epochs\n";

  const PretextResult result = pretext_train(tc, train);
  save_pretext_checkpoint(result, run.file("checkpoint.bin"));
  save_history(run, result.history);
  run.write_run_manifest();

  print_history("pretrain", result.history);
  std::cout << "pretrain: group-term sample evaluations " << result.history.pld_evaluations
            << ", wall time " << std::fixed << std::setprecision(1) << seconds_since(t0)
            << "s\n";
  return 0;
}

int run_finetune(const CommonArgs& args, const std::string& data_path,
                 const std::string& checkpoint_path) {
  const EncoderParams pretrained = load_encoder_checkpoint(checkpoint_path);
  KeyValueConfig cfg = resolve_config(args);
  store_encoder(cfg, pretrained.config);  // architecture comes from the checkpoint
  RunDir run(args.out_dir);
  cfg.save_snapshot(run.file("resolved_config.txt"));

  const DatasetManifest manifest = load_manifest(data_path);
  const LoadedDataset train = load_split_images(manifest, Split::train);
  const TrainConfig tc = train_from(cfg, Stage::finetune);
  std::cout << "finetune: " << train.size() << " train images from " << checkpoint_path << "\n";

  const SupervisedResult result = finetune(tc, pretrained, train);
  save_encoder_checkpoint(result.params, run.file("checkpoint.bin"));
  save_history(run, result.history);
  run.write_run_manifest();

  print_history("finetune", result.history);
  return 0;
}

int run_train_baseline(const CommonArgs& args, const std::string& data_path) {
  const KeyValueConfig cfg = resolve_config(args);
  RunDir run(args.out_dir);
  cfg.save_snapshot(run.file("resolved_config.txt"));

  const DatasetManifest manifest = load_manifest(data_path);
  const LoadedDataset train = load_split_images(manifest, Split::train);
  const TrainConfig tc = train_from(cfg, Stage::baseline);
  std::cout << "train-baseline: " << train.size() << " train images\n";

  const SupervisedResult result = supervised_baseline_train(tc, train);
  save_encoder_checkpoint(result.params, run.file("checkpoint.bin"));
  save_history(run, result.history);
  run.write_run_manifest();

  print_history("train-baseline", result.history);
  return 0;
}

int run_evaluate(const CommonArgs& args, const std::string& data_path,
                 const std::string& checkpoint_path, const std::string& split_name_arg) {
  const EncoderParams params = load_encoder_checkpoint(checkpoint_path);
  KeyValueConfig cfg = resolve_config(args);
  store_encoder(cfg, params.config);
  RunDir run(args.out_dir);
  cfg.save_snapshot(run.file("resolved_config.txt"));

  const DatasetManifest manifest = load_manifest(data_path);
  const LoadedDataset data = load_split_images(manifest, split_from_name(split_name_arg));
  const MetricsReport report = evaluate_classifier(params, data);
  write_text(run.file("metrics.json"), report.to_json());
  run.write_run_manifest();

  std::cout << "evaluate (" << split_name_arg << ", " << data.size() << " images): top1 "
            << report.top1 << "%, top2 " << report.top2 << "%, macro F1 " << report.f1_macro
            << "%\n";
  return 0;
}

struct SweepCell {
  std::string tau;  // original config tokens, copied verbatim into the cell config
  std::string lambda;
  uint64_t seed = 0;
};

int run_sweep(const CommonArgs& args, const std::string& data_path, int parallel) {
  const auto t0 = std::chrono::steady_clock::now();
  const KeyValueConfig cfg = resolve_config(args);
  RunDir run(args.out_dir);
  cfg.save_snapshot(run.file("resolved_config.txt"));

  const std::vector<std::string> taus = config_list_items(cfg.get("sweep.taus"));
  const std::vector<std::string> lambdas = config_list_items(cfg.get("sweep.lambdas"));
  cfg.get_double_list("sweep.taus");     // syntax check before any training
  cfg.get_double_list("sweep.lambdas");
  if (taus.empty() || lambdas.empty())
    throw ConfigError("sweep needs at least one tau and one lambda");
  std::vector<uint64_t> seeds;
  for (const std::string& tok : config_list_items(cfg.get("sweep.seeds")))
    seeds.push_back(parse_seed_token(tok));
  if (seeds.empty()) seeds.push_back(cfg.get_u64("seed"));

  std::vector<SweepCell> cells;
  for (const uint64_t seed : seeds)
    for (const std::string& tau : taus)
      for (const std::string& lambda : lambdas) cells.push_back({tau, lambda, seed});

  const DatasetManifest manifest = load_manifest(data_path);
  const LoadedDataset train = load_split_images(manifest, Split::train);
  const LoadedDataset test = load_split_images(manifest, Split::test);
  std::cout << "sweep: " << cells.size() << " cells (" << taus.size() << " tau x "
            << lambdas.size() << " lambda x " << seeds.size() << " seed), " << train.size()
            << " train / " << test.size() << " test images\n";

  std::vector<std::string> rows(cells.size());
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::mutex print_mutex;

  const auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error) return;  // stop picking up work after a failure
      }
      try {
        const SweepCell& cell = cells[i];
        KeyValueConfig local = cfg;
        local.set("loss.tau", cell.tau);
        local.set("loss.lambda", cell.lambda);
        local.set("seed", std::to_string(cell.seed));

        const PretextResult pre = pretext_train(train_from(local, Stage::pretext), train);
        const SupervisedResult fine =
            finetune(train_from(local, Stage::finetune), pre.params, train);
        const MetricsReport report = evaluate_classifier(fine.params, test);

        std::ostringstream row;
        row << std::setprecision(17) << cell.tau << "," << cell.lambda << "," << cell.seed << ","
            << report.top1 << "," << report.top2 << "," << report.f1_macro << ","
            << report.sensitivity_macro << "," << report.specificity_macro;
        rows[i] = row.str();
        {
          std::lock_guard<std::mutex> lock(print_mutex);
          std::cout << "sweep cell tau=" << cell.tau << " lambda=" << cell.lambda
                    << " seed=" << cell.seed << ": top1 " << report.top1 << "%\n";
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const size_t n_threads =
      std::min<size_t>(static_cast<size_t>(parallel < 1 ? 1 : parallel), cells.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::ostringstream csv;
  csv << "tau,lambda,seed,top1,top2,f1_macro,sensitivity_macro,specificity_macro\n";
  for (const std::string& row : rows) csv << row << "\n";
  write_text(run.file("sweep.csv"), csv.str());
  run.write_run_manifest();

  std::cout << "sweep: wrote " << rows.size() << " rows in " << std::fixed
            << std::setprecision(1) << seconds_since(t0) << "s\n";
  return 0;
}

int run_gradcheck(const CommonArgs& args) {
  const KeyValueConfig cfg = resolve_config(args);
  RunDir run(args.out_dir);
  cfg.save_snapshot(run.file("resolved_config.txt"));

  const int trials = cfg.get_int("gradcheck.trials");
  const uint64_t seed = cfg.get_u64("seed");
  const std::vector<GradCheckCase> suite = build_gradcheck_suite(trials, seed);

  std::ostringstream csv;
  csv << "case,max_rel_err\n";
  int failures = 0;
  for (const GradCheckCase& c : suite) {
    const double err = c.run();
    const bool ok = err < kGradTolerance;
    if (!ok) ++failures;
    csv << c.name << "," << std::setprecision(17) << err << "\n";
    std::cout << (ok ? "pass" : "FAIL") << "  " << std::left << std::setw(28) << c.name
              << std::scientific << std::setprecision(3) << err << "\n"
              << std::defaultfloat;
  }
  write_text(run.file("gradcheck.csv"), csv.str());
  run.write_run_manifest();

  std::cout << "gradcheck: " << (suite.size() - static_cast<size_t>(failures)) << "/"
            << suite.size() << " cases within " << kGradTolerance << " over " << trials
            << " trials\n";
  if (failures > 0) {
    std::cerr << "error: " << failures << " gradient case(s) exceeded " << kGradTolerance
              << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Patch-level self-supervised representation learning: jigsaw-invariant "
      "contrastive pretraining with memory-bank negatives and k-means group "
      "discrimination, plus the supervised pipeline around it."};
  app.require_subcommand(1);

  CommonArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic ordinal-texture dataset");
  add_common(gen, gen_args);

  CommonArgs pre_args;
  std::string pre_data;
  CLI::App* pre = app.add_subcommand("pretrain", "self-supervised pretraining on unlabeled images");
  add_common(pre, pre_args);
  pre->add_option("--data", pre_data, "dataset manifest.csv")->required()->check(CLI::ExistingFile);

  CommonArgs fine_args;
  std::string fine_data, fine_checkpoint;
  CLI::App* fine = app.add_subcommand("finetune", "supervised training from a pretrained checkpoint");
  add_common(fine, fine_args);
  fine->add_option("--data", fine_data, "dataset manifest.csv")->required()->check(CLI::ExistingFile);
  fine->add_option("--checkpoint", fine_checkpoint, "pretrained checkpoint to start from")
      ->required()
      ->check(CLI::ExistingFile);

  CommonArgs base_args;
  std::string base_data;
  CLI::App* base = app.add_subcommand("train-baseline", "supervised training from random init");
  add_common(base, base_args);
  base->add_option("--data", base_data, "dataset manifest.csv")->required()->check(CLI::ExistingFile);

  CommonArgs eval_args;
  std::string eval_data, eval_checkpoint, eval_split = "test";
  CLI::App* eval = app.add_subcommand("evaluate", "score a checkpoint on one dataset split");
  add_common(eval, eval_args);
  eval->add_option("--data", eval_data, "dataset manifest.csv")->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", eval_checkpoint, "trained classifier checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--split", eval_split, "split to score (default test)")
      ->check(CLI::IsMember({"train", "val", "test"}));

  CommonArgs sweep_args;
  std::string sweep_data;
  int sweep_parallel = 1;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "tau x lambda grid of pretrain + finetune + evaluate, one sweep.csv row per cell");
  add_common(sweep, sweep_args);
  sweep->add_option("--data", sweep_data, "dataset manifest.csv")->required()->check(CLI::ExistingFile);
  sweep->add_option("--parallel", sweep_parallel, "run up to N grid cells concurrently")
      ->check(CLI::PositiveNumber);

  CommonArgs grad_args;
  CLI::App* grad = app.add_subcommand(
      "gradcheck", "compare every analytic gradient against finite differences");
  add_common(grad, grad_args);

  try {
    app.parse(argc, argv);
    if (*gen) return run_gen_data(gen_args);
    if (*pre) return run_pretrain(pre_args, pre_data);
    if (*fine) return run_finetune(fine_args, fine_data, fine_checkpoint);
    if (*base) return run_train_baseline(base_args, base_data);
    if (*eval) return run_evaluate(eval_args, eval_data, eval_checkpoint, eval_split);
    if (*sweep) return run_sweep(sweep_args, sweep_data, sweep_parallel);
    if (*grad) return run_gradcheck(grad_args);
    std::cerr << app.help() << "\n";
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
