#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pldp/image.hpp"
#include "pldp/rng.hpp"

namespace pldp {

// Knobs of the synthetic 3-class texture dataset. Classes encode ordinal
// severity: strictly increasing stroke density and blob intensity.
struct SynthConfig {
  int per_class = 250;
  int image_size = 96;
  std::array<double, 3> line_density = {5.0, 8.0, 11.0};     // mean strokes per image
  std::array<double, 3> blob_intensity = {0.22, 0.33, 0.44}; // mean blob amplitude
  double blob_count_mean = 4.0;
  double noise_std = 0.04;
  uint64_t seed = 1;
};

void validate_synth_config(const SynthConfig& cfg);

enum class Split { train, val, test };
std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  int label = -1;
  Split split = Split::train;
};

struct DatasetManifest {
  std::string root;  // directory the relative paths resolve against
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> of_split(Split s) const;
  std::string resolve(const ManifestEntry& e) const;  // absolute-ish path for IO
};

// Written beside the generated data as gen_report.json.
struct GenReport {
  std::array<double, 3> mean_strokes = {0.0, 0.0, 0.0};
  std::array<double, 3> mean_blob_amplitude = {0.0, 0.0, 0.0};
  double probe_train_accuracy = 0.0;
  double probe_test_accuracy = 0.0;
  int n_images = 0;
  std::string to_json() const;
};

// Renders one synthetic sample: warm multi-octave value-noise base, dark
// curvilinear strokes (count ~ Poisson of the class density), bright soft
// blobs (amplitude ~ Normal around the class mean), Gaussian pixel noise,
// clipped to [0,1]. Outputs the stroke count and mean blob amplitude drawn.
ImageSample render_synthetic_image(const SynthConfig& cfg, int label, Rng rng, int* strokes_out,
                                   double* blob_amp_out);

// Generates the full dataset under root_dir: PPM files, manifest.csv
// (header path,label,split; stratified 80/10/10 per class), and
// gen_report.json including the linear-probe sanity accuracies. Fully
// determined by cfg.seed.
DatasetManifest generate_synthetic(const SynthConfig& cfg, const std::string& root_dir,
                                   GenReport* report_out = nullptr);

DatasetManifest load_manifest(const std::string& csv_path);
void save_manifest(const DatasetManifest& manifest, const std::string& csv_path);

// Pixel-histogram multinomial-logistic probe: 8 bins per channel,
// standardized on the training split, full-batch gradient descent with
// deterministic zero init. Returns percent accuracies. Serves as the
// "nontrivial but learnable" check on generated data; deliberately
// independent of the autodiff stack.
struct ProbeResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};
ProbeResult histogram_probe(const DatasetManifest& manifest);

}  // namespace pldp
