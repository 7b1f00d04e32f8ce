#include "pldp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pldp/error.hpp"

namespace fs = std::filesystem;

namespace pldp {

namespace {

// Multi-octave value noise in [0,1]: bilinearly interpolated random
// lattices at doubling frequencies with halving weights.
std::vector<double> value_noise(int size, Rng& rng) {
  std::vector<double> out(static_cast<size_t>(size) * size, 0.0);
  double total_w = 0.0;
  double w = 1.0;
  for (int grid : {4, 8, 16, 32}) {
    std::vector<double> lattice(static_cast<size_t>(grid + 1) * (grid + 1));
    for (double& v : lattice) v = rng.uniform();
    for (int y = 0; y < size; ++y) {
      double fy = static_cast<double>(y) * grid / size;
      int iy = static_cast<int>(fy);
      double ty = fy - iy;
      ty = ty * ty * (3.0 - 2.0 * ty);
      for (int x = 0; x < size; ++x) {
        double fx = static_cast<double>(x) * grid / size;
        int ix = static_cast<int>(fx);
        double tx = fx - ix;
        tx = tx * tx * (3.0 - 2.0 * tx);
        auto at = [&](int gy, int gx) { return lattice[static_cast<size_t>(gy) * (grid + 1) + gx]; };
        double top = at(iy, ix) * (1.0 - tx) + at(iy, ix + 1) * tx;
        double bot = at(iy + 1, ix) * (1.0 - tx) + at(iy + 1, ix + 1) * tx;
        out[static_cast<size_t>(y) * size + x] += w * (top * (1.0 - ty) + bot * ty);
      }
    }
    total_w += w;
    w *= 0.5;
  }
  for (double& v : out) v /= total_w;
  return out;
}

struct Canvas {
  int size;
  std::vector<double> r, g, b;
  explicit Canvas(int n)
      : size(n),
        r(static_cast<size_t>(n) * n),
        g(static_cast<size_t>(n) * n),
        b(static_cast<size_t>(n) * n) {}
  size_t idx(int y, int x) const { return static_cast<size_t>(y) * size + x; }
};

// One dark curvilinear stroke: a random walk stamping soft dark dots that
// absorb green/blue more than red (a vessel-like tint).
void draw_stroke(Canvas& c, Rng& rng) {
  double y = rng.uniform() * c.size;
  double x = rng.uniform() * c.size;
  double theta = rng.uniform() * 2.0 * 3.14159265358979323846;
  int steps = static_cast<int>((0.3 + 0.4 * rng.uniform()) * c.size);
  double sigma = 0.7 + 0.6 * rng.uniform();
  double strength = 0.25 + 0.20 * rng.uniform();
  int radius = static_cast<int>(std::ceil(3.0 * sigma));
  for (int s = 0; s < steps; ++s) {
    theta += rng.normal(0.0, 0.15);
    y += std::sin(theta);
    x += std::cos(theta);
    if (y < 0 || y >= c.size || x < 0 || x >= c.size) break;
    int yi = static_cast<int>(y), xi = static_cast<int>(x);
    for (int dy = -radius; dy <= radius; ++dy) {
      int py = yi + dy;
      if (py < 0 || py >= c.size) continue;
      for (int dx = -radius; dx <= radius; ++dx) {
        int px = xi + dx;
        if (px < 0 || px >= c.size) continue;
        double ddy = py + 0.5 - y, ddx = px + 0.5 - x;
        double fall = std::exp(-(ddy * ddy + ddx * ddx) / (2.0 * sigma * sigma));
        double delta = strength * fall;
        size_t i = c.idx(py, px);
        c.r[i] -= 0.5 * delta;
        c.g[i] -= 0.85 * delta;
        c.b[i] -= 0.85 * delta;
      }
    }
  }
}

// One bright soft blob with a warm tint.
void draw_blob(Canvas& c, double amplitude, Rng& rng) {
  double cy = rng.uniform() * c.size;
  double cx = rng.uniform() * c.size;
  double radius = 4.0 + 6.0 * rng.uniform();
  int reach = static_cast<int>(std::ceil(2.5 * radius));
  for (int dy = -reach; dy <= reach; ++dy) {
    int py = static_cast<int>(cy) + dy;
    if (py < 0 || py >= c.size) continue;
    for (int dx = -reach; dx <= reach; ++dx) {
      int px = static_cast<int>(cx) + dx;
      if (px < 0 || px >= c.size) continue;
      double ddy = py + 0.5 - cy, ddx = px + 0.5 - cx;
      double fall = std::exp(-(ddy * ddy + ddx * ddx) / (2.0 * radius * radius));
      double delta = amplitude * fall;
      size_t i = c.idx(py, px);
      c.r[i] += 1.0 * delta;
      c.g[i] += 0.9 * delta;
      c.b[i] += 0.7 * delta;
    }
  }
}

std::string image_filename(int label, int index_in_class) {
  std::ostringstream os;
  os << "c" << label << "_";
  std::string n = std::to_string(index_in_class);
  for (size_t i = n.size(); i < 4; ++i) os << '0';
  os << n << ".ppm";
  return os.str();
}

// 8 histogram bins per channel, fraction of pixels per bin.
std::vector<double> histogram_features(const ImageSample& img) {
  const int bins = 8;
  std::vector<double> f(static_cast<size_t>(3 * bins), 0.0);
  const auto& v = img.pixels.values();
  const size_t plane = v.size() / 3;
  for (int c = 0; c < 3; ++c) {
    for (size_t i = 0; i < plane; ++i) {
      int b = static_cast<int>(v[static_cast<size_t>(c) * plane + i] * bins);
      if (b >= bins) b = bins - 1;
      if (b < 0) b = 0;
      f[static_cast<size_t>(c * bins + b)] += 1.0;
    }
    for (int b = 0; b < bins; ++b) f[static_cast<size_t>(c * bins + b)] /= static_cast<double>(plane);
  }
  return f;
}

}  // namespace

void validate_synth_config(const SynthConfig& cfg) {
  if (cfg.per_class < 10) {
    throw ConfigError("per_class must be at least 10, got " + std::to_string(cfg.per_class));
  }
  if (cfg.image_size < 16) {
    throw ConfigError("image_size must be at least 16, got " + std::to_string(cfg.image_size));
  }
  for (int i = 0; i < 2; ++i) {
    if (!(cfg.line_density[static_cast<size_t>(i)] < cfg.line_density[static_cast<size_t>(i + 1)])) {
      throw ConfigError("line_density must be strictly increasing across classes");
    }
    if (!(cfg.blob_intensity[static_cast<size_t>(i)] < cfg.blob_intensity[static_cast<size_t>(i + 1)])) {
      throw ConfigError("blob_intensity must be strictly increasing across classes");
    }
  }
  for (double d : cfg.line_density) {
    if (d < 0.0) throw ConfigError("line_density must be non-negative");
  }
  if (cfg.noise_std < 0.0) throw ConfigError("noise_std must be non-negative");
  if (cfg.blob_count_mean < 0.0) throw ConfigError("blob_count_mean must be non-negative");
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  throw ConfigError("unreachable split value");
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ParseError("unknown split name: " + name);
}

std::vector<ManifestEntry> DatasetManifest::of_split(Split s) const {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : entries) {
    if (e.split == s) out.push_back(e);
  }
  return out;
}

std::string DatasetManifest::resolve(const ManifestEntry& e) const {
  return (fs::path(root) / e.path).string();
}

ImageSample render_synthetic_image(const SynthConfig& cfg, int label, Rng rng, int* strokes_out,
                                   double* blob_amp_out) {
  if (label < 0 || label > 2) throw LabelError("synthetic label must be 0, 1, or 2");
  const int n = cfg.image_size;
  Canvas canvas(n);

  // Warm base texture.
  std::vector<double> v = value_noise(n, rng);
  for (size_t i = 0; i < v.size(); ++i) {
    canvas.r[i] = 0.45 + 0.35 * v[i];
    canvas.g[i] = 0.28 + 0.30 * v[i];
    canvas.b[i] = 0.22 + 0.22 * v[i];
  }

  int strokes = static_cast<int>(rng.poisson(cfg.line_density[static_cast<size_t>(label)]));
  for (int s = 0; s < strokes; ++s) draw_stroke(canvas, rng);

  int blobs = static_cast<int>(rng.poisson(cfg.blob_count_mean));
  double amp_sum = 0.0;
  for (int bcount = 0; bcount < blobs; ++bcount) {
    double amp = rng.normal(cfg.blob_intensity[static_cast<size_t>(label)], 0.06);
    if (amp < 0.0) amp = 0.0;
    amp_sum += amp;
    draw_blob(canvas, amp, rng);
  }

  ImageSample img;
  img.label = label;
  std::vector<double> pixels(static_cast<size_t>(3) * n * n);
  const size_t plane = static_cast<size_t>(n) * n;
  for (size_t i = 0; i < plane; ++i) {
    double nr = canvas.r[i] + rng.normal(0.0, cfg.noise_std);
    double ng = canvas.g[i] + rng.normal(0.0, cfg.noise_std);
    double nb = canvas.b[i] + rng.normal(0.0, cfg.noise_std);
    pixels[i] = std::clamp(nr, 0.0, 1.0);
    pixels[plane + i] = std::clamp(ng, 0.0, 1.0);
    pixels[2 * plane + i] = std::clamp(nb, 0.0, 1.0);
  }
  img.pixels = Tensor::leaf({3, n, n}, std::move(pixels));
  if (strokes_out != nullptr) *strokes_out = strokes;
  if (blob_amp_out != nullptr) *blob_amp_out = blobs > 0 ? amp_sum / blobs : 0.0;
  return img;
}

DatasetManifest generate_synthetic(const SynthConfig& cfg, const std::string& root_dir,
                                   GenReport* report_out) {
  validate_synth_config(cfg);
  std::error_code ec;
  fs::create_directories(root_dir, ec);
  if (ec || !fs::is_directory(root_dir)) {
    throw IoError("cannot create dataset directory " + root_dir + ": " + ec.message());
  }

  DatasetManifest manifest;
  manifest.root = root_dir;
  Rng root(cfg.seed);
  GenReport report;

  const int n_train = static_cast<int>(std::lround(cfg.per_class * 0.8));
  const int n_val = static_cast<int>(std::lround(cfg.per_class * 0.1));

  for (int label = 0; label < 3; ++label) {
    double stroke_sum = 0.0;
    double amp_sum = 0.0;
    for (int i = 0; i < cfg.per_class; ++i) {
      int global_index = label * cfg.per_class + i;
      int strokes = 0;
      double amp = 0.0;
      ImageSample img = render_synthetic_image(cfg, label, root.child("image", static_cast<uint64_t>(global_index)),
                                               &strokes, &amp);
      stroke_sum += strokes;
      amp_sum += amp;

      ManifestEntry e;
      e.path = image_filename(label, i);
      e.label = label;
      e.split = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
      save_image(img, manifest.resolve(e));
      manifest.entries.push_back(std::move(e));
    }
    report.mean_strokes[static_cast<size_t>(label)] = stroke_sum / cfg.per_class;
    report.mean_blob_amplitude[static_cast<size_t>(label)] = amp_sum / cfg.per_class;
  }
  report.n_images = 3 * cfg.per_class;

  save_manifest(manifest, (fs::path(root_dir) / "manifest.csv").string());

  ProbeResult probe = histogram_probe(manifest);
  report.probe_train_accuracy = probe.train_accuracy;
  report.probe_test_accuracy = probe.test_accuracy;
  {
    std::ofstream out(fs::path(root_dir) / "gen_report.json");
    if (!out) throw IoError("cannot write gen_report.json under " + root_dir);
    out << report.to_json() << "\n";
  }
  if (report_out != nullptr) *report_out = report;
  return manifest;
}

std::string GenReport::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\n";
  os << "  \"mean_strokes\": [" << mean_strokes[0] << ", " << mean_strokes[1] << ", "
     << mean_strokes[2] << "],\n";
  os << "  \"mean_blob_amplitude\": [" << mean_blob_amplitude[0] << ", " << mean_blob_amplitude[1]
     << ", " << mean_blob_amplitude[2] << "],\n";
  os << "  \"probe_train_accuracy\": " << probe_train_accuracy << ",\n";
  os << "  \"probe_test_accuracy\": " << probe_test_accuracy << ",\n";
  os << "  \"n_images\": " << n_images << "\n}";
  return os.str();
}

void save_manifest(const DatasetManifest& manifest, const std::string& csv_path) {
  std::ofstream out(csv_path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + csv_path);
  out << "path,label,split\n";
  for (const ManifestEntry& e : manifest.entries) {
    out << e.path << "," << e.label << "," << split_name(e.split) << "\n";
  }
  if (!out) throw IoError("failed writing manifest " + csv_path);
}

DatasetManifest load_manifest(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open manifest " + csv_path);
  DatasetManifest manifest;
  manifest.root = fs::path(csv_path).parent_path().string();
  if (manifest.root.empty()) manifest.root = ".";

  std::string line;
  if (!std::getline(in, line)) throw ParseError("manifest is empty: " + csv_path);
  if (line != "path,label,split") {
    throw ParseError("manifest header must be 'path,label,split', got '" + line + "'");
  }
  std::set<std::string> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string path, label_s, split_s;
    if (!std::getline(ls, path, ',') || !std::getline(ls, label_s, ',') || !std::getline(ls, split_s)) {
      throw ParseError("manifest line " + std::to_string(line_no) + " is not path,label,split: '" + line + "'");
    }
    ManifestEntry e;
    e.path = path;
    try {
      e.label = std::stoi(label_s);
    } catch (const std::exception&) {
      throw ParseError("manifest line " + std::to_string(line_no) + " has non-numeric label '" + label_s + "'");
    }
    if (e.label < 0 || e.label > 2) {
      throw ParseError("manifest line " + std::to_string(line_no) + " label out of range: " + label_s);
    }
    e.split = split_from_name(split_s);
    if (!seen.insert(e.path).second) {
      throw ParseError("manifest line " + std::to_string(line_no) + " repeats path " + e.path);
    }
    if (!fs::exists(manifest.resolve(e))) {
      throw IoError("manifest references missing file " + manifest.resolve(e));
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

ProbeResult histogram_probe(const DatasetManifest& manifest) {
  const int kBins = 24;  // 8 per channel
  const int kClasses = 3;
  std::vector<std::vector<double>> train_x, test_x;
  std::vector<int> train_y, test_y;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.split == Split::val) continue;
    ImageSample img = load_image(manifest.resolve(e));
    std::vector<double> f = histogram_features(img);
    if (e.split == Split::train) {
      train_x.push_back(std::move(f));
      train_y.push_back(e.label);
    } else {
      test_x.push_back(std::move(f));
      test_y.push_back(e.label);
    }
  }
  if (train_x.empty() || test_x.empty()) {
    throw InsufficientDataError("probe needs non-empty train and test splits");
  }

  // Standardize on training statistics.
  std::vector<double> mu(kBins, 0.0), sd(kBins, 0.0);
  for (const auto& x : train_x) {
    for (int j = 0; j < kBins; ++j) mu[static_cast<size_t>(j)] += x[static_cast<size_t>(j)];
  }
  for (double& m : mu) m /= static_cast<double>(train_x.size());
  for (const auto& x : train_x) {
    for (int j = 0; j < kBins; ++j) {
      double d = x[static_cast<size_t>(j)] - mu[static_cast<size_t>(j)];
      sd[static_cast<size_t>(j)] += d * d;
    }
  }
  for (double& s : sd) s = std::sqrt(s / static_cast<double>(train_x.size())) + 1e-8;
  auto standardize = [&](std::vector<std::vector<double>>& xs) {
    for (auto& x : xs) {
      for (int j = 0; j < kBins; ++j) {
        x[static_cast<size_t>(j)] = (x[static_cast<size_t>(j)] - mu[static_cast<size_t>(j)]) / sd[static_cast<size_t>(j)];
      }
    }
  };
  standardize(train_x);
  standardize(test_x);

  // Multinomial logistic regression, deterministic zero init, full-batch GD.
  const int dims = kBins + 1;  // trailing bias
  std::vector<double> w(static_cast<size_t>(kClasses) * dims, 0.0);
  const double lr = 0.5;
  const int iters = 300;
  const size_t n = train_x.size();
  std::vector<double> logits(kClasses), grad(static_cast<size_t>(kClasses) * dims);
  for (int it = 0; it < iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      const auto& x = train_x[i];
      double mx = -1e300;
      for (int c = 0; c < kClasses; ++c) {
        double z = w[static_cast<size_t>(c) * dims + kBins];  // bias
        for (int j = 0; j < kBins; ++j) z += w[static_cast<size_t>(c) * dims + j] * x[static_cast<size_t>(j)];
        logits[static_cast<size_t>(c)] = z;
        mx = std::max(mx, z);
      }
      double sum = 0.0;
      for (int c = 0; c < kClasses; ++c) {
        logits[static_cast<size_t>(c)] = std::exp(logits[static_cast<size_t>(c)] - mx);
        sum += logits[static_cast<size_t>(c)];
      }
      for (int c = 0; c < kClasses; ++c) {
        double p = logits[static_cast<size_t>(c)] / sum;
        double d = p - (c == train_y[i] ? 1.0 : 0.0);
        for (int j = 0; j < kBins; ++j) grad[static_cast<size_t>(c) * dims + j] += d * x[static_cast<size_t>(j)];
        grad[static_cast<size_t>(c) * dims + kBins] += d;
      }
    }
    for (size_t k = 0; k < w.size(); ++k) w[k] -= lr * grad[k] / static_cast<double>(n);
  }

  auto accuracy = [&](const std::vector<std::vector<double>>& xs, const std::vector<int>& ys) {
    int hits = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      int best = 0;
      double best_z = -1e300;
      for (int c = 0; c < kClasses; ++c) {
        double z = w[static_cast<size_t>(c) * dims + kBins];
        for (int j = 0; j < kBins; ++j) z += w[static_cast<size_t>(c) * dims + j] * xs[i][static_cast<size_t>(j)];
        if (z > best_z) {
          best_z = z;
          best = c;
        }
      }
      hits += (best == ys[i]);
    }
    return 100.0 * hits / static_cast<double>(xs.size());
  };
  ProbeResult res;
  res.train_accuracy = accuracy(train_x, train_y);
  res.test_accuracy = accuracy(test_x, test_y);
  return res;
}

}  // namespace pldp
