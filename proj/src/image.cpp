#include "pldp/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pldp {

namespace {

struct PpmReader {
  std::vector<char> bytes;
  size_t pos = 0;
  std::string path;

  [[noreturn]] void fail(const std::string& what) { throw ParseError(path + ": " + what, static_cast<long long>(pos)); }

  int peek() { return pos < bytes.size() ? static_cast<unsigned char>(bytes[pos]) : -1; }
  int get() {
    int c = peek();
    if (c >= 0) ++pos;
    return c;
  }

  // PPM allows '#' comments anywhere whitespace may appear in the header.
  void skip_space_and_comments() {
    for (;;) {
      int c = peek();
      if (c == '#') {
        while (c >= 0 && c != '\n') c = get();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        get();
      } else {
        return;
      }
    }
  }

  int read_int(const char* what) {
    skip_space_and_comments();
    if (!std::isdigit(peek())) fail(std::string("expected ") + what);
    long v = 0;
    while (std::isdigit(peek())) {
      v = v * 10 + (get() - '0');
      if (v > 1 << 20) fail(std::string(what) + " out of range");
    }
    return static_cast<int>(v);
  }
};

}  // namespace

ImageSample load_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open image: " + path);
  PpmReader r;
  r.path = path;
  r.bytes.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());

  if (r.bytes.size() < 2 || r.bytes[0] != 'P' || r.bytes[1] != '6')
    throw ParseError(path + ": not a binary PPM (P6) file", 0);
  r.pos = 2;
  const int w = r.read_int("width");
  const int h = r.read_int("height");
  const int maxval = r.read_int("maxval");
  if (maxval != 255) r.fail("only maxval 255 is supported, got " + std::to_string(maxval));
  int c = r.get();
  if (c != ' ' && c != '\t' && c != '\r' && c != '\n') r.fail("expected whitespace after maxval");
  const size_t need = static_cast<size_t>(w) * h * 3;
  if (r.bytes.size() - r.pos < need)
    throw ParseError(path + ": pixel data truncated (need " + std::to_string(need) + " bytes, have " +
                         std::to_string(r.bytes.size() - r.pos) + ")",
                     static_cast<long long>(r.bytes.size()));

  // File stores interleaved RGB rows; tensor is planar [3×H×W].
  std::vector<double> pix(static_cast<size_t>(3) * h * w);
  const unsigned char* d = reinterpret_cast<const unsigned char*>(r.bytes.data()) + r.pos;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch)
        pix[(static_cast<size_t>(ch) * h + y) * w + x] =
            static_cast<double>(d[(static_cast<size_t>(y) * w + x) * 3 + ch]) / 255.0;

  ImageSample s;
  s.pixels = Tensor::leaf({3, h, w}, std::move(pix));
  return s;
}

void save_image(const ImageSample& sample, const std::string& path) {
  if (sample.pixels.rank() != 3 || sample.pixels.shape()[0] != 3)
    throw ShapeError("save_image: pixels must be [3xHxW], got " + shape_str(sample.pixels.shape()));
  const int h = sample.height(), w = sample.width();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open image for writing: " + path);
  os << "P6\n" << w << " " << h << "\n255\n";
  const auto& pix = sample.pixels.values();
  std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const double v = pix[(static_cast<size_t>(ch) * h + y) * w + x];
        const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
        row[(static_cast<size_t>(x)) * 3 + ch] = static_cast<unsigned char>(q);
      }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<long>(row.size()));
  }
  if (!os) throw IoError("write failed for image: " + path);
}

ImageSample resize(const ImageSample& sample, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0)
    throw ConfigError("resize: target dimensions must be positive, got " + std::to_string(out_h) +
                      "x" + std::to_string(out_w));
  const int h = sample.height(), w = sample.width();
  if (h == out_h && w == out_w) {
    ImageSample s = sample;
    return s;
  }
  const auto& src = sample.pixels.values();
  std::vector<double> dst(static_cast<size_t>(3) * out_h * out_w);
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const size_t base = static_cast<size_t>(ch) * h;
        const double a = src[(base + y0) * w + x0], b = src[(base + y0) * w + x1];
        const double c = src[(base + y1) * w + x0], d = src[(base + y1) * w + x1];
        const double top = a + (b - a) * wx;
        const double bot = c + (d - c) * wx;
        dst[(static_cast<size_t>(ch) * out_h + oy) * out_w + ox] = top + (bot - top) * wy;
      }
    }
  }
  ImageSample s;
  s.pixels = Tensor::leaf({3, out_h, out_w}, std::move(dst));
  s.sample_index = sample.sample_index;
  s.label = sample.label;
  return s;
}

}  // namespace pldp
