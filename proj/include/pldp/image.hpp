#pragma once

#include <string>
#include <vector>

#include "pldp/tensor.hpp"

namespace pldp {

// One dataset image: [3×H×W] pixels in [0,1], its position in dataset order,
// and an optional class label (-1 when unlabeled).
struct ImageSample {
  Tensor pixels;
  int sample_index = -1;
  int label = -1;

  int height() const { return pixels.shape()[1]; }
  int width() const { return pixels.shape()[2]; }
};

// Binary PPM (P6), 8-bit — values scaled to [0,1] on load.
ImageSample load_image(const std::string& path);
void save_image(const ImageSample& sample, const std::string& path);

// Bilinear resize; output stays within [0,1].
ImageSample resize(const ImageSample& sample, int out_h, int out_w);

}  // namespace pldp
