#pragma once

#include <vector>

#include "pldp/image.hpp"
#include "pldp/rng.hpp"

namespace pldp {

// An image decomposed into m = grid² patches, shuffled by `permutation`:
// patches[i] is grid patch number permutation[i] (row-major grid order).
struct JigsawSample {
  int source_index = -1;
  std::vector<Tensor> patches;
  std::vector<int> permutation;

  int m() const { return static_cast<int>(patches.size()); }
};

// Row-major grid decomposition; every pixel appears in exactly one patch.
std::vector<Tensor> extract_patches(const ImageSample& image, int grid);

// Uniform permutation of {0..m-1} (Fisher-Yates).
std::vector<int> sample_permutation(int m, Rng& rng);

// extract + shuffle with a permutation drawn from rng.
JigsawSample apply_jigsaw(const ImageSample& image, int grid, Rng& rng);

// Deterministic variant used by the trainer: permutation supplied by caller.
JigsawSample apply_jigsaw_with(const ImageSample& image, int grid,
                               const std::vector<int>& permutation);

// Exact inverse of apply_jigsaw (bitwise).
ImageSample reassemble(const JigsawSample& sample);

}  // namespace pldp
