#include "pldp/jigsaw.hpp"

#include <cmath>

namespace pldp {

namespace {

void check_permutation(const std::vector<int>& perm, int m) {
  if (static_cast<int>(perm.size()) != m)
    throw PermutationError("permutation length " + std::to_string(perm.size()) +
                           " does not match patch count " + std::to_string(m));
  std::vector<char> seen(static_cast<size_t>(m), 0);
  for (int p : perm) {
    if (p < 0 || p >= m || seen[static_cast<size_t>(p)])
      throw PermutationError("permutation is not a bijection on {0.." + std::to_string(m - 1) +
                             "}");
    seen[static_cast<size_t>(p)] = 1;
  }
}

Tensor copy_patch(const std::vector<double>& pix, int H, int W, int ph, int pw, int gy, int gx) {
  std::vector<double> out(static_cast<size_t>(3) * ph * pw);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < ph; ++y) {
      const size_t src = (static_cast<size_t>(c) * H + gy * ph + y) * W + static_cast<size_t>(gx) * pw;
      const size_t dst = (static_cast<size_t>(c) * ph + y) * pw;
      std::copy(pix.begin() + static_cast<long>(src), pix.begin() + static_cast<long>(src + pw),
                out.begin() + static_cast<long>(dst));
    }
  return Tensor::leaf({3, ph, pw}, std::move(out));
}

}  // namespace

std::vector<Tensor> extract_patches(const ImageSample& image, int grid) {
  if (grid < 1) throw GridError("extract_patches: grid must be >= 1, got " + std::to_string(grid));
  const int H = image.height(), W = image.width();
  if (H % grid != 0 || W % grid != 0)
    throw GridError("extract_patches: image " + std::to_string(H) + "x" + std::to_string(W) +
                    " not divisible by grid " + std::to_string(grid));
  const int ph = H / grid, pw = W / grid;
  const auto& pix = image.pixels.values();
  std::vector<Tensor> patches;
  patches.reserve(static_cast<size_t>(grid) * grid);
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) patches.push_back(copy_patch(pix, H, W, ph, pw, gy, gx));
  return patches;
}

std::vector<int> sample_permutation(int m, Rng& rng) {
  if (m < 1) throw EmptyDomainError("sample_permutation: m must be >= 1, got " + std::to_string(m));
  return rng.shuffled_indices(m);
}

JigsawSample apply_jigsaw_with(const ImageSample& image, int grid,
                               const std::vector<int>& permutation) {
  std::vector<Tensor> ordered = extract_patches(image, grid);
  const int m = static_cast<int>(ordered.size());
  check_permutation(permutation, m);
  JigsawSample s;
  s.source_index = image.sample_index;
  s.permutation = permutation;
  s.patches.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i)
    s.patches.push_back(ordered[static_cast<size_t>(permutation[static_cast<size_t>(i)])]);
  return s;
}

JigsawSample apply_jigsaw(const ImageSample& image, int grid, Rng& rng) {
  if (grid < 1) throw GridError("apply_jigsaw: grid must be >= 1, got " + std::to_string(grid));
  return apply_jigsaw_with(image, grid, sample_permutation(grid * grid, rng));
}

ImageSample reassemble(const JigsawSample& sample) {
  const int m = sample.m();
  if (m == 0) throw EmptyDomainError("reassemble: no patches");
  const int grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
  if (grid * grid != m)
    throw GridError("reassemble: patch count " + std::to_string(m) + " is not a perfect square");
  check_permutation(sample.permutation, m);

  const Shape& ps = sample.patches[0].shape();
  if (ps.size() != 3 || ps[0] != 3)
    throw ShapeError("reassemble: patches must be [3xHxW], got " + shape_str(ps));
  for (const auto& p : sample.patches)
    if (p.shape() != ps)
      throw ShapeError("reassemble: inconsistent patch shapes " + shape_str(ps) + " vs " +
                       shape_str(p.shape()));

  const int ph = ps[1], pw = ps[2];
  const int H = ph * grid, W = pw * grid;
  std::vector<double> pix(static_cast<size_t>(3) * H * W);
  for (int i = 0; i < m; ++i) {
    const int slot = sample.permutation[static_cast<size_t>(i)];
    const int gy = slot / grid, gx = slot % grid;
    const auto& pv = sample.patches[static_cast<size_t>(i)].values();
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < ph; ++y) {
        const size_t dst =
            (static_cast<size_t>(c) * H + gy * ph + y) * W + static_cast<size_t>(gx) * pw;
        const size_t src = (static_cast<size_t>(c) * ph + y) * pw;
        std::copy(pv.begin() + static_cast<long>(src), pv.begin() + static_cast<long>(src + pw),
                  pix.begin() + static_cast<long>(dst));
      }
  }
  ImageSample out;
  out.pixels = Tensor::leaf({3, H, W}, std::move(pix));
  out.sample_index = sample.source_index;
  return out;
}

}  // namespace pldp
