#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pldp/matrix.hpp"
#include "pldp/rng.hpp"

namespace pldp {

// Per-sample embedding store updated by exponential moving average.
//
// Internally the bank keeps a raw accumulator per slot:
//   acc <- momentum * acc + (1 - momentum) * update
// and exposes the unit-normalized accumulator as the slot's entry. The
// accumulator therefore satisfies the exact EMA recurrence while every
// exposed entry stays on the unit sphere.
//
// Slots start as random unit vectors and count as "uninitialized" until
// their first update; negative sampling only draws from initialized slots.
class MemoryBank {
 public:
  // Builds a bank of `size` slots of dimension `dim`. Every accumulator is
  // initialized to an independent random unit vector drawn from `rng`.
  // momentum must lie in [0, 1) and size/dim must be positive.
  MemoryBank(int size, int dim, double momentum, Rng& rng);

  int size() const { return static_cast<int>(initialized_.size()); }
  int dim() const { return acc_.cols; }
  double momentum() const { return momentum_; }

  // EMA update of one slot. `embedding` must have length dim(); the updated
  // accumulator must keep a norm above 1e-12 so the exposed entry is
  // well defined. Marks the slot initialized.
  void update(int index, const std::vector<double>& embedding);

  bool is_initialized(int index) const;
  int initialized_count() const;
  uint64_t update_count() const { return update_count_; }

  // Unit-normalized entry of one slot.
  std::vector<double> entry(int index) const;

  // Draws `count` distinct initialized slots, excluding `exclude_index`,
  // uniformly without replacement. Returns their normalized entries as the
  // rows of a count x dim matrix (copies, detached from the bank).
  Matrix sample_negatives(int exclude_index, int count, Rng& rng) const;

  // Indices eligible as negatives for `exclude_index` (initialized, != it).
  std::vector<int> eligible_negatives(int exclude_index) const;

  // Normalized entries + initialization mask, copied (later bank updates do
  // not affect a snapshot).
  struct Snapshot {
    Matrix entries;
    std::vector<uint8_t> initialized;
  };
  Snapshot snapshot() const;

  // Raw state access for checkpointing.
  const Matrix& accumulators() const { return acc_; }
  const std::vector<uint8_t>& initialized_mask() const { return initialized_; }
  void restore(const Matrix& accumulators, const std::vector<uint8_t>& initialized);

 private:
  Matrix acc_;
  std::vector<uint8_t> initialized_;
  double momentum_ = 0.5;
  uint64_t update_count_ = 0;
};

}  // namespace pldp
