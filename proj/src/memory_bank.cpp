#include "pldp/memory_bank.hpp"

#include <cmath>
#include <string>

#include "pldp/error.hpp"

namespace pldp {

namespace {

double norm_of(const double* v, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

}  // namespace

MemoryBank::MemoryBank(int size, int dim, double momentum, Rng& rng)
    : acc_(0, 0), momentum_(momentum) {
  if (size <= 0) throw ConfigError("memory bank size must be positive, got " + std::to_string(size));
  if (dim <= 0) throw ConfigError("memory bank dim must be positive, got " + std::to_string(dim));
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("memory bank momentum must lie in [0, 1), got " + std::to_string(momentum));
  }
  acc_ = Matrix(size, dim);
  initialized_.assign(static_cast<size_t>(size), 0);
  for (int i = 0; i < size; ++i) {
    double* r = acc_.row(i);
    // Gaussian direction => uniform on the unit sphere after normalization.
    double nrm = 0.0;
    do {
      for (int j = 0; j < dim; ++j) r[j] = rng.normal();
      nrm = norm_of(r, dim);
    } while (nrm < 1e-12);
    for (int j = 0; j < dim; ++j) r[j] /= nrm;
  }
}

void MemoryBank::update(int index, const std::vector<double>& embedding) {
  if (index < 0 || index >= size()) {
    throw IndexError("bank index " + std::to_string(index) + " out of range [0, " +
                     std::to_string(size()) + ")");
  }
  if (static_cast<int>(embedding.size()) != dim()) {
    throw DimensionError("bank update expects dim " + std::to_string(dim()) + ", got " +
                         std::to_string(embedding.size()));
  }
  double* r = acc_.row(index);
  for (int j = 0; j < dim(); ++j) {
    r[j] = momentum_ * r[j] + (1.0 - momentum_) * embedding[j];
  }
  if (norm_of(r, dim()) < 1e-12) {
    throw DegenerateVectorError("bank slot " + std::to_string(index) +
                                " accumulator norm below 1e-12 after update");
  }
  initialized_[static_cast<size_t>(index)] = 1;
  ++update_count_;
}

bool MemoryBank::is_initialized(int index) const {
  if (index < 0 || index >= size()) {
    throw IndexError("bank index " + std::to_string(index) + " out of range [0, " +
                     std::to_string(size()) + ")");
  }
  return initialized_[static_cast<size_t>(index)] != 0;
}

int MemoryBank::initialized_count() const {
  int c = 0;
  for (uint8_t b : initialized_) c += (b != 0);
  return c;
}

std::vector<double> MemoryBank::entry(int index) const {
  if (index < 0 || index >= size()) {
    throw IndexError("bank index " + std::to_string(index) + " out of range [0, " +
                     std::to_string(size()) + ")");
  }
  const double* r = acc_.row(index);
  double nrm = norm_of(r, dim());
  if (nrm < 1e-12) {
    throw DegenerateVectorError("bank slot " + std::to_string(index) + " accumulator norm below 1e-12");
  }
  std::vector<double> out(static_cast<size_t>(dim()));
  for (int j = 0; j < dim(); ++j) out[static_cast<size_t>(j)] = r[j] / nrm;
  return out;
}

std::vector<int> MemoryBank::eligible_negatives(int exclude_index) const {
  std::vector<int> pool;
  pool.reserve(initialized_.size());
  for (int i = 0; i < size(); ++i) {
    if (i == exclude_index) continue;
    if (initialized_[static_cast<size_t>(i)]) pool.push_back(i);
  }
  return pool;
}

Matrix MemoryBank::sample_negatives(int exclude_index, int count, Rng& rng) const {
  if (count < 0) throw SamplingError("negative count must be non-negative, got " + std::to_string(count));
  std::vector<int> pool = eligible_negatives(exclude_index);
  if (count > static_cast<int>(pool.size())) {
    throw SamplingError("requested " + std::to_string(count) + " negatives but only " +
                        std::to_string(pool.size()) + " eligible entries");
  }
  std::vector<int> chosen = sample_without_replacement(pool, static_cast<size_t>(count), rng);
  Matrix out(count, dim());
  for (int i = 0; i < count; ++i) {
    std::vector<double> e = entry(chosen[static_cast<size_t>(i)]);
    double* r = out.row(i);
    for (int j = 0; j < dim(); ++j) r[j] = e[static_cast<size_t>(j)];
  }
  return out;
}

MemoryBank::Snapshot MemoryBank::snapshot() const {
  Snapshot s;
  s.entries = Matrix(size(), dim());
  s.initialized = initialized_;
  for (int i = 0; i < size(); ++i) {
    std::vector<double> e = entry(i);
    double* r = s.entries.row(i);
    for (int j = 0; j < dim(); ++j) r[j] = e[static_cast<size_t>(j)];
  }
  return s;
}

void MemoryBank::restore(const Matrix& accumulators, const std::vector<uint8_t>& initialized) {
  if (accumulators.rows != size() || accumulators.cols != dim()) {
    throw DimensionError("bank restore expects " + std::to_string(size()) + "x" + std::to_string(dim()) +
                         " accumulators, got " + std::to_string(accumulators.rows) + "x" +
                         std::to_string(accumulators.cols));
  }
  if (initialized.size() != initialized_.size()) {
    throw DimensionError("bank restore mask length mismatch: expected " +
                         std::to_string(initialized_.size()) + ", got " +
                         std::to_string(initialized.size()));
  }
  acc_ = accumulators;
  initialized_ = initialized;
}

}  // namespace pldp
