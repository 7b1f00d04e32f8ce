#pragma once

#include <map>
#include <string>

#include "pldp/tensor.hpp"

namespace pldp {

// Little-endian binary container of named tensors:
//   magic "PLDP" | version u32 | tensor count u32 |
//   per tensor (sorted by name): name length u32, UTF-8 name,
//   rank u32, dims u64 each, raw f64 data.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

}  // namespace pldp
