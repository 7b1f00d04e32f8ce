#include "pldp/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace pldp {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}

struct Reader {
  std::vector<char> bytes;
  size_t pos = 0;

  void need(size_t n, const char* what) {
    if (pos + n > bytes.size())
      throw CheckpointError("checkpoint truncated reading " + std::string(what) + " at byte " +
                            std::to_string(pos));
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64(const char* what) {
    uint64_t v = u64(what);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::string str(size_t n, const char* what) {
    need(n, what);
    std::string s(bytes.begin() + static_cast<long>(pos), bytes.begin() + static_cast<long>(pos + n));
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const std::map<std::string, Tensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write("PLDP", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<long>(name.size()));
    put_u32(os, static_cast<uint32_t>(t.rank()));
    for (int d : t.shape()) put_u64(os, static_cast<uint64_t>(d));
    for (double v : t.values()) put_f64(os, v);
  }
  if (!os) throw IoError("write failed for checkpoint: " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint for reading: " + path);
  Reader r;
  r.bytes.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());

  if (r.bytes.size() < 4 || std::memcmp(r.bytes.data(), "PLDP", 4) != 0)
    throw CheckpointError("bad checkpoint magic at byte 0 in " + path);
  r.pos = 4;
  const uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in " +
                          path);
  const uint32_t count = r.u32("tensor count");

  std::map<std::string, Tensor> out;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.u32("name length");
    const std::string name = r.str(name_len, "tensor name");
    const uint32_t rank = r.u32("rank");
    Shape shape;
    int64_t n = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      const uint64_t dim = r.u64("dimension");
      if (dim == 0 || dim > (1ull << 31))
        throw CheckpointError("invalid dimension " + std::to_string(dim) + " for tensor '" + name +
                              "' at byte " + std::to_string(r.pos - 8));
      shape.push_back(static_cast<int>(dim));
      n *= static_cast<int64_t>(dim);
    }
    std::vector<double> data(static_cast<size_t>(n));
    r.need(static_cast<size_t>(n) * 8, "tensor data");
    for (int64_t j = 0; j < n; ++j) data[static_cast<size_t>(j)] = r.f64("tensor data");
    if (out.count(name))
      throw CheckpointError("duplicate tensor name '" + name + "' in " + path);
    out.emplace(name, Tensor::leaf(std::move(shape), std::move(data), false, name));
  }
  if (r.pos != r.bytes.size())
    throw CheckpointError("trailing bytes after tensor " + std::to_string(count) + " at byte " +
                          std::to_string(r.pos) + " in " + path);
  return out;
}

}  // namespace pldp
