#include "ganvert/weights_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

namespace ganvert {

namespace {

constexpr char kMagic[4] = {'G', 'A', 'N', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  // Host is little-endian on every supported target; raw bytes match the format.
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const char* what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw truncated_error(std::string("weights file truncated reading ") + what);
  return v;
}

}  // namespace

void save_tensors(const std::string& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw weights_error("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw weights_error("tensor name too long: " + name);
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, 0);  // dtype float64
    put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.ndim()));
    for (std::size_t d : tensor.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  }
  if (!out) throw weights_error("write failed for '" + path + "'");
}

NamedTensors load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw weights_error("cannot open '" + path + "' for reading");

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw bad_magic_error("'" + path + "' is not a GANW weights file (bad magic)");
  }
  const auto version = take<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw version_error("unsupported weights version " + std::to_string(version) + " in '" +
                        path + "'");
  }

  const auto count = take<std::uint32_t>(in, "tensor count");
  NamedTensors tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = take<std::uint16_t>(in, "name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw truncated_error("weights file truncated reading tensor name");

    const auto dtype = take<std::uint8_t>(in, "dtype");
    if (dtype != 0) {
      throw weights_error("tensor '" + name + "' has unsupported dtype " +
                          std::to_string(dtype));
    }
    const auto ndim = take<std::uint8_t>(in, "rank");
    std::vector<std::size_t> shape(ndim);
    for (std::uint8_t d = 0; d < ndim; ++d) {
      shape[d] = take<std::uint32_t>(in, "dimension");
      if (shape[d] == 0) throw weights_error("tensor '" + name + "' has a zero extent");
    }
    if (ndim == 0) throw weights_error("tensor '" + name + "' has rank 0");

    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) {
      throw truncated_error("weights file truncated reading payload of tensor '" + name + "'");
    }
    tensors.emplace_back(std::move(name), std::move(t));
  }
  return tensors;
}

}  // namespace ganvert
