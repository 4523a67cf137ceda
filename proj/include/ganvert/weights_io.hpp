#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ganvert/tensor.hpp"

namespace ganvert {

// Container-level failures; each condition gets its own type so callers and
// tests can tell them apart.
struct weights_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct bad_magic_error : weights_error {
  using weights_error::weights_error;
};
struct version_error : weights_error {
  using weights_error::weights_error;
};
struct truncated_error : weights_error {
  using weights_error::weights_error;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Binary tensor container (little-endian): magic "GANW", u32 version=1,
// u32 tensor_count; per tensor u16 name_length, name bytes, u8 dtype
// (0 = float64), u8 ndim, ndim x u32 dims, raw float64 payload. Order is
// preserved so save -> load -> save is a byte-identical round trip.
void save_tensors(const std::string& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::string& path);

}  // namespace ganvert
