#pragma once

#include <string>

#include "ganvert/tensor.hpp"

namespace ganvert {

struct image_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary 8-bit P6 PPM. Bytes map linearly onto the generator's [-1, 1] range:
// read takes v to 2v/255 - 1, write takes t to round((t + 1) * 255 / 2)
// clamped to [0, 255]. Writing what was read back produces the original file,
// so quantization happens exactly once.
Tensor read_ppm(const std::string& path);                     // returns [3, H, W]
void write_ppm(const Tensor& image, const std::string& path);  // wants [3, H, W]

}  // namespace ganvert
