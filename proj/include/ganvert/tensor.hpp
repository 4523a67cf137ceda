#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ganvert {

// Thrown by every primitive on incompatible operand shapes. The message names
// the operation and the offending dimensions.
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// Dense row-major tensor of 64-bit floats. Scalars are shape {1}; rank-0
// tensors are not used. Tensors are plain values: copy/move freely, never
// mutated by the primitives below.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0);
  static Tensor scalar(double v);
  static Tensor from(std::vector<std::size_t> s, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }
  bool empty() const { return data.empty(); }

  double operator[](std::size_t i) const { return data[i]; }
  double& operator[](std::size_t i) { return data[i]; }

  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * shape[1] + y) * shape[2] + x];
  }
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * shape[1] + y) * shape[2] + x];
  }
  double at(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const {
    return data[((o * shape[1] + i) * shape[2] + y) * shape[3] + x];
  }
  double& at(std::size_t o, std::size_t i, std::size_t y, std::size_t x) {
    return data[((o * shape[1] + i) * shape[2] + y) * shape[3] + x];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

// Primitive forward operations. conv2d is stride-1 cross-correlation with
// zero "same" padding and odd kernel extents; spatial resizing happens only
// through upsample2x / maxpool2x.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
Tensor conv2d(const Tensor& x, const Tensor& kernel);
Tensor upsample2x(const Tensor& x);
Tensor maxpool2x(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor affine_channel(const Tensor& x, const Tensor& ch_scale, const Tensor& ch_shift);
Tensor reshape(const Tensor& x, std::vector<std::size_t> new_shape);
Tensor reduce_sum(const Tensor& x);

// Reverse-mode building blocks behind Graph::backward. maxpool routes the
// incoming gradient to the first window element (row-major scan) equal to the
// pooled value; relu takes subgradient 0 at exactly 0.
Tensor conv2d_vjp_input(const Tensor& grad_out, const Tensor& kernel);
Tensor conv2d_vjp_kernel(const Tensor& grad_out, const Tensor& x, std::size_t kh, std::size_t kw);
Tensor upsample2x_vjp(const Tensor& grad_out);
Tensor maxpool2x_vjp(const Tensor& grad_out, const Tensor& x, const Tensor& pooled);
Tensor softmax_rows_vjp(const Tensor& grad_out, const Tensor& softmax_out);
Tensor relu_vjp(const Tensor& grad_out, const Tensor& x);
Tensor tanh_vjp(const Tensor& grad_out, const Tensor& tanh_out);

// Scalar helpers shared across modules.
double dot(const Tensor& a, const Tensor& b);
double squared_norm(const Tensor& x);
double l2_norm(const Tensor& x);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace ganvert
