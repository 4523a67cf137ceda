#include "ganvert/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ganvert {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

[[noreturn]] void fail(const std::string& op, const std::string& detail) {
  throw shape_error(op + ": " + detail);
}

void require_rank(const std::string& op, const Tensor& t, std::size_t rank, const char* role) {
  if (t.ndim() != rank) {
    fail(op, std::string(role) + " must have rank " + std::to_string(rank) + ", got shape " +
                 shape_string(t.shape));
  }
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ",";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
  for (std::size_t d : shape) {
    if (d == 0) fail("tensor", "zero extent in shape " + shape_string(shape));
  }
  if (shape.empty()) fail("tensor", "empty shape");
  data.assign(shape_product(shape), fill);
}

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t.data[0] = v;
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> s, std::vector<double> values) {
  Tensor t(std::move(s));
  if (t.data.size() != values.size()) {
    fail("tensor", "shape " + shape_string(t.shape) + " wants " + std::to_string(t.data.size()) +
                       " values, got " + std::to_string(values.size()));
  }
  t.data = std::move(values);
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  require_rank("matmul", a, 2, "left operand");
  const bool b_is_vector = b.ndim() == 1;
  if (!b_is_vector) require_rank("matmul", b, 2, "right operand");
  if (b_is_vector && trans_b) fail("matmul", "cannot transpose a vector operand");

  const std::size_t m = trans_a ? a.shape[1] : a.shape[0];
  const std::size_t k = trans_a ? a.shape[0] : a.shape[1];
  const std::size_t kb = b_is_vector ? b.shape[0] : (trans_b ? b.shape[1] : b.shape[0]);
  const std::size_t n = b_is_vector ? 1 : (trans_b ? b.shape[0] : b.shape[1]);
  if (k != kb) {
    fail("matmul", "inner extents differ, " + shape_string(a.shape) + (trans_a ? "^T" : "") +
                       " x " + shape_string(b.shape) + (trans_b ? "^T" : ""));
  }

  Tensor out(b_is_vector ? std::vector<std::size_t>{m} : std::vector<std::size_t>{m, n});
  ConstMatMap ma(a.data.data(), static_cast<Eigen::Index>(a.shape[0]),
                 static_cast<Eigen::Index>(a.shape[1]));
  ConstMatMap mb(b.data.data(), static_cast<Eigen::Index>(b_is_vector ? b.shape[0] : b.shape[0]),
                 static_cast<Eigen::Index>(b_is_vector ? 1 : b.shape[1]));
  MatMap mo(out.data.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  if (trans_a && trans_b) {
    mo.noalias() = ma.transpose() * mb.transpose();
  } else if (trans_a) {
    mo.noalias() = ma.transpose() * mb;
  } else if (trans_b) {
    mo.noalias() = ma * mb.transpose();
  } else {
    mo.noalias() = ma * mb;
  }
  return out;
}

namespace {

// Patch matrix for stride-1 same-padding correlation: row (c*kh+ky)*kw+kx,
// column y*W+x holds x(c, y+ky-ph, x+kx-pw) or zero outside the image.
RowMat im2col(const Tensor& x, std::size_t kh, std::size_t kw) {
  const std::size_t c_in = x.shape[0], h = x.shape[1], w = x.shape[2];
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  RowMat cols(c_in * kh * kw, h * w);
  cols.setZero();
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const std::size_t row = (c * kh + ky) * kw + kx;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y + ky) - ph;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const long sx = static_cast<long>(xx + kx) - pw;
            if (sx < 0 || sx >= static_cast<long>(w)) continue;
            cols(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(y * w + xx)) =
                x.at(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
          }
        }
      }
    }
  }
  return cols;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel) {
  require_rank("conv2d", x, 3, "input");
  require_rank("conv2d", kernel, 4, "kernel");
  const std::size_t c_in = x.shape[0], h = x.shape[1], w = x.shape[2];
  const std::size_t c_out = kernel.shape[0], kh = kernel.shape[2], kw = kernel.shape[3];
  if (kernel.shape[1] != c_in) {
    fail("conv2d", "kernel input channels " + std::to_string(kernel.shape[1]) +
                       " != image channels " + std::to_string(c_in));
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    fail("conv2d", "kernel extents must be odd for same padding, got " +
                       shape_string(kernel.shape));
  }

  const RowMat cols = im2col(x, kh, kw);
  Tensor out({c_out, h, w});
  ConstMatMap mk(kernel.data.data(), static_cast<Eigen::Index>(c_out),
                 static_cast<Eigen::Index>(c_in * kh * kw));
  MatMap mo(out.data.data(), static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(h * w));
  mo.noalias() = mk * cols;
  return out;
}

Tensor upsample2x(const Tensor& x) {
  require_rank("upsample2x", x, 3, "input");
  const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
  Tensor out({c, 2 * h, 2 * w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        const double v = x.at(ch, y, xx);
        out.at(ch, 2 * y, 2 * xx) = v;
        out.at(ch, 2 * y, 2 * xx + 1) = v;
        out.at(ch, 2 * y + 1, 2 * xx) = v;
        out.at(ch, 2 * y + 1, 2 * xx + 1) = v;
      }
    }
  }
  return out;
}

Tensor maxpool2x(const Tensor& x) {
  require_rank("maxpool2x", x, 3, "input");
  const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
  if (h % 2 != 0 || w % 2 != 0) {
    fail("maxpool2x", "spatial extents must be even, got " + shape_string(x.shape));
  }
  Tensor out({c, h / 2, w / 2});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h / 2; ++y) {
      for (std::size_t xx = 0; xx < w / 2; ++xx) {
        const double a = x.at(ch, 2 * y, 2 * xx);
        const double b = x.at(ch, 2 * y, 2 * xx + 1);
        const double cc = x.at(ch, 2 * y + 1, 2 * xx);
        const double d = x.at(ch, 2 * y + 1, 2 * xx + 1);
        out.at(ch, y, xx) = std::max(std::max(a, b), std::max(cc, d));
      }
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    fail("add", "operands differ, " + shape_string(a.shape) + " vs " + shape_string(b.shape));
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out = x;
  for (double& v : out.data) v *= factor;
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    fail("mul", "operands differ, " + shape_string(a.shape) + " vs " + shape_string(b.shape));
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data) v = std::tanh(v);
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_rank("softmax_rows", x, 2, "input");
  const std::size_t rows = x.shape[0], cols = x.shape[1];
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    double row_max = x.at(r, 0);
    for (std::size_t c = 1; c < cols; ++c) row_max = std::max(row_max, x.at(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = std::exp(x.at(r, c) - row_max);
      out.at(r, c) = e;
      sum += e;
    }
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) /= sum;
  }
  return out;
}

Tensor affine_channel(const Tensor& x, const Tensor& ch_scale, const Tensor& ch_shift) {
  require_rank("affine_channel", x, 3, "input");
  require_rank("affine_channel", ch_scale, 1, "scale");
  require_rank("affine_channel", ch_shift, 1, "shift");
  const std::size_t c = x.shape[0];
  if (ch_scale.shape[0] != c || ch_shift.shape[0] != c) {
    fail("affine_channel", "scale " + shape_string(ch_scale.shape) + " / shift " +
                               shape_string(ch_shift.shape) + " must match channels " +
                               std::to_string(c));
  }
  Tensor out = x;
  const std::size_t plane = x.shape[1] * x.shape[2];
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double s = ch_scale[ch], t = ch_shift[ch];
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = out.data[ch * plane + i];
      v = s * v + t;
    }
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> new_shape) {
  if (shape_product(new_shape) != x.size()) {
    fail("reshape", shape_string(x.shape) + " has " + std::to_string(x.size()) +
                        " elements, target " + shape_string(new_shape) + " wants " +
                        std::to_string(shape_product(new_shape)));
  }
  Tensor out = x;
  out.shape = std::move(new_shape);
  return out;
}

Tensor reduce_sum(const Tensor& x) {
  double sum = 0.0;
  for (double v : x.data) sum += v;
  return Tensor::scalar(sum);
}

Tensor conv2d_vjp_input(const Tensor& grad_out, const Tensor& kernel) {
  require_rank("conv2d_vjp_input", grad_out, 3, "grad");
  require_rank("conv2d_vjp_input", kernel, 4, "kernel");
  const std::size_t c_out = kernel.shape[0], c_in = kernel.shape[1];
  const std::size_t kh = kernel.shape[2], kw = kernel.shape[3];
  const std::size_t h = grad_out.shape[1], w = grad_out.shape[2];
  if (grad_out.shape[0] != c_out) {
    fail("conv2d_vjp_input", "grad channels " + std::to_string(grad_out.shape[0]) +
                                 " != kernel output channels " + std::to_string(c_out));
  }

  // dcols = K^T * G, then scatter-add each patch row back onto the image.
  ConstMatMap mk(kernel.data.data(), static_cast<Eigen::Index>(c_out),
                 static_cast<Eigen::Index>(c_in * kh * kw));
  ConstMatMap mg(grad_out.data.data(), static_cast<Eigen::Index>(c_out),
                 static_cast<Eigen::Index>(h * w));
  RowMat dcols = mk.transpose() * mg;

  Tensor dx({c_in, h, w}, 0.0);
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const std::size_t row = (c * kh + ky) * kw + kx;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y + ky) - ph;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const long sx = static_cast<long>(xx + kx) - pw;
            if (sx < 0 || sx >= static_cast<long>(w)) continue;
            dx.at(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)) +=
                dcols(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(y * w + xx));
          }
        }
      }
    }
  }
  return dx;
}

Tensor conv2d_vjp_kernel(const Tensor& grad_out, const Tensor& x, std::size_t kh,
                         std::size_t kw) {
  require_rank("conv2d_vjp_kernel", grad_out, 3, "grad");
  require_rank("conv2d_vjp_kernel", x, 3, "input");
  const std::size_t c_out = grad_out.shape[0], c_in = x.shape[0];
  const std::size_t h = x.shape[1], w = x.shape[2];
  if (grad_out.shape[1] != h || grad_out.shape[2] != w) {
    fail("conv2d_vjp_kernel", "grad " + shape_string(grad_out.shape) + " vs input " +
                                  shape_string(x.shape));
  }

  const RowMat cols = im2col(x, kh, kw);
  Tensor dk({c_out, c_in, kh, kw});
  ConstMatMap mg(grad_out.data.data(), static_cast<Eigen::Index>(c_out),
                 static_cast<Eigen::Index>(h * w));
  MatMap md(dk.data.data(), static_cast<Eigen::Index>(c_out),
            static_cast<Eigen::Index>(c_in * kh * kw));
  md.noalias() = mg * cols.transpose();
  return dk;
}

Tensor upsample2x_vjp(const Tensor& grad_out) {
  require_rank("upsample2x_vjp", grad_out, 3, "grad");
  const std::size_t c = grad_out.shape[0], h2 = grad_out.shape[1], w2 = grad_out.shape[2];
  if (h2 % 2 != 0 || w2 % 2 != 0) {
    fail("upsample2x_vjp", "grad extents must be even, got " + shape_string(grad_out.shape));
  }
  Tensor dx({c, h2 / 2, w2 / 2});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h2 / 2; ++y) {
      for (std::size_t xx = 0; xx < w2 / 2; ++xx) {
        dx.at(ch, y, xx) = grad_out.at(ch, 2 * y, 2 * xx) + grad_out.at(ch, 2 * y, 2 * xx + 1) +
                           grad_out.at(ch, 2 * y + 1, 2 * xx) +
                           grad_out.at(ch, 2 * y + 1, 2 * xx + 1);
      }
    }
  }
  return dx;
}

Tensor maxpool2x_vjp(const Tensor& grad_out, const Tensor& x, const Tensor& pooled) {
  require_rank("maxpool2x_vjp", grad_out, 3, "grad");
  require_rank("maxpool2x_vjp", x, 3, "input");
  if (!grad_out.same_shape(pooled)) {
    fail("maxpool2x_vjp",
         "grad " + shape_string(grad_out.shape) + " vs pooled " + shape_string(pooled.shape));
  }
  const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
  Tensor dx({c, h, w}, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h / 2; ++y) {
      for (std::size_t xx = 0; xx < w / 2; ++xx) {
        const double g = grad_out.at(ch, y, xx);
        const double m = pooled.at(ch, y, xx);
        // First window element (row-major scan) that attains the max gets it all.
        if (x.at(ch, 2 * y, 2 * xx) == m) {
          dx.at(ch, 2 * y, 2 * xx) += g;
        } else if (x.at(ch, 2 * y, 2 * xx + 1) == m) {
          dx.at(ch, 2 * y, 2 * xx + 1) += g;
        } else if (x.at(ch, 2 * y + 1, 2 * xx) == m) {
          dx.at(ch, 2 * y + 1, 2 * xx) += g;
        } else {
          dx.at(ch, 2 * y + 1, 2 * xx + 1) += g;
        }
      }
    }
  }
  return dx;
}

Tensor softmax_rows_vjp(const Tensor& grad_out, const Tensor& softmax_out) {
  if (!grad_out.same_shape(softmax_out)) {
    fail("softmax_rows_vjp", "grad " + shape_string(grad_out.shape) + " vs output " +
                                 shape_string(softmax_out.shape));
  }
  const std::size_t rows = softmax_out.shape[0], cols = softmax_out.shape[1];
  Tensor dx({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    double inner = 0.0;
    for (std::size_t c = 0; c < cols; ++c) inner += grad_out.at(r, c) * softmax_out.at(r, c);
    for (std::size_t c = 0; c < cols; ++c) {
      dx.at(r, c) = softmax_out.at(r, c) * (grad_out.at(r, c) - inner);
    }
  }
  return dx;
}

Tensor relu_vjp(const Tensor& grad_out, const Tensor& x) {
  if (!grad_out.same_shape(x)) {
    fail("relu_vjp",
         "grad " + shape_string(grad_out.shape) + " vs input " + shape_string(x.shape));
  }
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.data.size(); ++i) {
    if (x.data[i] <= 0.0) dx.data[i] = 0.0;
  }
  return dx;
}

Tensor tanh_vjp(const Tensor& grad_out, const Tensor& tanh_out) {
  if (!grad_out.same_shape(tanh_out)) {
    fail("tanh_vjp",
         "grad " + shape_string(grad_out.shape) + " vs output " + shape_string(tanh_out.shape));
  }
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.data.size(); ++i) {
    dx.data[i] *= 1.0 - tanh_out.data[i] * tanh_out.data[i];
  }
  return dx;
}

double dot(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    fail("dot", "operands differ, " + shape_string(a.shape) + " vs " + shape_string(b.shape));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) sum += a.data[i] * b.data[i];
  return sum;
}

double squared_norm(const Tensor& x) { return dot(x, x); }

double l2_norm(const Tensor& x) { return std::sqrt(squared_norm(x)); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    fail("max_abs_diff",
         "operands differ, " + shape_string(a.shape) + " vs " + shape_string(b.shape));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

}  // namespace ganvert
