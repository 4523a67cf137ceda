#include "ganvert/interpolation.hpp"

#include <array>
#include <cmath>

#include "doctest.h"
#include "ganvert/rng.hpp"

using namespace ganvert;

namespace {

GeneratorConfig tiny_config() {
  GeneratorConfig c;
  c.d_z = 3;
  c.dense_out = {4, 2, 2};  // d1 = 16
  c.block_channels = {4};
  c.attention_stage = 0;
  c.attention_subsample = 2;
  c.out_channels = 2;
  c.out_resolution = 4;
  return c;
}

// Removes the component of v lying in the column space of W1 (d_z = 3), via
// the normal equations solved by hand-rolled elimination.
Tensor strip_column_space(const Tensor& v, const Tensor& w1) {
  const std::size_t rows = w1.shape[0];
  std::array<std::array<double, 3>, 3> ata{};
  std::array<double, 3> atv{};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t r = 0; r < rows; ++r) ata[i][j] += w1.at(r, i) * w1.at(r, j);
    }
    for (std::size_t r = 0; r < rows; ++r) atv[i] += w1.at(r, i) * v.data[r];
  }
  std::array<double, 3> coeff = atv;
  // 3x3 Gaussian elimination with partial pivoting.
  std::array<std::array<double, 3>, 3> a = ata;
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    std::swap(coeff[col], coeff[pivot]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
      coeff[r] -= f * coeff[col];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double acc = coeff[r];
    for (int c = r + 1; c < 3; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  Tensor out = v;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < 3; ++j) out.data[r] -= w1.at(r, j) * x[j];
  }
  return out;
}

}  // namespace

TEST_CASE("spec validation rejects bad shapes and step counts") {
  GeneratorBundle bundle = init_weights(tiny_config(), 41);
  InterpolationSpec spec;
  spec.mode = InterpolationMode::latent;
  spec.a = Tensor({3}, 0.0);
  spec.b = Tensor({3}, 0.0);
  spec.steps = 1;
  CHECK_THROWS_AS(interpolate(spec, bundle), std::invalid_argument);
  spec.steps = 2;
  spec.b = Tensor({4}, 0.0);
  CHECK_THROWS_AS(interpolate(spec, bundle), shape_error);
  spec.mode = InterpolationMode::delta;
  spec.a = Tensor({3}, 0.0);
  spec.b = Tensor({16}, 0.0);
  CHECK_NOTHROW(interpolate(spec, bundle));
  spec.b = Tensor({15}, 0.0);
  CHECK_THROWS_AS(interpolate(spec, bundle), shape_error);
}

TEST_CASE("two steps reproduce the endpoint renderings bitwise") {
  GeneratorBundle bundle = init_weights(tiny_config(), 42);
  SeededRng rng(1);
  InterpolationSpec spec;
  spec.mode = InterpolationMode::latent;
  spec.a = rng.normal_tensor({3});
  spec.b = rng.normal_tensor({3});
  spec.steps = 2;

  InterpolationResult r = interpolate(spec, bundle);
  REQUIRE(r.frames.size() == 2);
  CHECK(r.alphas[0] == 0.0);
  CHECK(r.alphas[1] == 1.0);
  CHECK(max_abs_diff(r.frames[0], full_forward(spec.b, bundle)) == 0.0);
  CHECK(max_abs_diff(r.frames[1], full_forward(spec.a, bundle)) == 0.0);
}

TEST_CASE("endpoint frames are exact in dense and delta modes") {
  GeneratorBundle bundle = init_weights(tiny_config(), 43);
  SeededRng rng(2);

  InterpolationSpec dense;
  dense.mode = InterpolationMode::dense;
  dense.a = rng.uniform_tensor({16}, -1.0, 1.0);
  dense.b = rng.uniform_tensor({16}, -1.0, 1.0);
  dense.steps = 5;
  InterpolationResult rd = interpolate(dense, bundle);
  CHECK(max_abs_diff(rd.frames.front(), g2_forward(dense.b, bundle).first) == 0.0);
  CHECK(max_abs_diff(rd.frames.back(), g2_forward(dense.a, bundle).first) == 0.0);
  CHECK(max_abs_diff(rd.codes.front(), dense.b) == 0.0);
  CHECK(max_abs_diff(rd.codes.back(), dense.a) == 0.0);

  InterpolationSpec delta;
  delta.mode = InterpolationMode::delta;
  delta.a = rng.normal_tensor({3});
  delta.b = rng.uniform_tensor({16}, -0.5, 0.5);
  delta.steps = 4;
  InterpolationResult rl = interpolate(delta, bundle);
  Tensor h0 = g1_forward(delta.a, bundle);
  CHECK(max_abs_diff(rl.frames.front(), g2_forward(h0, bundle).first) == 0.0);
  CHECK(max_abs_diff(rl.frames.back(), g2_forward(add(h0, delta.b), bundle).first) == 0.0);
}

TEST_CASE("interior delta frame equals direct re-evaluation") {
  GeneratorBundle bundle = init_weights(tiny_config(), 44);
  SeededRng rng(3);
  InterpolationSpec spec;
  spec.mode = InterpolationMode::delta;
  spec.a = rng.normal_tensor({3});
  spec.b = rng.uniform_tensor({16}, -0.5, 0.5);
  spec.steps = 3;  // alphas 0, 0.5, 1

  InterpolationResult r = interpolate(spec, bundle);
  CHECK(r.alphas[1] == 0.5);
  Tensor direct = g2_forward(add(g1_forward(spec.a, bundle), scale(spec.b, 0.5)), bundle).first;
  CHECK(max_abs_diff(r.frames[1], direct) == 0.0);
}

TEST_CASE("identical dense endpoints give identical frames") {
  GeneratorBundle bundle = init_weights(tiny_config(), 45);
  Tensor h = SeededRng(4).uniform_tensor({16}, -1.0, 1.0);
  InterpolationSpec spec;
  spec.mode = InterpolationMode::dense;
  spec.a = h;
  spec.b = h;
  spec.steps = 4;
  InterpolationResult r = interpolate(spec, bundle);
  for (const Tensor& f : r.frames) CHECK(max_abs_diff(f, r.frames[0]) == 0.0);
}

TEST_CASE("affine G1 maps latent segments onto dense segments") {
  GeneratorBundle bundle = init_weights(tiny_config(), 46);
  SeededRng rng(5);
  Tensor z1 = rng.normal_tensor({3});
  Tensor z2 = rng.normal_tensor({3});
  Tensor h1 = g1_forward(z1, bundle);
  Tensor h2 = g1_forward(z2, bundle);
  for (double alpha : {0.25, 0.5, 0.9}) {
    Tensor lhs = g1_forward(add(scale(z1, alpha), scale(z2, 1.0 - alpha)), bundle);
    Tensor rhs = add(scale(h1, alpha), scale(h2, 1.0 - alpha));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("all frames stay inside the generator range") {
  GeneratorBundle bundle = init_weights(tiny_config(), 47);
  SeededRng rng(6);
  InterpolationSpec spec;
  spec.mode = InterpolationMode::dense;
  spec.a = rng.uniform_tensor({16}, -3.0, 3.0);
  spec.b = rng.uniform_tensor({16}, -3.0, 3.0);
  spec.steps = 7;
  InterpolationResult r = interpolate(spec, bundle);
  for (const Tensor& f : r.frames) {
    for (double v : f.data) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("off-subspace certificate is linear in alpha for delta paths") {
  GeneratorBundle bundle = init_weights(tiny_config(), 48);
  SeededRng rng(7);
  Tensor z = rng.normal_tensor({3});
  // A displacement orthogonal to col(W1): the certificate then equals
  // alpha * ||delta|| exactly (up to round-off).
  Tensor delta = strip_column_space(rng.uniform_tensor({16}, -1.0, 1.0), bundle.weight("W1"));
  const double delta_norm = std::sqrt(squared_norm(delta));
  REQUIRE(delta_norm > 0.1);

  InterpolationSpec spec;
  spec.mode = InterpolationMode::delta;
  spec.a = z;
  spec.b = delta;
  spec.steps = 5;
  InterpolationResult r = interpolate(spec, bundle);
  std::vector<double> dist = off_subspace_certificate(r.codes, bundle);
  REQUIRE(dist.size() == 5);

  CHECK(dist[0] < 1e-8);                                   // G1(z) is on the subspace
  CHECK(std::abs(dist[4] - delta_norm) <= 1e-8);           // orthogonal displacement
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(std::abs(dist[k] - r.alphas[k] * dist[4]) <= 1e-8);  // linear in alpha
  }
}

TEST_CASE("alpha grid is uniform with both endpoints included") {
  GeneratorBundle bundle = init_weights(tiny_config(), 49);
  InterpolationSpec spec;
  spec.mode = InterpolationMode::dense;
  spec.a = Tensor({16}, 0.25);
  spec.b = Tensor({16}, -0.5);
  spec.steps = 4;
  InterpolationResult r = interpolate(spec, bundle);
  CHECK(r.alphas[0] == 0.0);
  CHECK(r.alphas[1] == 1.0 / 3.0);
  CHECK(r.alphas[2] == 2.0 / 3.0);
  CHECK(r.alphas[3] == 1.0);
}
