#include "ganvert/generator.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "doctest.h"
#include "ganvert/rng.hpp"

using namespace ganvert;

namespace {

// Small architecture used where the default 16x16 one would be overkill.
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

// A hand-buildable bundle where G1 is fully controlled.
GeneratorBundle bundle_with_g1(const Tensor& w1, const Tensor& b1) {
  GeneratorConfig c = tiny_config();
  c.d_z = w1.shape[1];
  c.dense_out = {w1.shape[0] / 4, 2, 2};
  GeneratorBundle b = init_weights(c, 99);
  for (auto& [name, t] : b.weights) {
    if (name == "W1") t = w1;
    if (name == "b1") t = b1;
  }
  return b;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("ganvert-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("config validation rejects bad architectures") {
  GeneratorConfig c = tiny_config();
  CHECK_NOTHROW(c.validate());

  GeneratorConfig bad = c;
  bad.d_z = 16;  // d1 == 16, no longer strictly greater
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = c;
  bad.out_resolution = 8;
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = c;
  bad.attention_stage = 1;
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = c;
  bad.attention_subsample = 3;
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = c;
  bad.block_channels.clear();
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = c;
  bad.dense_out = {4, 2, 3};
  CHECK_THROWS_AS(bad.validate(), config_error);
}

TEST_CASE("g1_forward matches the affine map by hand") {
  // W1 = [[1,0],[0,2],[3,1]] padded into a 2-channel tiny net is overkill;
  // check the affine arithmetic directly against the documented example.
  Tensor w1 = Tensor::from({16, 2}, [] {
    std::vector<double> v(32, 0.0);
    v[0] = 1;            // row 0: (1,0)
    v[3] = 2;            // row 1: (0,2)
    v[4] = 3; v[5] = 1;  // row 2: (3,1)
    return v;
  }());
  Tensor b1({16}, 1.0);
  GeneratorBundle b = bundle_with_g1(w1, b1);

  Tensor h = g1_forward(Tensor::from({2}, {1, 1}), b);
  CHECK(h[0] == 2.0);
  CHECK(h[1] == 3.0);
  CHECK(h[2] == 5.0);

  // z = 0 -> b1
  Tensor h0 = g1_forward(Tensor({2}, 0.0), b);
  CHECK(max_abs_diff(h0, b1) == 0.0);

  CHECK_THROWS_AS(g1_forward(Tensor({3}, 0.0), b), shape_error);
}

TEST_CASE("affine law: g1(z1) + g1(z2) - g1(z1+z2) == b1") {
  GeneratorBundle b = init_weights(tiny_config(), 5);
  SeededRng rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor z1 = rng.normal_tensor({3});
    Tensor z2 = rng.normal_tensor({3});
    Tensor lhs = add(g1_forward(z1, b), g1_forward(z2, b));
    Tensor rhs = add(g1_forward(add(z1, z2), b), b.weight("b1"));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("init_weights is deterministic, seed-sensitive, and full rank") {
  GeneratorConfig c;  // default 16x16 architecture
  GeneratorBundle a = init_weights(c, 7);
  GeneratorBundle b = init_weights(c, 7);
  REQUIRE(a.weights.size() == b.weights.size());
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    CHECK(a.weights[i].first == b.weights[i].first);
    CHECK(max_abs_diff(a.weights[i].second, b.weights[i].second) == 0.0);
  }
  CHECK(matrix_rank(a.weight("W1")) == 16);

  GeneratorBundle other = init_weights(c, 8);
  bool any_differs = false;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    if (max_abs_diff(a.weights[i].second, other.weights[i].second) > 0.0) any_differs = true;
  }
  CHECK(any_differs);
}

TEST_CASE("save/load round trip is byte-identical and validated") {
  TempDir dir;
  GeneratorBundle bundle = init_weights(tiny_config(), 42);

  const std::string p1 = dir.file("w1.gw"), p2 = dir.file("w2.gw");
  save_weights(bundle, p1);
  GeneratorBundle loaded = load_weights(p1);
  save_weights(loaded, p2);
  CHECK(slurp(p1) == slurp(p2));

  CHECK(loaded.config.d_z == bundle.config.d_z);
  CHECK(loaded.config.block_channels == bundle.config.block_channels);
  for (std::size_t i = 0; i < bundle.weights.size(); ++i) {
    CHECK(max_abs_diff(loaded.weights[i].second, bundle.weights[i].second) == 0.0);
  }
}

TEST_CASE("load_weights reports distinct failures") {
  TempDir dir;
  GeneratorBundle bundle = init_weights(tiny_config(), 43);
  const std::string good = dir.file("good.gw");
  save_weights(bundle, good);
  std::string bytes = slurp(good);

  SUBCASE("bad magic") {
    std::string corrupted = bytes;
    corrupted[0] = 'X';
    std::ofstream(dir.file("bad.gw"), std::ios::binary) << corrupted;
    CHECK_THROWS_AS(load_weights(dir.file("bad.gw")), bad_magic_error);
  }
  SUBCASE("version mismatch") {
    std::string corrupted = bytes;
    corrupted[4] = 9;
    std::ofstream(dir.file("bad.gw"), std::ios::binary) << corrupted;
    CHECK_THROWS_AS(load_weights(dir.file("bad.gw")), version_error);
  }
  SUBCASE("truncated payload") {
    std::ofstream(dir.file("bad.gw"), std::ios::binary)
        << bytes.substr(0, bytes.size() - 11);
    CHECK_THROWS_AS(load_weights(dir.file("bad.gw")), truncated_error);
  }
  SUBCASE("zeroed W1 fails the rank check") {
    GeneratorBundle broken = bundle;
    for (auto& [name, t] : broken.weights) {
      if (name == "W1") t = Tensor(t.shape, 0.0);
    }
    save_weights(broken, dir.file("bad.gw"));
    CHECK_THROWS_AS(load_weights(dir.file("bad.gw")), rank_error);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_weights(dir.file("nope.gw")), weights_error); }
}

TEST_CASE("g2(g1(z)) equals full_forward(z) exactly and stays in [-1,1]") {
  GeneratorBundle b = init_weights(GeneratorConfig{}, 7);
  SeededRng rng(77);
  for (int trial = 0; trial < 3; ++trial) {
    Tensor z = rng.normal_tensor({16});
    Tensor via_h = g2_forward(g1_forward(z, b), b).first;
    Tensor direct = full_forward(z, b);
    REQUIRE(via_h.same_shape(direct));
    CHECK(max_abs_diff(via_h, direct) == 0.0);
    CHECK(direct.shape == std::vector<std::size_t>{3, 16, 16});
    for (double v : direct.data) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("zeroed kernels make the image a bias pattern independent of h") {
  GeneratorBundle b = init_weights(tiny_config(), 3);
  for (auto& [name, t] : b.weights) {
    if (name.find("kernel") != std::string::npos || name.find("attn.") == 0 || name == "W1") {
      t = Tensor(t.shape, 0.0);
    }
  }
  // W1 zeroing breaks the rank invariant but g2 does not touch W1.
  Tensor img1 = g2_forward(Tensor({16}, 0.5), b).first;
  Tensor img2 = g2_forward(Tensor({16}, -2.0), b).first;
  CHECK(max_abs_diff(img1, img2) == 0.0);
  // Every pixel of a channel equals tanh(affine_out shift of that channel).
  const Tensor& shift = b.weight("affine_out.shift");
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(img1.data[c * 16 + i] == doctest::Approx(std::tanh(shift[c])).epsilon(1e-15));
    }
  }
}

TEST_CASE("captured attention is row-stochastic with the advertised grids") {
  GeneratorBundle b = init_weights(GeneratorConfig{}, 7);
  SeededRng rng(78);
  auto [image, attn] = g2_forward(g1_forward(rng.normal_tensor({16}), b), b, true);
  REQUIRE(attn.has_value());
  CHECK(attn->query_h == 8);
  CHECK(attn->query_w == 8);
  CHECK(attn->key_h == 4);
  CHECK(attn->key_w == 4);
  REQUIRE(attn->matrix.shape == std::vector<std::size_t>{64, 16});
  for (std::size_t r = 0; r < 64; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 16; ++c) {
      CHECK(attn->matrix.at(r, c) >= 0.0);
      sum += attn->matrix.at(r, c);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("dense code construction pins h = G1(z) + delta exactly") {
  GeneratorBundle b = init_weights(tiny_config(), 9);
  SeededRng rng(90);
  Tensor z = rng.normal_tensor({3});
  Tensor delta = rng.normal_tensor({16});
  DenseCode code = DenseCode::make(z, delta, b);
  Tensor expect = add(g1_forward(z, b), delta);
  CHECK(max_abs_diff(code.h, expect) == 0.0);
  CHECK_THROWS_AS(DenseCode::make(z, Tensor({5}, 0.0), b), shape_error);
}

TEST_CASE("project_to_subspace hand case and idempotence") {
  // W1 = [[1],[0]], b1 = 0, h = (3,4) -> z_ls = 3, h_proj = (3,0).
  GeneratorConfig c;
  c.d_z = 1;
  c.dense_out = {2, 1, 1};
  c.block_channels = {1};
  c.attention_stage = 0;
  c.attention_subsample = 1;
  c.out_channels = 1;
  c.out_resolution = 2;
  GeneratorBundle b = init_weights(c, 1);
  for (auto& [name, t] : b.weights) {
    if (name == "W1") t = Tensor::from({2, 1}, {1, 0});
    if (name == "b1") t = Tensor({2}, 0.0);
  }
  Projection p = project_to_subspace(Tensor::from({2}, {3, 4}), b);
  CHECK(p.z_ls[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(p.h_proj[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(p.h_proj[1] == doctest::Approx(0.0).epsilon(1e-12));

  Projection again = project_to_subspace(p.h_proj, b);
  CHECK(max_abs_diff(again.h_proj, p.h_proj) <= 1e-12);
}

TEST_CASE("projection of a subspace point is the point, residual orthogonal to W1") {
  GeneratorBundle b = init_weights(GeneratorConfig{}, 7);
  SeededRng rng(91);

  Tensor z = rng.normal_tensor({16});
  Tensor h = g1_forward(z, b);
  Projection p = project_to_subspace(h, b);
  CHECK(max_abs_diff(p.z_ls, z) <= 1e-9);
  CHECK(max_abs_diff(p.h_proj, h) <= 1e-9);

  Tensor off = rng.normal_tensor({512});
  Projection q = project_to_subspace(off, b);
  // residual must be orthogonal to every column of W1
  const Tensor& w1 = b.weight("W1");
  for (std::size_t col = 0; col < 16; ++col) {
    double inner = 0.0;
    for (std::size_t row = 0; row < 512; ++row) {
      inner += (off[row] - q.h_proj[row]) * w1.at(row, col);
    }
    CHECK(std::abs(inner) <= 1e-8);
  }
}
