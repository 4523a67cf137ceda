#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ganvert/graph.hpp"
#include "ganvert/tensor.hpp"
#include "ganvert/weights_io.hpp"

namespace ganvert {

struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
// Bundle-level integrity failures (missing/misshaped tensors).
struct bundle_error : weights_error {
  using weights_error::weights_error;
};
// W1 lost full column rank (serialized corruption or adversarial edit).
struct rank_error : bundle_error {
  using bundle_error::bundle_error;
};

// Architecture of the split generator G = G2 . G1. G1 is the affine map
// W1 z + b1 reshaped to dense_out; G2 is a stack of [upsample2x, conv3x3,
// channel affine, relu] stages with one embedded-Gaussian non-local attention
// block at the input of stage `attention_stage`, finished by conv3x3, channel
// affine and tanh.
struct GeneratorConfig {
  std::size_t d_z = 16;
  std::array<std::size_t, 3> dense_out = {32, 4, 4};  // channels, height, width
  std::vector<std::size_t> block_channels = {16, 8};
  std::size_t attention_stage = 1;      // stage whose input hosts the non-local block
  std::size_t attention_subsample = 2;  // key-side maxpool factor (power of two)
  std::size_t out_channels = 3;
  std::size_t out_resolution = 16;

  std::size_t d1() const { return dense_out[0] * dense_out[1] * dense_out[2]; }
  std::size_t stages() const { return block_channels.size(); }
  std::size_t stage_input_channels(std::size_t stage) const {
    return stage == 0 ? dense_out[0] : block_channels[stage - 1];
  }
  std::size_t stage_input_resolution(std::size_t stage) const {
    return dense_out[1] << stage;
  }
  // Embedding/value channel widths of the attention block, following the
  // non-local-block convention (c/8 and c/2, floored at 1).
  std::size_t attention_embed_channels() const {
    const std::size_t c = stage_input_channels(attention_stage);
    return c / 8 > 0 ? c / 8 : 1;
  }
  std::size_t attention_value_channels() const {
    const std::size_t c = stage_input_channels(attention_stage);
    return c / 2 > 0 ? c / 2 : 1;
  }

  void validate() const;  // throws config_error

  // Names and shapes of every weight tensor, in canonical serialization order.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> weight_layout() const;
};

struct GeneratorBundle {
  GeneratorConfig config;
  NamedTensors weights;  // canonical order, matching config.weight_layout()

  const Tensor& weight(const std::string& name) const;
};

// Row-stochastic attention matrix captured from the non-local block: one row
// per query cell (query_h x query_w grid), one column per subsampled key cell.
struct AttentionMap {
  Tensor matrix;  // [N, M]
  std::size_t query_h = 0, query_w = 0;
  std::size_t key_h = 0, key_w = 0;
};

// A point in the first-dense-layer space, decomposed as h = G1(z) + delta.
struct DenseCode {
  Tensor z;
  Tensor delta;
  Tensor h;

  static DenseCode make(Tensor z, Tensor delta, const GeneratorBundle& bundle);
};

// Deterministic seeded initialization: Gaussian entries with std 1/sqrt(fan_in)
// for W1 and conv kernels, channel affines near identity; W1 is resampled (new
// substream, at most 16 tries) until its column rank is d_z.
GeneratorBundle init_weights(const GeneratorConfig& config, std::uint64_t seed);

void save_weights(const GeneratorBundle& bundle, const std::string& path);
// Re-validates everything on load: container integrity, config plausibility,
// exact tensor layout, W1 full column rank.
GeneratorBundle load_weights(const std::string& path);

// Graph builders: append G1 / G2 to the caller's tape and return the id of
// the result node. Weight tensors enter as input nodes. The plain forward
// functions below run through these same builders, so traced and untraced
// evaluation are bitwise identical.
int build_g1(Graph& g, int z_node, const GeneratorBundle& bundle);
int build_g2(Graph& g, int h_node, const GeneratorBundle& bundle,
             int* attention_node = nullptr);

Tensor g1_forward(const Tensor& z, const GeneratorBundle& bundle);
std::pair<Tensor, std::optional<AttentionMap>> g2_forward(const Tensor& h,
                                                          const GeneratorBundle& bundle,
                                                          bool capture_attention = false);
Tensor full_forward(const Tensor& z, const GeneratorBundle& bundle);

// Least-squares decomposition of h against the affine subspace G1(R^{d_z}):
// z_ls = argmin_z ||h - (W1 z + b1)||_2 via the normal equations, and
// h_proj = W1 z_ls + b1.
struct Projection {
  Tensor z_ls;
  Tensor h_proj;
};
Projection project_to_subspace(const Tensor& h, const GeneratorBundle& bundle);

// Column rank of a rank-2 tensor (rank-revealing QR).
std::size_t matrix_rank(const Tensor& m);

}  // namespace ganvert
