#include "ganvert/generator.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "ganvert/rng.hpp"

namespace ganvert {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

constexpr const char* kConfigTensor = "__config__";

Tensor encode_config(const GeneratorConfig& c) {
  std::vector<double> v = {static_cast<double>(c.d_z),          static_cast<double>(c.dense_out[0]),
                           static_cast<double>(c.dense_out[1]), static_cast<double>(c.dense_out[2]),
                           static_cast<double>(c.stages())};
  for (std::size_t bc : c.block_channels) v.push_back(static_cast<double>(bc));
  v.push_back(static_cast<double>(c.attention_stage));
  v.push_back(static_cast<double>(c.attention_subsample));
  v.push_back(static_cast<double>(c.out_channels));
  v.push_back(static_cast<double>(c.out_resolution));
  const std::size_t len = v.size();
  return Tensor::from({len}, std::move(v));
}

GeneratorConfig decode_config(const Tensor& t) {
  auto grab = [&](std::size_t i) -> std::size_t {
    const double v = t[i];
    if (v < 0 || v != std::floor(v)) {
      throw bundle_error("config tensor entry " + std::to_string(i) + " is not a whole number");
    }
    return static_cast<std::size_t>(v);
  };
  if (t.ndim() != 1 || t.size() < 9) throw bundle_error("config tensor malformed");
  GeneratorConfig c;
  c.d_z = grab(0);
  c.dense_out = {grab(1), grab(2), grab(3)};
  const std::size_t stages = grab(4);
  if (t.size() != 9 + stages) throw bundle_error("config tensor length mismatch");
  c.block_channels.clear();
  for (std::size_t i = 0; i < stages; ++i) c.block_channels.push_back(grab(5 + i));
  c.attention_stage = grab(5 + stages);
  c.attention_subsample = grab(6 + stages);
  c.out_channels = grab(7 + stages);
  c.out_resolution = grab(8 + stages);
  return c;
}

void check_layout(const GeneratorBundle& bundle) {
  const auto layout = bundle.config.weight_layout();
  if (bundle.weights.size() != layout.size()) {
    throw bundle_error("bundle holds " + std::to_string(bundle.weights.size()) +
                       " tensors, architecture wants " + std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, shape] = layout[i];
    const auto& [got_name, got_tensor] = bundle.weights[i];
    if (got_name != name) {
      throw bundle_error("tensor " + std::to_string(i) + " is '" + got_name + "', expected '" +
                         name + "'");
    }
    if (got_tensor.shape != shape) {
      throw bundle_error("tensor '" + name + "' has shape " + shape_string(got_tensor.shape) +
                         ", expected " + shape_string(shape));
    }
    if (!got_tensor.all_finite()) throw bundle_error("tensor '" + name + "' has non-finite entries");
  }
}

void check_rank(const GeneratorBundle& bundle) {
  if (matrix_rank(bundle.weight("W1")) != bundle.config.d_z) {
    throw rank_error("W1 does not have full column rank " + std::to_string(bundle.config.d_z));
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& msg) { throw config_error("generator config: " + msg); };
  if (d_z < 1) fail("d_z must be >= 1");
  if (dense_out[0] < 1 || dense_out[1] < 1 || dense_out[2] < 1) {
    fail("dense_out extents must be >= 1");
  }
  if (dense_out[1] != dense_out[2]) fail("dense grid must be square");
  if (d1() <= d_z) {
    fail("d1 = " + std::to_string(d1()) + " must exceed d_z = " + std::to_string(d_z));
  }
  if (block_channels.empty()) fail("at least one upsample stage is required");
  for (std::size_t bc : block_channels) {
    if (bc < 1) fail("stage channel counts must be >= 1");
  }
  if (out_channels < 1) fail("out_channels must be >= 1");
  const std::size_t expected = dense_out[1] << stages();
  if (out_resolution != expected) {
    fail("out_resolution " + std::to_string(out_resolution) + " != dense height x 2^stages = " +
         std::to_string(expected));
  }
  if (attention_stage >= stages()) {
    fail("attention_stage " + std::to_string(attention_stage) + " out of range for " +
         std::to_string(stages()) + " stages");
  }
  if (!is_power_of_two(attention_subsample)) fail("attention_subsample must be a power of two");
  const std::size_t attn_res = stage_input_resolution(attention_stage);
  if (attention_subsample > attn_res || attn_res % attention_subsample != 0) {
    fail("attention_subsample " + std::to_string(attention_subsample) +
         " does not divide the attention grid " + std::to_string(attn_res));
  }
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> GeneratorConfig::weight_layout()
    const {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> layout;
  layout.emplace_back("W1", std::vector<std::size_t>{d1(), d_z});
  layout.emplace_back("b1", std::vector<std::size_t>{d1()});
  for (std::size_t i = 0; i < stages(); ++i) {
    const std::size_t c_in = stage_input_channels(i);
    if (i == attention_stage) {
      const std::size_t e = attention_embed_channels(), v = attention_value_channels();
      layout.emplace_back("attn.query", std::vector<std::size_t>{e, c_in, 1, 1});
      layout.emplace_back("attn.key", std::vector<std::size_t>{e, c_in, 1, 1});
      layout.emplace_back("attn.value", std::vector<std::size_t>{v, c_in, 1, 1});
      layout.emplace_back("attn.out", std::vector<std::size_t>{c_in, v, 1, 1});
    }
    const std::string tag = std::to_string(i);
    layout.emplace_back("conv" + tag + ".kernel",
                        std::vector<std::size_t>{block_channels[i], c_in, 3, 3});
    layout.emplace_back("affine" + tag + ".scale", std::vector<std::size_t>{block_channels[i]});
    layout.emplace_back("affine" + tag + ".shift", std::vector<std::size_t>{block_channels[i]});
  }
  layout.emplace_back("conv_out.kernel",
                      std::vector<std::size_t>{out_channels, block_channels.back(), 3, 3});
  layout.emplace_back("affine_out.scale", std::vector<std::size_t>{out_channels});
  layout.emplace_back("affine_out.shift", std::vector<std::size_t>{out_channels});
  return layout;
}

const Tensor& GeneratorBundle::weight(const std::string& name) const {
  for (const auto& [n, t] : weights) {
    if (n == name) return t;
  }
  throw bundle_error("bundle has no tensor named '" + name + "'");
}

std::size_t matrix_rank(const Tensor& m) {
  if (m.ndim() != 2) throw shape_error("matrix_rank: want rank-2, got " + shape_string(m.shape));
  Eigen::Map<const RowMat> mm(m.data.data(), static_cast<Eigen::Index>(m.shape[0]),
                              static_cast<Eigen::Index>(m.shape[1]));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(mm);
  return static_cast<std::size_t>(qr.rank());
}

GeneratorBundle init_weights(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  GeneratorBundle bundle;
  bundle.config = config;

  const auto layout = config.weight_layout();
  for (std::size_t idx = 0; idx < layout.size(); ++idx) {
    const auto& [name, shape] = layout[idx];
    SeededRng rng = SeededRng(seed).substream(idx);
    Tensor t;
    if (name == "W1") {
      // Resample (fresh substreams) until full column rank; Gaussian matrices
      // are essentially never deficient, the cap just bounds the loop.
      for (int attempt = 0;; ++attempt) {
        if (attempt == 16) throw rank_error("init_weights: W1 rank deficient after 16 attempts");
        SeededRng wrng = attempt == 0 ? rng : SeededRng(seed).substream(100 + attempt);
        t = wrng.normal_tensor(shape, 0.0, 1.0 / std::sqrt(static_cast<double>(config.d_z)));
        if (matrix_rank(t) == config.d_z) break;
      }
    } else if (name == "b1") {
      t = rng.normal_tensor(shape, 0.0, 0.1);
    } else if (name.find(".scale") != std::string::npos) {
      t = rng.normal_tensor(shape, 1.0, 0.25);
    } else if (name.find(".shift") != std::string::npos) {
      t = rng.normal_tensor(shape, 0.0, 0.25);
    } else {
      // conv / attention kernels: [c_out, c_in, kh, kw], fan-in scaled
      const double fan_in = static_cast<double>(shape[1] * shape[2] * shape[3]);
      t = rng.normal_tensor(shape, 0.0, 1.0 / std::sqrt(fan_in));
    }
    bundle.weights.emplace_back(name, std::move(t));
  }
  check_layout(bundle);
  check_rank(bundle);
  return bundle;
}

void save_weights(const GeneratorBundle& bundle, const std::string& path) {
  bundle.config.validate();
  check_layout(bundle);
  NamedTensors on_disk;
  on_disk.reserve(bundle.weights.size() + 1);
  on_disk.emplace_back(kConfigTensor, encode_config(bundle.config));
  for (const auto& entry : bundle.weights) on_disk.push_back(entry);
  save_tensors(path, on_disk);
}

GeneratorBundle load_weights(const std::string& path) {
  NamedTensors on_disk = load_tensors(path);
  if (on_disk.empty() || on_disk.front().first != kConfigTensor) {
    throw bundle_error("'" + path + "' lacks the leading config tensor");
  }
  GeneratorBundle bundle;
  bundle.config = decode_config(on_disk.front().second);
  bundle.config.validate();
  bundle.weights.assign(std::make_move_iterator(on_disk.begin() + 1),
                        std::make_move_iterator(on_disk.end()));
  check_layout(bundle);
  check_rank(bundle);
  return bundle;
}

int build_g1(Graph& g, int z_node, const GeneratorBundle& bundle) {
  const std::size_t d_z = bundle.config.d_z;
  const Tensor& z = g.value(z_node);
  if (z.ndim() != 1 || z.shape[0] != d_z) {
    throw shape_error("g1: z has shape " + shape_string(z.shape) + ", want [" +
                      std::to_string(d_z) + "]");
  }
  const int w1 = g.input(bundle.weight("W1"));
  const int b1 = g.input(bundle.weight("b1"));
  return g.add(g.matmul(w1, z_node), b1);
}

namespace {

int build_attention(Graph& g, int x, const GeneratorBundle& bundle, int* attention_node) {
  const GeneratorConfig& cfg = bundle.config;
  const std::size_t r = g.value(x).shape[1];
  const std::size_t f = cfg.attention_subsample;
  const std::size_t n = r * r, m = (r / f) * (r / f);
  const std::size_t e = cfg.attention_embed_channels(), vc = cfg.attention_value_channels();

  int pooled = x;
  for (std::size_t s = f; s > 1; s /= 2) pooled = g.maxpool2x(pooled);

  const int wq = g.input(bundle.weight("attn.query"));
  const int wk = g.input(bundle.weight("attn.key"));
  const int wv = g.input(bundle.weight("attn.value"));
  const int wo = g.input(bundle.weight("attn.out"));

  const int q = g.reshape(g.conv2d(x, wq), {e, n});
  const int k = g.reshape(g.conv2d(pooled, wk), {e, m});
  const int attn = g.softmax_rows(g.matmul(q, k, /*trans_a=*/true));  // [N, M]
  if (attention_node != nullptr) *attention_node = attn;

  const int vals = g.reshape(g.conv2d(pooled, wv), {vc, m});
  const int mixed = g.reshape(g.matmul(vals, attn, false, /*trans_b=*/true), {vc, r, r});
  return g.add(x, g.conv2d(mixed, wo));
}

}  // namespace

int build_g2(Graph& g, int h_node, const GeneratorBundle& bundle, int* attention_node) {
  const GeneratorConfig& cfg = bundle.config;
  const Tensor& h = g.value(h_node);
  if (h.ndim() != 1 || h.shape[0] != cfg.d1()) {
    throw shape_error("g2: h has shape " + shape_string(h.shape) + ", want [" +
                      std::to_string(cfg.d1()) + "]");
  }

  int x = g.reshape(h_node, {cfg.dense_out[0], cfg.dense_out[1], cfg.dense_out[2]});
  for (std::size_t i = 0; i < cfg.stages(); ++i) {
    if (i == cfg.attention_stage) x = build_attention(g, x, bundle, attention_node);
    const std::string tag = std::to_string(i);
    const int kernel = g.input(bundle.weight("conv" + tag + ".kernel"));
    const int sc = g.input(bundle.weight("affine" + tag + ".scale"));
    const int sh = g.input(bundle.weight("affine" + tag + ".shift"));
    x = g.relu(g.affine_channel(g.conv2d(g.upsample2x(x), kernel), sc, sh));
  }
  const int kernel = g.input(bundle.weight("conv_out.kernel"));
  const int sc = g.input(bundle.weight("affine_out.scale"));
  const int sh = g.input(bundle.weight("affine_out.shift"));
  return g.tanh(g.affine_channel(g.conv2d(x, kernel), sc, sh));
}

Tensor g1_forward(const Tensor& z, const GeneratorBundle& bundle) {
  Graph g;
  return g.value(build_g1(g, g.input(z), bundle));
}

std::pair<Tensor, std::optional<AttentionMap>> g2_forward(const Tensor& h,
                                                          const GeneratorBundle& bundle,
                                                          bool capture_attention) {
  Graph g;
  int attn = -1;
  const int image = build_g2(g, g.input(h), bundle, capture_attention ? &attn : nullptr);
  std::optional<AttentionMap> map;
  if (capture_attention) {
    const GeneratorConfig& cfg = bundle.config;
    AttentionMap am;
    am.matrix = g.value(attn);
    am.query_h = am.query_w = cfg.stage_input_resolution(cfg.attention_stage);
    am.key_h = am.key_w = am.query_h / cfg.attention_subsample;
    map = std::move(am);
  }
  return {g.value(image), std::move(map)};
}

Tensor full_forward(const Tensor& z, const GeneratorBundle& bundle) {
  Graph g;
  return g.value(build_g2(g, build_g1(g, g.input(z), bundle), bundle));
}

DenseCode DenseCode::make(Tensor z, Tensor delta, const GeneratorBundle& bundle) {
  if (delta.ndim() != 1 || delta.shape[0] != bundle.config.d1()) {
    throw shape_error("dense code: delta has shape " + shape_string(delta.shape) + ", want [" +
                      std::to_string(bundle.config.d1()) + "]");
  }
  DenseCode code;
  code.h = add(g1_forward(z, bundle), delta);
  code.z = std::move(z);
  code.delta = std::move(delta);
  return code;
}

Projection project_to_subspace(const Tensor& h, const GeneratorBundle& bundle) {
  const GeneratorConfig& cfg = bundle.config;
  if (h.ndim() != 1 || h.shape[0] != cfg.d1()) {
    throw shape_error("project: h has shape " + shape_string(h.shape) + ", want [" +
                      std::to_string(cfg.d1()) + "]");
  }
  const Tensor& w1 = bundle.weight("W1");
  const Tensor& b1 = bundle.weight("b1");
  Eigen::Map<const RowMat> w(w1.data.data(), static_cast<Eigen::Index>(cfg.d1()),
                             static_cast<Eigen::Index>(cfg.d_z));
  Eigen::Map<const Eigen::VectorXd> hv(h.data.data(), static_cast<Eigen::Index>(cfg.d1()));
  Eigen::Map<const Eigen::VectorXd> bv(b1.data.data(), static_cast<Eigen::Index>(cfg.d1()));

  const Eigen::VectorXd rhs = w.transpose() * (hv - bv);
  const Eigen::MatrixXd gram = w.transpose() * w;
  const Eigen::VectorXd z = gram.ldlt().solve(rhs);

  Projection p;
  p.z_ls = Tensor({cfg.d_z});
  Eigen::Map<Eigen::VectorXd>(p.z_ls.data.data(), static_cast<Eigen::Index>(cfg.d_z)) = z;
  p.h_proj = g1_forward(p.z_ls, bundle);
  return p;
}

}  // namespace ganvert
