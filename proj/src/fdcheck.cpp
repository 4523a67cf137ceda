#include "ganvert/fdcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ganvert/loss.hpp"
#include "ganvert/rng.hpp"

namespace ganvert {

namespace {

// Uniform magnitude in [0.1, 1.6] with random sign: keeps relu inputs clear
// of the kink at 0 by a wide margin relative to the 1e-5 FD step.
Tensor away_from_zero(SeededRng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data) {
    const double mag = rng.uniform(0.1, 1.6);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

// Random tensor whose every 2x2 pooling window has a strict max, with the
// runner-up at least `gap` below it, so FD never flips the argmax.
Tensor poolable(SeededRng& rng, std::vector<std::size_t> shape, double gap) {
  Tensor t(std::move(shape));
  const std::size_t c = t.shape[0], h = t.shape[1], w = t.shape[2];
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; y += 2) {
      for (std::size_t x = 0; x < w; x += 2) {
        double v[4];
        for (;;) {
          for (double& e : v) e = rng.uniform(-1.0, 1.0);
          double sorted[4] = {v[0], v[1], v[2], v[3]};
          std::sort(sorted, sorted + 4);
          if (sorted[3] - sorted[2] >= gap) break;
        }
        t.at(ch, y, x) = v[0];
        t.at(ch, y, x + 1) = v[1];
        t.at(ch, y + 1, x) = v[2];
        t.at(ch, y + 1, x + 1) = v[3];
      }
    }
  }
  return t;
}

// Wraps node `y` into a scalar through a random linear functional so the
// upstream gradient reaching the primitive is dense and non-uniform.
int wrap_scalar(Graph& g, SeededRng& rng, int y) {
  const int w = g.input(rng.uniform_tensor(g.value(y).shape, 0.5, 1.5));
  return g.reduce_sum(g.mul(y, w));
}

void widen(GradCheckReport& worst, const GradCheckReport& r) {
  worst.max_abs_dev = std::max(worst.max_abs_dev, r.max_abs_dev);
  worst.max_rel_dev = std::max(worst.max_rel_dev, r.max_rel_dev);
  worst.pass = worst.pass && r.pass;
}

// Smallest distance of any recorded relu input to 0, and of any maxpool
// window's max to its runner-up. Composite cases resample their inputs until
// this clears the FD step by a wide margin, so central differences never
// straddle a kink.
double kink_margin(const Graph& g) {
  double margin = std::numeric_limits<double>::infinity();
  for (int id = 0; id < g.size(); ++id) {
    const Graph::Node& n = g.node(id);
    if (n.op == Op::relu) {
      for (double v : g.value(n.args[0]).data) margin = std::min(margin, std::abs(v));
    } else if (n.op == Op::maxpool2x) {
      const Tensor& x = g.value(n.args[0]);
      for (std::size_t c = 0; c < x.shape[0]; ++c) {
        for (std::size_t y = 0; y + 1 < x.shape[1]; y += 2) {
          for (std::size_t xx = 0; xx + 1 < x.shape[2]; xx += 2) {
            double w[4] = {x.at(c, y, xx), x.at(c, y, xx + 1), x.at(c, y + 1, xx),
                           x.at(c, y + 1, xx + 1)};
            std::sort(w, w + 4);
            margin = std::min(margin, w[3] - w[2]);
          }
        }
      }
    }
  }
  return margin;
}

// Builds one random graph around `primitive` and returns the ids of the
// operand nodes whose gradients should be checked.
std::vector<int> build_case(const std::string& primitive, Graph& g, SeededRng& rng) {
  if (primitive == "matmul") {
    const bool ta = rng.uniform() < 0.5, tb = rng.uniform() < 0.5;
    const std::size_t m = 3, k = 4, n = 2;
    const int a = g.input(rng.uniform_tensor(ta ? std::vector<std::size_t>{k, m}
                                                : std::vector<std::size_t>{m, k},
                                             -1.0, 1.0));
    const int b = g.input(rng.uniform_tensor(tb ? std::vector<std::size_t>{n, k}
                                                : std::vector<std::size_t>{k, n},
                                             -1.0, 1.0));
    wrap_scalar(g, rng, g.matmul(a, b, ta, tb));
    return {a, b};
  }
  if (primitive == "matmul_vec") {
    const int a = g.input(rng.uniform_tensor({3, 4}, -1.0, 1.0));
    const int b = g.input(rng.uniform_tensor({4}, -1.0, 1.0));
    wrap_scalar(g, rng, g.matmul(a, b));
    return {a, b};
  }
  if (primitive == "conv2d") {
    const std::size_t kext = rng.uniform() < 0.5 ? 1 : 3;
    const int x = g.input(rng.uniform_tensor({2, 4, 4}, -1.0, 1.0));
    const int k = g.input(rng.uniform_tensor({3, 2, kext, kext}, -1.0, 1.0));
    wrap_scalar(g, rng, g.conv2d(x, k));
    return {x, k};
  }
  if (primitive == "nearest_upsample_2x") {
    const int x = g.input(rng.uniform_tensor({2, 3, 3}, -1.0, 1.0));
    wrap_scalar(g, rng, g.upsample2x(x));
    return {x};
  }
  if (primitive == "maxpool_2x") {
    const int x = g.input(poolable(rng, {2, 4, 4}, 1e-2));
    wrap_scalar(g, rng, g.maxpool2x(x));
    return {x};
  }
  if (primitive == "add") {
    const int a = g.input(rng.uniform_tensor({2, 3, 3}, -1.0, 1.0));
    const int b = g.input(rng.uniform_tensor({2, 3, 3}, -1.0, 1.0));
    wrap_scalar(g, rng, g.add(a, b));
    return {a, b};
  }
  if (primitive == "scale") {
    const int x = g.input(rng.uniform_tensor({2, 3}, -1.0, 1.0));
    wrap_scalar(g, rng, g.scale(x, rng.uniform(-2.0, 2.0)));
    return {x};
  }
  if (primitive == "elementwise_mul") {
    const int a = g.input(rng.uniform_tensor({2, 3, 3}, -1.0, 1.0));
    const int b = g.input(rng.uniform_tensor({2, 3, 3}, -1.0, 1.0));
    wrap_scalar(g, rng, g.mul(a, b));
    return {a, b};
  }
  if (primitive == "relu") {
    const int x = g.input(away_from_zero(rng, {2, 3, 3}));
    wrap_scalar(g, rng, g.relu(x));
    return {x};
  }
  if (primitive == "tanh") {
    const int x = g.input(rng.uniform_tensor({2, 3, 3}, -2.0, 2.0));
    wrap_scalar(g, rng, g.tanh(x));
    return {x};
  }
  if (primitive == "softmax_rows") {
    const int x = g.input(rng.uniform_tensor({3, 4}, -2.0, 2.0));
    wrap_scalar(g, rng, g.softmax_rows(x));
    return {x};
  }
  if (primitive == "affine_channel") {
    const int x = g.input(rng.uniform_tensor({2, 3, 3}, -1.0, 1.0));
    const int s = g.input(rng.uniform_tensor({2}, 0.5, 1.5));
    const int t = g.input(rng.uniform_tensor({2}, -0.5, 0.5));
    wrap_scalar(g, rng, g.affine_channel(x, s, t));
    return {x, s, t};
  }
  if (primitive == "reshape") {
    const int x = g.input(rng.uniform_tensor({2, 6}, -1.0, 1.0));
    wrap_scalar(g, rng, g.reshape(x, {3, 4}));
    return {x};
  }
  if (primitive == "reduce_sum") {
    const int x = g.input(rng.uniform_tensor({2, 3}, -1.0, 1.0));
    g.reduce_sum(g.mul(x, g.input(rng.uniform_tensor({2, 3}, 0.5, 1.5))));
    return {x};
  }
  if (primitive == "full_loss") {
    // The composite objective end to end: mse plus the randconv feature
    // distance, differentiated with respect to the candidate image.
    for (;;) {
      const FeatureExtractor fx = FeatureExtractor::randconv(rng.next_u64(), 2);
      const Tensor target = rng.uniform_tensor({2, 4, 4}, -1.0, 1.0);
      const Tensor candidate = rng.uniform_tensor({2, 4, 4}, -1.0, 1.0);
      const double lambda_feat = rng.uniform(0.1, 2.0);
      Graph probe;
      build_loss_mse_feat(probe, target, probe.input(candidate), fx, lambda_feat);
      if (kink_margin(probe) < 1e-3) continue;
      const int y = g.input(candidate);
      build_loss_mse_feat(g, target, y, fx, lambda_feat);
      return {y};
    }
  }
  throw std::invalid_argument("fd_check: unknown primitive '" + primitive + "'");
}

}  // namespace

const std::vector<std::string>& fd_checked_primitives() {
  static const std::vector<std::string> names = {
      "matmul",      "matmul_vec", "conv2d", "nearest_upsample_2x",
      "maxpool_2x",  "add",        "scale",  "elementwise_mul",
      "relu",        "tanh",       "softmax_rows", "affine_channel",
      "reshape",     "reduce_sum", "full_loss",
  };
  return names;
}

FdCaseResult fd_check_primitive(const std::string& primitive, std::uint64_t seed, int trials,
                                double tolerance) {
  FdCaseResult result;
  result.primitive = primitive;
  result.trials = trials;
  result.worst.tolerance = tolerance;
  result.worst.pass = true;
  for (int t = 0; t < trials; ++t) {
    SeededRng rng = SeededRng(seed).substream(static_cast<std::uint64_t>(t));
    Graph g;
    const std::vector<int> operands = build_case(primitive, g, rng);
    for (int id : operands) widen(result.worst, grad_check(g, id, tolerance));
  }
  return result;
}

std::vector<FdCaseResult> fd_check_all(std::uint64_t seed, int trials, double tolerance) {
  std::vector<FdCaseResult> out;
  std::uint64_t idx = 0;
  for (const std::string& name : fd_checked_primitives()) {
    out.push_back(fd_check_primitive(name, mix_seed(seed, 1000 + idx++), trials, tolerance));
  }
  return out;
}

}  // namespace ganvert
