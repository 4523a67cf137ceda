#include "ganvert/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "ganvert/rng.hpp"

namespace ganvert {

void LossConfig::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!ok(lambda_feat) || !ok(lambda1) || !ok(lambda2)) {
    throw std::invalid_argument("loss config: lambdas must be finite and nonnegative");
  }
}

FeatureExtractor FeatureExtractor::pixel() {
  FeatureExtractor ex;
  ex.kind_ = Kind::pixel;
  return ex;
}

FeatureExtractor FeatureExtractor::randconv(std::uint64_t seed, std::size_t in_channels) {
  if (in_channels == 0) throw std::invalid_argument("randconv: in_channels must be >= 1");
  FeatureExtractor ex;
  ex.kind_ = Kind::randconv;
  ex.seed_ = seed;
  SeededRng rng(seed);
  ex.k1_ = rng.substream(0).normal_tensor({8, in_channels, 3, 3}, 0.0,
                                          1.0 / std::sqrt(9.0 * in_channels));
  ex.k2_ = rng.substream(1).normal_tensor({16, 8, 3, 3}, 0.0, 1.0 / std::sqrt(9.0 * 8.0));
  return ex;
}

int FeatureExtractor::build(Graph& g, int image_node) const {
  if (kind_ == Kind::pixel) return image_node;
  const Tensor& img = g.value(image_node);
  if (img.ndim() != 3 || img.shape[0] != k1_.shape[1]) {
    throw shape_error("randconv: image " + shape_string(img.shape) + " does not match " +
                      std::to_string(k1_.shape[1]) + " input channels");
  }
  if (img.shape[1] % 4 != 0 || img.shape[2] % 4 != 0) {
    throw shape_error("randconv: spatial extents of " + shape_string(img.shape) +
                      " must be divisible by 4");
  }
  int x = g.relu(g.maxpool2x(g.conv2d(image_node, g.input(k1_))));
  x = g.relu(g.maxpool2x(g.conv2d(x, g.input(k2_))));
  return g.reshape(x, {g.value(x).size()});
}

Tensor FeatureExtractor::features(const Tensor& image) const {
  Graph g;
  return g.value(build(g, g.input(image)));
}

double mse(const Tensor& x, const Tensor& y) {
  if (!x.same_shape(y)) {
    throw shape_error("mse: operands differ, " + shape_string(x.shape) + " vs " +
                      shape_string(y.shape));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.data[i] - y.data[i];
    sum += d * d;
  }
  return sum;
}

double loss_mse_feat(const Tensor& x, const Tensor& y, const FeatureExtractor& extractor,
                     double lambda_feat) {
  // Evaluated through the same tape ops the optimizer differentiates, so the
  // reported objective is bitwise identical to the traced one.
  Graph g;
  return g.value(build_loss_mse_feat(g, x, g.input(y), extractor, lambda_feat))[0];
}

int build_loss_mse_feat(Graph& g, const Tensor& target, int y_node,
                        const FeatureExtractor& extractor, double lambda_feat) {
  Tensor target_features;
  if (lambda_feat != 0.0) target_features = extractor.features(target);
  return build_loss_mse_feat(g, target, target_features, y_node, extractor, lambda_feat);
}

int build_loss_mse_feat(Graph& g, const Tensor& target, const Tensor& target_features,
                        int y_node, const FeatureExtractor& extractor, double lambda_feat) {
  if (!target.same_shape(g.value(y_node))) {
    throw shape_error("loss: target " + shape_string(target.shape) + " vs image " +
                      shape_string(g.value(y_node).shape));
  }
  const int neg_target = g.input(scale(target, -1.0));
  const int diff = g.add(y_node, neg_target);
  int total = g.reduce_sum(g.mul(diff, diff));
  if (lambda_feat != 0.0) {
    const int fy = extractor.build(g, y_node);
    const int neg_ft = g.input(scale(target_features, -1.0));
    const int fdiff = g.add(fy, neg_ft);
    total = g.add(total, g.scale(g.reduce_sum(g.mul(fdiff, fdiff)), lambda_feat));
  }
  return total;
}

double latent_prior_penalty(const Tensor& z) { return squared_norm(z); }

double l1_penalty(const Tensor& delta) {
  double sum = 0.0;
  for (double v : delta.data) sum += std::abs(v);
  return sum;
}

}  // namespace ganvert
