#pragma once

#include <cstdint>
#include <vector>

#include "ganvert/graph.hpp"
#include "ganvert/tensor.hpp"

namespace ganvert {

struct LossConfig {
  double lambda_feat = 1.0;  // feature-distance weight
  double lambda1 = 0.01;     // latent prior weight (||z||^2)
  double lambda2 = 0.05;     // displacement L1 weight
  void validate() const;     // throws std::invalid_argument
};

// Feature map C(.) for the perceptual half of the loss. `pixel` is the
// identity; `randconv` is a fixed seeded two-layer conv net (conv3x3 ->
// maxpool -> relu, channels 8 then 16) with the output flattened. Images must
// have spatial extents divisible by 4 for randconv.
class FeatureExtractor {
 public:
  enum class Kind { pixel, randconv };

  static FeatureExtractor pixel();
  static FeatureExtractor randconv(std::uint64_t seed, std::size_t in_channels);

  Kind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }

  // Appends the feature computation to the tape; returns the feature node.
  int build(Graph& g, int image_node) const;
  Tensor features(const Tensor& image) const;

 private:
  FeatureExtractor() = default;
  Kind kind_ = Kind::pixel;
  std::uint64_t seed_ = 0;
  Tensor k1_, k2_;
};

// Sum-convention squared error: ||x - y||_2^2 over all elements.
double mse(const Tensor& x, const Tensor& y);

// L_mse-feat(x, y) = mse(x, y) + lambda_feat * ||C(x) - C(y)||_2^2.
double loss_mse_feat(const Tensor& x, const Tensor& y, const FeatureExtractor& extractor,
                     double lambda_feat);

// Tape version differentiating with respect to y_node; the target and its
// features enter as constants. The second overload takes the target's
// features precomputed so optimization loops extract them only once.
int build_loss_mse_feat(Graph& g, const Tensor& target, int y_node,
                        const FeatureExtractor& extractor, double lambda_feat);
int build_loss_mse_feat(Graph& g, const Tensor& target, const Tensor& target_features,
                        int y_node, const FeatureExtractor& extractor, double lambda_feat);

double latent_prior_penalty(const Tensor& z);  // ||z||_2^2
double l1_penalty(const Tensor& delta);        // sum |delta_i|

}  // namespace ganvert
