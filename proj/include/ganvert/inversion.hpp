#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "ganvert/generator.hpp"
#include "ganvert/loss.hpp"

namespace ganvert {

struct InversionConfig {
  int steps_z = 400;
  int steps_delta = 800;
  double lr_z = 0.05;
  double lr_delta = 0.01;
  int restarts = 8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LossConfig loss;
  // Early stop: quit a run when the best objective has not improved by more
  // than plateau_tolerance over plateau_window iterations. 0 disables.
  double plateau_tolerance = 0.0;
  int plateau_window = 50;

  void validate() const;  // throws std::invalid_argument
};

// "Code -> image" tape builder. Production decoders wrap the generator; tests
// plug in linear probes so the closed-form oracles exercise this exact
// optimizer.
struct DenseDecoder {
  std::size_t code_dim = 0;
  std::function<int(Graph&, int)> build;  // (tape, code node) -> image node
};

DenseDecoder latent_decoder(const GeneratorBundle& bundle);  // z -> G2(G1(z))
DenseDecoder displaced_decoder(const GeneratorBundle& bundle,
                               Tensor h_base);               // delta -> G2(h_base + delta)
DenseDecoder dense_decoder(const GeneratorBundle& bundle);   // h -> G2(h)

struct OptimizeResult {
  Tensor best;
  std::vector<double> trajectory;  // best-so-far total objective, non-increasing
  double best_objective = std::numeric_limits<double>::infinity();
  int iterations_run = 0;
  bool ok = false;  // false when the run aborted on non-finite values
};

// Minimizes  L_mse-feat(target, decode(v)) + l2_weight*||v||^2 + l1_weight*||v||_1
// by Adam on the smooth part plus, when l1_weight > 0, a proximal
// soft-threshold after every step. The threshold is preconditioned the same
// way as the step, tau_i = lr * l1_weight / (sqrt(vhat_i) + eps); with the
// plain unscaled threshold Adam's scale invariance swamps the shrinkage and
// the iteration's fixed point is the unregularized optimum, whereas the
// preconditioned form keeps exactly the composite objective's stationarity
// condition (grad_i = -l1_weight * sign(v_i) on the support).
OptimizeResult adam_optimize(const DenseDecoder& decoder, const Tensor& target,
                             const FeatureExtractor& extractor, double lambda_feat,
                             double l2_weight, double l1_weight, const Tensor& init, int steps,
                             double lr, const InversionConfig& cfg);

struct LatentStage {
  Tensor z_star;
  std::vector<double> trajectory;
  double objective = 0.0;
  int restart_index = 0;
};
// Best of `restarts` Adam runs from seeded standard-normal initializations
// (substreams of master_seed), objective L_mse-feat + lambda1 * ||z||^2.
LatentStage invert_latent(const Tensor& target, const GeneratorBundle& bundle,
                          const InversionConfig& cfg, std::uint64_t master_seed,
                          const FeatureExtractor& extractor);

struct DenseStage {
  Tensor delta_star;
  std::vector<double> trajectory;
  double objective = 0.0;
};
// Proximal Adam on delta from 0, objective L_mse-feat + lambda2 * ||delta||_1,
// holding z_star fixed.
DenseStage invert_dense(const Tensor& target, const GeneratorBundle& bundle,
                        const Tensor& z_star, const InversionConfig& cfg,
                        const FeatureExtractor& extractor);

struct InversionResult {
  DenseCode code;
  std::vector<double> trajectory_z;
  std::vector<double> trajectory_delta;
  double error_latent = 0.0;  // L_mse-feat of G2(G1(z*)) against the target
  double error_dense = 0.0;   // L_mse-feat of G2(h*) against the target
  int restart_index = 0;
};
InversionResult invert_two_step(const Tensor& target, const GeneratorBundle& bundle,
                                const InversionConfig& cfg, std::uint64_t master_seed,
                                const FeatureExtractor& extractor);

// Baseline: optimize h over the whole dense space (no z stage, no L1) from
// h = G1(z_rand). The returned code stores z_rand and delta = h* - G1(z_rand).
DenseCode invert_dense_unregularized(const Tensor& target, const GeneratorBundle& bundle,
                                     const InversionConfig& cfg, std::uint64_t master_seed,
                                     const FeatureExtractor& extractor);

}  // namespace ganvert
