#include "ganvert/inversion.hpp"

#include <cmath>
#include <stdexcept>

#include "ganvert/parallel.hpp"
#include "ganvert/rng.hpp"

namespace ganvert {

void InversionConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("inversion config: " + msg); };
  if (steps_z < 1 || steps_delta < 1) fail("iteration budgets must be >= 1");
  if (!(lr_z > 0.0) || !(lr_delta > 0.0)) fail("learning rates must be > 0");
  if (restarts < 1) fail("restarts must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail("adam betas must lie in [0,1)");
  }
  if (!(epsilon > 0.0)) fail("adam epsilon must be > 0");
  if (!(plateau_tolerance >= 0.0) || !std::isfinite(plateau_tolerance)) {
    fail("plateau tolerance must be finite and >= 0");
  }
  loss.validate();
}

DenseDecoder latent_decoder(const GeneratorBundle& bundle) {
  DenseDecoder d;
  d.code_dim = bundle.config.d_z;
  d.build = [&bundle](Graph& g, int code) { return build_g2(g, build_g1(g, code, bundle), bundle); };
  return d;
}

DenseDecoder displaced_decoder(const GeneratorBundle& bundle, Tensor h_base) {
  if (h_base.ndim() != 1 || h_base.shape[0] != bundle.config.d1()) {
    throw shape_error("displaced decoder: h_base has shape " + shape_string(h_base.shape) +
                      ", want [" + std::to_string(bundle.config.d1()) + "]");
  }
  DenseDecoder d;
  d.code_dim = bundle.config.d1();
  d.build = [&bundle, base = std::move(h_base)](Graph& g, int code) {
    return build_g2(g, g.add(code, g.input(base)), bundle);
  };
  return d;
}

DenseDecoder dense_decoder(const GeneratorBundle& bundle) {
  DenseDecoder d;
  d.code_dim = bundle.config.d1();
  d.build = [&bundle](Graph& g, int code) { return build_g2(g, code, bundle); };
  return d;
}

OptimizeResult adam_optimize(const DenseDecoder& decoder, const Tensor& target,
                             const FeatureExtractor& extractor, double lambda_feat,
                             double l2_weight, double l1_weight, const Tensor& init, int steps,
                             double lr, const InversionConfig& cfg) {
  if (init.ndim() != 1 || init.shape[0] != decoder.code_dim) {
    throw shape_error("optimize: init code has shape " + shape_string(init.shape) + ", want [" +
                      std::to_string(decoder.code_dim) + "]");
  }

  Tensor target_features;
  if (lambda_feat != 0.0) target_features = extractor.features(target);

  // One tape per evaluation; returns the smooth objective node and the code node.
  auto trace = [&](const Tensor& v, Graph& g, int& code_node) {
    code_node = g.input(v);
    const int image = decoder.build(g, code_node);
    int j = build_loss_mse_feat(g, target, target_features, image, extractor, lambda_feat);
    if (l2_weight != 0.0) {
      j = g.add(j, g.scale(g.reduce_sum(g.mul(code_node, code_node)), l2_weight));
    }
    return j;
  };
  auto total_objective = [&](double smooth, const Tensor& v) {
    return l1_weight != 0.0 ? smooth + l1_weight * l1_penalty(v) : smooth;
  };

  OptimizeResult out;
  Tensor v = init;
  Tensor m(v.shape, 0.0), s(v.shape, 0.0);
  double b1p = 1.0, b2p = 1.0;
  double window_ref = std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int t = 0; t < steps; ++t) {
    Graph g;
    int code_node = -1;
    const int j = trace(v, g, code_node);
    const double smooth = g.value(j)[0];
    const double total = total_objective(smooth, v);
    if (!std::isfinite(total)) return out;  // ok stays false: run diverged

    if (total < out.best_objective) {
      out.best_objective = total;
      out.best = v;
    }
    out.trajectory.push_back(out.best_objective);
    out.iterations_run = t + 1;
    if (cfg.plateau_tolerance > 0.0 && cfg.plateau_window > 0) {
      if (out.best_objective < window_ref - cfg.plateau_tolerance) {
        window_ref = out.best_objective;
        stale = 0;
      } else if (++stale >= cfg.plateau_window) {
        break;
      }
    }

    const Tensor grad = g.backward_scalar(j, code_node);
    b1p *= cfg.beta1;
    b2p *= cfg.beta2;
    for (std::size_t i = 0; i < v.size(); ++i) {
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * grad.data[i];
      s.data[i] = cfg.beta2 * s.data[i] + (1.0 - cfg.beta2) * grad.data[i] * grad.data[i];
      const double mhat = m.data[i] / (1.0 - b1p);
      const double shat = s.data[i] / (1.0 - b2p);
      const double denom = std::sqrt(shat) + cfg.epsilon;
      double vi = v.data[i] - lr * mhat / denom;
      if (l1_weight != 0.0) {
        const double tau = lr * l1_weight / denom;
        vi = vi > tau ? vi - tau : (vi < -tau ? vi + tau : 0.0);
      }
      v.data[i] = vi;
    }
    if (!v.all_finite()) return out;
  }

  // The loop evaluates before stepping, so score the final iterate too.
  {
    Graph g;
    int code_node = -1;
    const int j = trace(v, g, code_node);
    const double total = total_objective(g.value(j)[0], v);
    if (std::isfinite(total) && total < out.best_objective) {
      out.best_objective = total;
      out.best = v;
    }
    out.trajectory.push_back(out.best_objective);
  }

  out.ok = out.best.size() > 0;
  return out;
}

namespace {

void check_target(const Tensor& target, const GeneratorBundle& bundle) {
  const GeneratorConfig& cfg = bundle.config;
  const std::vector<std::size_t> want = {cfg.out_channels, cfg.out_resolution,
                                         cfg.out_resolution};
  if (target.shape != want) {
    throw shape_error("inversion: target has shape " + shape_string(target.shape) + ", want " +
                      shape_string(want));
  }
  if (!target.all_finite()) throw std::invalid_argument("inversion: target has non-finite entries");
}

}  // namespace

LatentStage invert_latent(const Tensor& target, const GeneratorBundle& bundle,
                          const InversionConfig& cfg, std::uint64_t master_seed,
                          const FeatureExtractor& extractor) {
  cfg.validate();
  check_target(target, bundle);
  const DenseDecoder decoder = latent_decoder(bundle);

  std::vector<OptimizeResult> runs(static_cast<std::size_t>(cfg.restarts));
  parallel_for(runs.size(), [&](std::size_t r) {
    Tensor z0 = SeededRng(master_seed).substream(r).normal_tensor({bundle.config.d_z});
    runs[r] = adam_optimize(decoder, target, extractor, cfg.loss.lambda_feat, cfg.loss.lambda1,
                            0.0, z0, cfg.steps_z, cfg.lr_z, cfg);
  });

  int best = -1;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (!runs[r].ok) continue;
    if (best < 0 || runs[r].best_objective < runs[static_cast<std::size_t>(best)].best_objective) {
      best = static_cast<int>(r);
    }
  }
  if (best < 0) throw std::runtime_error("inversion: every latent restart diverged");

  LatentStage stage;
  stage.z_star = runs[static_cast<std::size_t>(best)].best;
  stage.trajectory = std::move(runs[static_cast<std::size_t>(best)].trajectory);
  stage.objective = runs[static_cast<std::size_t>(best)].best_objective;
  stage.restart_index = best;
  return stage;
}

DenseStage invert_dense(const Tensor& target, const GeneratorBundle& bundle,
                        const Tensor& z_star, const InversionConfig& cfg,
                        const FeatureExtractor& extractor) {
  cfg.validate();
  check_target(target, bundle);
  Tensor h_base = g1_forward(z_star, bundle);
  const DenseDecoder decoder = displaced_decoder(bundle, std::move(h_base));

  OptimizeResult run =
      adam_optimize(decoder, target, extractor, cfg.loss.lambda_feat, 0.0, cfg.loss.lambda2,
                    Tensor({bundle.config.d1()}, 0.0), cfg.steps_delta, cfg.lr_delta, cfg);
  if (!run.ok) throw std::runtime_error("inversion: dense stage diverged");

  DenseStage stage;
  stage.delta_star = std::move(run.best);
  stage.trajectory = std::move(run.trajectory);
  stage.objective = run.best_objective;
  return stage;
}

InversionResult invert_two_step(const Tensor& target, const GeneratorBundle& bundle,
                                const InversionConfig& cfg, std::uint64_t master_seed,
                                const FeatureExtractor& extractor) {
  LatentStage latent = invert_latent(target, bundle, cfg, master_seed, extractor);
  DenseStage dense = invert_dense(target, bundle, latent.z_star, cfg, extractor);

  InversionResult result;
  result.code = DenseCode::make(latent.z_star, dense.delta_star, bundle);
  result.trajectory_z = std::move(latent.trajectory);
  result.trajectory_delta = std::move(dense.trajectory);
  result.restart_index = latent.restart_index;
  result.error_latent = loss_mse_feat(target, g2_forward(g1_forward(result.code.z, bundle), bundle).first,
                                      extractor, cfg.loss.lambda_feat);
  result.error_dense =
      loss_mse_feat(target, g2_forward(result.code.h, bundle).first, extractor,
                    cfg.loss.lambda_feat);
  return result;
}

DenseCode invert_dense_unregularized(const Tensor& target, const GeneratorBundle& bundle,
                                     const InversionConfig& cfg, std::uint64_t master_seed,
                                     const FeatureExtractor& extractor) {
  cfg.validate();
  check_target(target, bundle);
  Tensor z_rand = SeededRng(master_seed).substream(0).normal_tensor({bundle.config.d_z});
  Tensor h0 = g1_forward(z_rand, bundle);

  OptimizeResult run = adam_optimize(dense_decoder(bundle), target, extractor,
                                     cfg.loss.lambda_feat, 0.0, 0.0, h0, cfg.steps_delta,
                                     cfg.lr_delta, cfg);
  if (!run.ok) throw std::runtime_error("inversion: unregularized dense run diverged");

  Tensor delta = add(run.best, scale(h0, -1.0));
  return DenseCode::make(std::move(z_rand), std::move(delta), bundle);
}

}  // namespace ganvert
