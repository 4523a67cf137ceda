#include "ganvert/harness.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ganvert/rng.hpp"

namespace ganvert {

namespace {

// Median / quartiles by the median-of-halves rule (the middle element is
// excluded from both halves when the count is odd).
double median_of(std::vector<double> v, std::size_t lo, std::size_t hi) {
  const std::size_t n = hi - lo;
  std::sort(v.begin() + static_cast<long>(lo), v.begin() + static_cast<long>(hi));
  const std::size_t mid = lo + n / 2;
  return n % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

void quartiles(std::vector<double> v, double& q1, double& median, double& q3) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  if (n < 2) {
    q1 = q3 = median;
    return;
  }
  q1 = median_of(v, 0, n / 2);
  q3 = median_of(v, n % 2 == 1 ? n / 2 + 1 : n / 2, n);
}

std::uint64_t kind_offset(TargetKind kind) {
  switch (kind) {
    case TargetKind::generated: return 0;
    case TargetKind::delta_perturbed: return 1u << 20;
    case TargetKind::composite: return 2u << 20;
  }
  throw std::invalid_argument("target kind: unknown enum value");
}

}  // namespace

const char* target_kind_name(TargetKind kind) {
  switch (kind) {
    case TargetKind::generated: return "generated";
    case TargetKind::delta_perturbed: return "delta_perturbed";
    case TargetKind::composite: return "composite";
  }
  throw std::invalid_argument("target kind: unknown enum value");
}

TargetKind parse_target_kind(const std::string& name) {
  if (name == "generated") return TargetKind::generated;
  if (name == "delta_perturbed") return TargetKind::delta_perturbed;
  if (name == "composite") return TargetKind::composite;
  throw std::invalid_argument("target kind: unknown name '" + name + "'");
}

Tensor perturbed_target(const GeneratorBundle& bundle, const Tensor& z, const Tensor& delta) {
  return g2_forward(add(g1_forward(z, bundle), delta), bundle).first;
}

Tensor make_target(const GeneratorBundle& bundle, std::uint64_t seed, TargetKind kind) {
  const GeneratorConfig& cfg = bundle.config;
  SeededRng rng(seed);
  switch (kind) {
    case TargetKind::generated:
      return full_forward(rng.substream(0).normal_tensor({cfg.d_z}), bundle);
    case TargetKind::delta_perturbed: {
      Tensor z = rng.substream(0).normal_tensor({cfg.d_z});
      Tensor h = g1_forward(z, bundle);
      double scale = 0.0;
      for (double v : h.data) scale += std::abs(v);
      scale /= static_cast<double>(h.size());

      // Sparse displacement: 5% of coordinates, magnitudes matched to the
      // typical |h| entry.
      SeededRng dr = rng.substream(1);
      const std::size_t d1 = cfg.d1();
      const std::size_t support =
          std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.05 * static_cast<double>(d1))));
      std::vector<std::size_t> order(d1);
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = 0; i + 1 < d1; ++i) {  // Fisher-Yates on the index pool
        const std::size_t j = i + static_cast<std::size_t>(
                                      dr.uniform_int(0, static_cast<int>(d1 - i) - 1));
        std::swap(order[i], order[j]);
      }
      Tensor delta({d1}, 0.0);
      for (std::size_t i = 0; i < support; ++i) delta.data[order[i]] = dr.normal(0.0, scale);
      return perturbed_target(bundle, z, delta);
    }
    case TargetKind::composite: {
      Tensor left = full_forward(rng.substream(1).normal_tensor({cfg.d_z}), bundle);
      Tensor right = full_forward(rng.substream(2).normal_tensor({cfg.d_z}), bundle);
      Tensor out = left;
      const std::size_t w = cfg.out_resolution;
      for (std::size_t c = 0; c < cfg.out_channels; ++c) {
        for (std::size_t y = 0; y < cfg.out_resolution; ++y) {
          for (std::size_t x = w / 2; x < w; ++x) out.at(c, y, x) = right.at(c, y, x);
        }
      }
      return out;
    }
  }
  throw std::invalid_argument("target kind: unknown enum value");
}

GapReport gap_experiment(const GeneratorBundle& bundle, std::size_t n,
                         const std::vector<TargetKind>& kinds, const InversionConfig& cfg,
                         const FeatureExtractor& extractor, std::uint64_t master_seed) {
  if (n < 1) throw std::invalid_argument("gap experiment: n must be >= 1");
  if (kinds.empty()) throw std::invalid_argument("gap experiment: no target kinds given");
  cfg.validate();

  GapReport report;
  report.master_seed = master_seed;
  for (const TargetKind kind : kinds) {
    for (std::size_t i = 0; i < n; ++i) {
      GapRecord rec;
      rec.kind = kind;
      rec.target_seed = mix_seed(master_seed, kind_offset(kind) + i);
      try {
        const Tensor target = make_target(bundle, rec.target_seed, kind);
        const InversionResult inv = invert_two_step(target, bundle, cfg,
                                                    mix_seed(rec.target_seed, 1), extractor);
        rec.error_latent = inv.error_latent;
        rec.error_dense = inv.error_dense;
        const Tensor latent_recon = full_forward(inv.code.z, bundle);
        const double denom = squared_norm(target);
        rec.relative_mse_latent = denom > 0.0 ? mse(target, latent_recon) / denom : 0.0;
        rec.ok = true;
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.message = e.what();
      }
      report.records.push_back(std::move(rec));
    }

    GapSummary summary;
    summary.kind = kind;
    std::vector<double> latent, dense, rel;
    for (const GapRecord& rec : report.records) {
      if (rec.kind != kind || !rec.ok) continue;
      latent.push_back(rec.error_latent);
      dense.push_back(rec.error_dense);
      rel.push_back(rec.relative_mse_latent);
    }
    summary.count = latent.size();
    if (!latent.empty()) {
      quartiles(latent, summary.q1_latent, summary.median_latent, summary.q3_latent);
      quartiles(dense, summary.q1_dense, summary.median_dense, summary.q3_dense);
      double q1 = 0.0, q3 = 0.0;
      quartiles(rel, q1, summary.median_relative_mse_latent, q3);
    }
    report.summaries.push_back(std::move(summary));
  }
  return report;
}

namespace {

using EMatrix = Eigen::MatrixXd;
using EVector = Eigen::VectorXd;

EMatrix to_eigen(const Tensor& t) {
  EMatrix m(t.shape[0], t.ndim() == 2 ? t.shape[1] : 1);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = t.data[static_cast<std::size_t>(r) * static_cast<std::size_t>(m.cols()) +
                       static_cast<std::size_t>(c)];
    }
  }
  return m;
}

Tensor from_eigen(const EMatrix& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      t.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = m(r, c);
    }
  }
  return t;
}

// Adam settings that keep the quadratic probes in the damped-descent regime:
// epsilon dominates the second-moment estimate, so the step is lr/epsilon
// times the (momentum-averaged) gradient and converges to round-off.
InversionConfig probe_config() {
  InversionConfig cfg;
  cfg.epsilon = 100.0;
  cfg.loss.lambda_feat = 0.0;
  return cfg;
}

Tensor probe_minimize(const Tensor& system, const Tensor& rhs, double l2_weight, int steps) {
  DenseDecoder dec;
  dec.code_dim = system.shape[1];
  dec.build = [&system](Graph& g, int code) { return g.matmul(g.input(system), code); };
  OptimizeResult run = adam_optimize(dec, rhs, FeatureExtractor::pixel(), 0.0, l2_weight, 0.0,
                                     Tensor({dec.code_dim}, 0.0), steps, 2.0, probe_config());
  if (!run.ok) throw std::runtime_error("theorem2: probe optimization diverged");
  return run.best;
}

}  // namespace

Theorem2Report theorem2_report(const GeneratorBundle& bundle, std::size_t trials,
                               std::uint64_t master_seed) {
  if (trials < 1) throw std::invalid_argument("theorem2: trials must be >= 1");
  constexpr std::size_t probe_rows = 8, probe_cols = 3;
  constexpr double lambda1 = 0.5;

  Theorem2Report report;
  report.d_z = bundle.config.d_z;
  report.rank = matrix_rank(bundle.weight("W1"));
  report.all_pass = true;

  for (std::size_t t = 0; t < trials; ++t) {
    SeededRng rng = SeededRng(master_seed).substream(t);
    Theorem2Trial trial;
    trial.seed = mix_seed(master_seed, t);
    trial.rank_ok = report.rank == report.d_z;

    // A stage-1 point must project onto the subspace with zero residual.
    const Tensor z_probe = rng.normal_tensor({bundle.config.d_z});
    const Tensor h_probe = g1_forward(z_probe, bundle);
    const Projection proj = project_to_subspace(h_probe, bundle);
    trial.subspace_residual = std::sqrt(squared_norm(add(h_probe, scale(proj.h_proj, -1.0))));

    // Ridge instance, conditioned away from singularity so both Adam routes
    // sit comfortably inside the damped-step stability region.
    Tensor w;
    for (std::uint64_t attempt = 0;; ++attempt) {
      w = rng.substream(1000 + attempt).normal_tensor({probe_rows, probe_cols});
      Eigen::JacobiSVD<EMatrix> svd(to_eigen(w));
      if (svd.singularValues()(probe_cols - 1) >= 0.5) break;
    }
    const Tensor x = rng.substream(2).normal_tensor({probe_rows});

    const EMatrix ew = to_eigen(w);
    const EVector ex = to_eigen(x).col(0);
    const EMatrix gram = ew.transpose() * ew;
    const EVector z_closed =
        (gram + lambda1 * EMatrix::Identity(probe_cols, probe_cols)).ldlt().solve(ew.transpose() * ex);

    // Route one: Adam over the latent vector of the probe.
    const Tensor z_route = probe_minimize(w, x, lambda1, 3000);

    // Route two: Adam over the dense point h, the prior pulled back through
    // the least-squares recovery M = (W^T W)^-1 W^T. Stacking [I; sqrt(l1) M]
    // folds ||h - x||^2 + lambda1 ||M h||^2 into one least-squares objective.
    const EMatrix m_pullback = gram.ldlt().solve(ew.transpose());
    EMatrix stacked(probe_rows + probe_cols, probe_rows);
    stacked.topRows(probe_rows) = EMatrix::Identity(probe_rows, probe_rows);
    stacked.bottomRows(probe_cols) = std::sqrt(lambda1) * m_pullback;
    Tensor rhs({probe_rows + probe_cols}, 0.0);
    for (std::size_t i = 0; i < probe_rows; ++i) rhs.data[i] = x.data[i];
    const Tensor h_route = probe_minimize(from_eigen(stacked), rhs, 0.0, 3000);
    const EVector z_from_h = m_pullback * to_eigen(h_route).col(0);

    for (std::size_t i = 0; i < probe_cols; ++i) {
      trial.gap_z_route = std::max(trial.gap_z_route, std::abs(z_route.data[i] - z_closed(static_cast<Eigen::Index>(i))));
      trial.gap_h_route = std::max(trial.gap_h_route, std::abs(z_from_h(static_cast<Eigen::Index>(i)) - z_closed(static_cast<Eigen::Index>(i))));
      trial.gap_between_routes = std::max(
          trial.gap_between_routes, std::abs(z_route.data[i] - z_from_h(static_cast<Eigen::Index>(i))));
    }

    trial.pass = trial.rank_ok && trial.subspace_residual < 1e-8 && trial.gap_z_route <= 1e-6 &&
                 trial.gap_h_route <= 1e-6 && trial.gap_between_routes <= 1e-6;
    report.all_pass = report.all_pass && trial.pass;
    report.trials.push_back(trial);
  }
  return report;
}

SweepReport lambda_sweep(const GeneratorBundle& bundle, std::uint64_t target_seed,
                         const std::vector<double>& lambda2s, const InversionConfig& cfg,
                         const FeatureExtractor& extractor, std::uint64_t master_seed) {
  if (lambda2s.empty()) throw std::invalid_argument("sweep: lambda2 list is empty");
  cfg.validate();

  SweepReport report;
  report.master_seed = master_seed;
  report.target_seed = target_seed;

  const Tensor target = make_target(bundle, target_seed, TargetKind::delta_perturbed);
  const LatentStage latent = invert_latent(target, bundle, cfg, master_seed, extractor);

  for (const double lambda2 : lambda2s) {
    InversionConfig stage_cfg = cfg;
    stage_cfg.loss.lambda2 = lambda2;
    const DenseStage dense = invert_dense(target, bundle, latent.z_star, stage_cfg, extractor);

    SweepEntry entry;
    entry.lambda2 = lambda2;
    entry.l1_norm = l1_penalty(dense.delta_star);
    for (double v : dense.delta_star.data) {
      if (std::abs(v) > 1e-6) ++entry.support;
    }
    const Tensor h = add(g1_forward(latent.z_star, bundle), dense.delta_star);
    entry.error_dense = loss_mse_feat(target, g2_forward(h, bundle).first, extractor,
                                      cfg.loss.lambda_feat);
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace ganvert
