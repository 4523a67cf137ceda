#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganvert/inversion.hpp"

namespace ganvert {

// Targets for the quantitative experiments. `generated` images are exactly
// invertible through the latent stage; `delta_perturbed` ones live in the
// dense layer's reach but (generically) off the latent manifold; `composite`
// ones are stitched halves of two generated images.
enum class TargetKind { generated, delta_perturbed, composite };

const char* target_kind_name(TargetKind kind);
TargetKind parse_target_kind(const std::string& name);  // throws std::invalid_argument

// G2(G1(z) + delta); the delta_perturbed construction with the displacement
// made explicit, so callers can probe degenerate cases like delta = 0.
Tensor perturbed_target(const GeneratorBundle& bundle, const Tensor& z, const Tensor& delta);

Tensor make_target(const GeneratorBundle& bundle, std::uint64_t seed, TargetKind kind);

struct GapRecord {
  TargetKind kind = TargetKind::generated;
  std::uint64_t target_seed = 0;
  bool ok = false;
  std::string message;           // failure context when !ok
  double error_latent = 0.0;     // L_mse-feat after the latent stage
  double error_dense = 0.0;      // L_mse-feat after the displacement stage
  double relative_mse_latent = 0.0;  // ||x - G(z*)||^2 / ||x||^2, pixel space
};

struct GapSummary {
  TargetKind kind = TargetKind::generated;
  std::size_t count = 0;
  double median_latent = 0.0, q1_latent = 0.0, q3_latent = 0.0;
  double median_dense = 0.0, q1_dense = 0.0, q3_dense = 0.0;
  double median_relative_mse_latent = 0.0;
};

struct GapReport {
  std::uint64_t master_seed = 0;
  std::vector<GapRecord> records;      // n per kind, ordered by (kind, seed index)
  std::vector<GapSummary> summaries;   // one per kind, recomputable from records
};

// Inverts n seeded targets per kind with invert_two_step. A target whose
// inversion throws is recorded as failed and excluded from the summaries; the
// experiment itself keeps going.
GapReport gap_experiment(const GeneratorBundle& bundle, std::size_t n,
                         const std::vector<TargetKind>& kinds, const InversionConfig& cfg,
                         const FeatureExtractor& extractor, std::uint64_t master_seed);

struct Theorem2Trial {
  std::uint64_t seed = 0;
  bool rank_ok = false;
  double subspace_residual = 0.0;  // ||G1(z) - proj(G1(z))||_2 for a random z
  double gap_z_route = 0.0;        // max |z via latent-route Adam - closed form|
  double gap_h_route = 0.0;        // max |z recovered from dense-route Adam - closed form|
  double gap_between_routes = 0.0;
  bool pass = false;
};

struct Theorem2Report {
  std::size_t d_z = 0;
  std::size_t rank = 0;  // column rank of the bundle's W1
  std::vector<Theorem2Trial> trials;
  bool all_pass = false;
};

// Numerical surrogate for the linear-stage equivalence argument: on seeded
// ridge instances, minimizing over the latent vector directly and minimizing
// over the dense point (with the prior expressed through the least-squares
// pullback) must land on the same minimizer, which the closed form pins down.
Theorem2Report theorem2_report(const GeneratorBundle& bundle, std::size_t trials,
                               std::uint64_t master_seed);

struct SweepEntry {
  double lambda2 = 0.0;
  double error_dense = 0.0;  // loss against the target, no penalty terms
  double l1_norm = 0.0;      // ||delta*||_1
  std::size_t support = 0;   // #{i : |delta*_i| > 1e-6}
};

struct SweepReport {
  std::uint64_t master_seed = 0;
  std::uint64_t target_seed = 0;
  std::vector<SweepEntry> entries;  // one per requested lambda2, input order
};

// One delta_perturbed target, one shared latent stage, then the displacement
// stage once per lambda2.
SweepReport lambda_sweep(const GeneratorBundle& bundle, std::uint64_t target_seed,
                         const std::vector<double>& lambda2s, const InversionConfig& cfg,
                         const FeatureExtractor& extractor, std::uint64_t master_seed);

}  // namespace ganvert
