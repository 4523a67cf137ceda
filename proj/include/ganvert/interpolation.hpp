#pragma once

#include <vector>

#include "ganvert/generator.hpp"

namespace ganvert {

enum class InterpolationMode { latent, dense, delta };

// Endpoints by mode: latent takes two z vectors, dense two h vectors, delta a
// (z*, delta*) pair in (a, b). Frame k sits at alpha = k / (steps - 1) with
// the convex-combination convention alpha * a + (1 - alpha) * b, so frame 0
// renders endpoint b and the last frame renders endpoint a; delta mode walks
// G2(G1(z*) + alpha * delta*) from the latent-only reconstruction to the full
// one.
struct InterpolationSpec {
  InterpolationMode mode = InterpolationMode::latent;
  Tensor a;
  Tensor b;
  int steps = 2;

  void validate(const GeneratorConfig& config) const;  // throws std::invalid_argument/shape_error
};

struct InterpolationResult {
  std::vector<double> alphas;  // one per frame, 0 to 1 inclusive
  std::vector<Tensor> codes;   // dense-layer point h rendered by each frame
  std::vector<Tensor> frames;  // generator outputs, each in [-1, 1]
};

// Frames at alpha 0 and 1 short-circuit to the exact endpoint codes, so the
// boundary renderings are bitwise identical to rendering the endpoints
// directly.
InterpolationResult interpolate(const InterpolationSpec& spec, const GeneratorBundle& bundle);

// Distance from each dense code to the latent-reachable subspace G1(Z):
// ||h - project_to_subspace(h).h_proj||_2 per frame. Zero (up to round-off)
// exactly when the frame can be generated from some latent vector.
std::vector<double> off_subspace_certificate(const std::vector<Tensor>& codes,
                                             const GeneratorBundle& bundle);

}  // namespace ganvert
