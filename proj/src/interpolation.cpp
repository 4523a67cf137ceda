#include "ganvert/interpolation.hpp"

#include <cmath>
#include <stdexcept>

#include "ganvert/parallel.hpp"

namespace ganvert {

void InterpolationSpec::validate(const GeneratorConfig& config) const {
  if (steps < 2) throw std::invalid_argument("interpolation: steps must be >= 2");
  auto expect = [](const Tensor& t, std::size_t dim, const char* what) {
    if (t.ndim() != 1 || t.shape[0] != dim) {
      throw shape_error("interpolation: " + std::string(what) + " has shape " +
                        shape_string(t.shape) + ", want [" + std::to_string(dim) + "]");
    }
  };
  switch (mode) {
    case InterpolationMode::latent:
      expect(a, config.d_z, "latent endpoint a");
      expect(b, config.d_z, "latent endpoint b");
      break;
    case InterpolationMode::dense:
      expect(a, config.d1(), "dense endpoint a");
      expect(b, config.d1(), "dense endpoint b");
      break;
    case InterpolationMode::delta:
      expect(a, config.d_z, "latent vector z*");
      expect(b, config.d1(), "displacement delta*");
      break;
  }
}

InterpolationResult interpolate(const InterpolationSpec& spec, const GeneratorBundle& bundle) {
  spec.validate(bundle.config);
  const int last = spec.steps - 1;

  // Resolve both endpoint codes once so alpha in {0, 1} can reuse them
  // verbatim instead of going through the lerp arithmetic.
  Tensor code_at_1, code_at_0;
  switch (spec.mode) {
    case InterpolationMode::latent:
      code_at_1 = g1_forward(spec.a, bundle);
      code_at_0 = g1_forward(spec.b, bundle);
      break;
    case InterpolationMode::dense:
      code_at_1 = spec.a;
      code_at_0 = spec.b;
      break;
    case InterpolationMode::delta:
      code_at_0 = g1_forward(spec.a, bundle);
      code_at_1 = add(code_at_0, spec.b);
      break;
  }

  // Equal endpoints short-circuit: lerp arithmetic would wobble in the last
  // ulp, but a degenerate path must render one identical frame throughout.
  const bool degenerate =
      spec.mode != InterpolationMode::delta && max_abs_diff(spec.a, spec.b) == 0.0;

  InterpolationResult out;
  out.alphas.resize(static_cast<std::size_t>(spec.steps));
  out.codes.resize(static_cast<std::size_t>(spec.steps));
  out.frames.resize(static_cast<std::size_t>(spec.steps));

  for (int k = 0; k <= last; ++k) {
    const double alpha = static_cast<double>(k) / last;
    out.alphas[static_cast<std::size_t>(k)] = alpha;
    Tensor code;
    if (k == 0 || degenerate) {
      code = code_at_0;
    } else if (k == last) {
      code = code_at_1;
    } else {
      switch (spec.mode) {
        case InterpolationMode::latent:
          code = g1_forward(add(scale(spec.a, alpha), scale(spec.b, 1.0 - alpha)), bundle);
          break;
        case InterpolationMode::dense:
          code = add(scale(spec.a, alpha), scale(spec.b, 1.0 - alpha));
          break;
        case InterpolationMode::delta:
          code = add(code_at_0, scale(spec.b, alpha));
          break;
      }
    }
    out.codes[static_cast<std::size_t>(k)] = std::move(code);
  }

  parallel_for(out.codes.size(), [&](std::size_t k) {
    out.frames[k] = g2_forward(out.codes[k], bundle).first;
  });
  return out;
}

std::vector<double> off_subspace_certificate(const std::vector<Tensor>& codes,
                                             const GeneratorBundle& bundle) {
  std::vector<double> distances(codes.size(), 0.0);
  parallel_for(codes.size(), [&](std::size_t i) {
    const Projection p = project_to_subspace(codes[i], bundle);
    distances[i] = std::sqrt(squared_norm(add(codes[i], scale(p.h_proj, -1.0))));
  });
  return distances;
}

}  // namespace ganvert
