#pragma once

#include <cstdint>
#include <random>

#include "ganvert/tensor.hpp"

namespace ganvert {

// Deterministic random source. Gaussian draws go through an explicit
// Box-Muller transform rather than std::normal_distribution so the stream is
// identical across standard libraries; substream() derives independent
// generators (per restart, per trial, ...) from a master seed without
// consuming state from the parent.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  SeededRng substream(std::uint64_t index) const;

  std::uint64_t next_u64();
  double uniform();                       // [0,1)
  double uniform(double lo, double hi);   // [lo,hi)
  int uniform_int(int lo, int hi);        // inclusive bounds
  double normal();                        // standard normal
  double normal(double mean, double stddev);

  Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi);
  Tensor normal_tensor(std::vector<std::size_t> shape, double mean = 0.0, double stddev = 1.0);

 private:
  std::uint64_t seed_ = 0;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64-style hash used for substream derivation; exposed so file
// formats and tests can reproduce derived seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace ganvert
