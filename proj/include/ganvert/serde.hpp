#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganvert/generator.hpp"
#include "ganvert/harness.hpp"
#include "ganvert/inversion.hpp"

namespace ganvert {

// Config / artifact parsing problems; derived from invalid_argument so the
// CLI can fold them into the usage-error exit path.
struct serde_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Feature-extractor choice as it appears in config documents.
struct ExtractorSpec {
  std::string kind = "randconv";  // pixel | randconv
  std::uint64_t seed = 0;

  void validate() const;  // throws serde_error
  FeatureExtractor make(std::size_t in_channels) const;
};

// Top-level config document shared by every subcommand; every key is optional
// and falls back to the defaults above, unknown keys are rejected by name.
// The loss section is stored inside `inversion` but serialized as its own
// top-level object.
struct RunConfig {
  GeneratorConfig generator;
  InversionConfig inversion;
  ExtractorSpec extractor;
  std::uint64_t seed = 0;
  std::string weights;  // path of the weight file this run used, if any

  void validate() const;
};

std::string to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& text);

// Inversion artifact: the recovered code plus the full config echo, enough to
// re-render the reconstruction or re-run the inversion byte-for-byte.
struct ResultFile {
  RunConfig config;
  std::string stage;   // latent | dense | dense-unreg
  std::string target;  // path of the inverted image, provenance only
  Tensor z;
  Tensor delta;
  double error_latent = 0.0;
  double error_dense = 0.0;
  int restart_index = 0;
  std::vector<double> trajectory_z;
  std::vector<double> trajectory_delta;
};

std::string to_json(const ResultFile& result);
ResultFile result_from_json(const std::string& text);

std::string to_json(const GapReport& report);
std::string to_json(const Theorem2Report& report);
std::string to_json(const SweepReport& report);

void save_text(const std::string& path, const std::string& text);
std::string load_text(const std::string& path);  // throws std::runtime_error

}  // namespace ganvert
