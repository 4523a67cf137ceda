#include "ganvert/serde.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"

using namespace ganvert;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("ganvert-serde-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string thrown_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("run config round-trips through json") {
  RunConfig config;
  config.generator.d_z = 5;
  config.generator.dense_out = {8, 2, 2};
  config.generator.block_channels = {6, 4};
  config.generator.attention_stage = 0;
  config.generator.out_channels = 1;
  config.generator.out_resolution = 8;
  config.inversion.steps_z = 17;
  config.inversion.lr_delta = 0.0125;
  config.inversion.plateau_tolerance = 1e-9;
  config.inversion.loss.lambda_feat = 0.1;
  config.inversion.loss.lambda2 = 2.5e-3;
  config.extractor.kind = "pixel";
  config.extractor.seed = 99;
  config.seed = 1234567890123456789ull;
  config.weights = "runs/w.gw";

  RunConfig back = run_config_from_json(to_json(config));
  CHECK(back.generator.d_z == 5);
  CHECK(back.generator.dense_out == std::array<std::size_t, 3>{8, 2, 2});
  CHECK(back.generator.block_channels == std::vector<std::size_t>{6, 4});
  CHECK(back.generator.attention_stage == 0);
  CHECK(back.generator.out_channels == 1);
  CHECK(back.generator.out_resolution == 8);
  CHECK(back.inversion.steps_z == 17);
  CHECK(back.inversion.lr_delta == 0.0125);
  CHECK(back.inversion.plateau_tolerance == 1e-9);
  CHECK(back.inversion.loss.lambda_feat == 0.1);
  CHECK(back.inversion.loss.lambda2 == 2.5e-3);
  CHECK(back.extractor.kind == "pixel");
  CHECK(back.extractor.seed == 99);
  CHECK(back.seed == 1234567890123456789ull);
  CHECK(back.weights == "runs/w.gw");

  // Serialization is a fixed point once parsed.
  CHECK(to_json(back) == to_json(config));
}

TEST_CASE("empty and partial documents fall back to defaults") {
  RunConfig defaults = run_config_from_json("{}");
  CHECK(defaults.generator.d_z == 16);
  CHECK(defaults.inversion.steps_z == 400);
  CHECK(defaults.inversion.loss.lambda2 == 0.05);
  CHECK(defaults.extractor.kind == "randconv");
  CHECK(defaults.seed == 0);
  CHECK(defaults.weights.empty());

  RunConfig partial = run_config_from_json(R"({"loss": {"lambda2": 0.5}, "seed": 3})");
  CHECK(partial.inversion.loss.lambda2 == 0.5);
  CHECK(partial.inversion.loss.lambda1 == 0.01);
  CHECK(partial.seed == 3);
}

TEST_CASE("unknown keys are rejected by name at every level") {
  auto message_for = [](const std::string& text) {
    return thrown_message([&] { run_config_from_json(text); });
  };
  CHECK_THROWS_AS(run_config_from_json(R"({"generatr": {}})"), serde_error);
  CHECK(message_for(R"({"generatr": {}})").find("generatr") != std::string::npos);
  CHECK(message_for(R"({"generator": {"dz": 4}})").find("dz") != std::string::npos);
  CHECK(message_for(R"({"loss": {"lambda3": 1}})").find("lambda3") != std::string::npos);
  CHECK(message_for(R"({"inversion": {"momentum": 0.9}})").find("momentum") !=
        std::string::npos);
  CHECK(message_for(R"({"extractor": {"width": 8}})").find("width") != std::string::npos);
}

TEST_CASE("malformed documents and bad values are usage errors") {
  CHECK_THROWS_AS(run_config_from_json("not json"), serde_error);
  CHECK_THROWS_AS(run_config_from_json("[1,2]"), serde_error);
  CHECK_THROWS_AS(run_config_from_json(R"({"seed": "seven"})"), serde_error);
  CHECK_THROWS_AS(run_config_from_json(R"({"generator": {"dense_out": [4, 2]}})"), serde_error);
  CHECK_THROWS_AS(run_config_from_json(R"({"extractor": {"kind": "vgg"}})"), serde_error);
  // Structurally fine but semantically invalid settings still fail validation.
  CHECK_THROWS_AS(run_config_from_json(R"({"inversion": {"restarts": 0}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_config_from_json(R"({"loss": {"lambda1": -1}})"), std::invalid_argument);
}

TEST_CASE("extractor spec builds the matching feature map") {
  ExtractorSpec pixel{"pixel", 0};
  CHECK(pixel.make(3).kind() == FeatureExtractor::Kind::pixel);
  ExtractorSpec rc{"randconv", 12};
  FeatureExtractor fx = rc.make(3);
  CHECK(fx.kind() == FeatureExtractor::Kind::randconv);
  CHECK(fx.seed() == 12);
  ExtractorSpec bad{"vgg", 0};
  CHECK_THROWS_AS(bad.validate(), serde_error);
}

TEST_CASE("result files round-trip bit-for-bit") {
  ResultFile r;
  r.config.seed = 41;
  r.config.weights = "w.gw";
  r.stage = "dense";
  r.target = "img.ppm";
  r.z = Tensor::from({3}, {0.1, -3.5e300, 1e-17});
  r.delta = Tensor::from({4}, {0.0, 3.141592653589793, -2.0 / 3.0, 5e-324});
  r.error_latent = 0.12345678901234567;
  r.error_dense = 1e-9;
  r.restart_index = 6;
  r.trajectory_z = {3.0, 2.0, 1.0};
  r.trajectory_delta = {0.5};

  ResultFile back = result_from_json(to_json(r));
  CHECK(back.config.seed == 41);
  CHECK(back.config.weights == "w.gw");
  CHECK(back.stage == "dense");
  CHECK(back.target == "img.ppm");
  REQUIRE(back.z.shape == std::vector<std::size_t>{3});
  REQUIRE(back.delta.shape == std::vector<std::size_t>{4});
  for (std::size_t i = 0; i < 3; ++i) CHECK(back.z.data[i] == r.z.data[i]);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.delta.data[i] == r.delta.data[i]);
  CHECK(back.error_latent == r.error_latent);
  CHECK(back.error_dense == r.error_dense);
  CHECK(back.restart_index == 6);
  CHECK(back.trajectory_z == r.trajectory_z);
  CHECK(back.trajectory_delta == r.trajectory_delta);

  CHECK_THROWS_AS(result_from_json(R"({"stage": "latent"})"), serde_error);
  CHECK_THROWS_AS(result_from_json(R"({"run_config": {}, "z": [1], "codename": 1})"),
                  serde_error);
}

TEST_CASE("report serializers emit well-formed json") {
  GapReport gap;
  gap.master_seed = 9;
  GapRecord rec;
  rec.kind = TargetKind::composite;
  rec.target_seed = 5;
  rec.ok = true;
  rec.error_latent = 2.0;
  rec.error_dense = 1.0;
  rec.relative_mse_latent = 0.25;
  gap.records.push_back(rec);
  GapSummary sum;
  sum.kind = TargetKind::composite;
  sum.count = 1;
  sum.median_latent = 2.0;
  gap.summaries.push_back(sum);

  nlohmann::json jg = nlohmann::json::parse(to_json(gap));
  CHECK(jg["master_seed"] == 9);
  CHECK(jg["records"][0]["kind"] == "composite");
  CHECK(jg["records"][0]["error_dense"] == 1.0);
  CHECK(jg["summaries"][0]["count"] == 1);
  CHECK(jg["summaries"][0]["median_latent"] == 2.0);

  Theorem2Report thm;
  thm.d_z = 3;
  thm.rank = 3;
  thm.all_pass = true;
  Theorem2Trial trial;
  trial.seed = 8;
  trial.pass = true;
  trial.gap_z_route = 1e-9;
  thm.trials.push_back(trial);
  nlohmann::json jt = nlohmann::json::parse(to_json(thm));
  CHECK(jt["all_pass"] == true);
  CHECK(jt["trials"][0]["gap_z_route"] == 1e-9);

  SweepReport sweep;
  sweep.master_seed = 2;
  sweep.target_seed = 3;
  sweep.entries.push_back(SweepEntry{0.5, 1.25, 0.75, 4});
  nlohmann::json js = nlohmann::json::parse(to_json(sweep));
  CHECK(js["entries"][0]["lambda2"] == 0.5);
  CHECK(js["entries"][0]["support"] == 4);
}

TEST_CASE("text files round-trip and missing paths throw") {
  TempDir dir;
  const std::string path = dir.file("cfg.json");
  save_text(path, "{\"seed\": 4}");
  CHECK(load_text(path) == "{\"seed\": 4}\n");
  CHECK(run_config_from_json(load_text(path)).seed == 4);
  CHECK_THROWS_AS(load_text(dir.file("missing.json")), std::runtime_error);
  CHECK_THROWS_AS(save_text(dir.file("no/such/dir/x.json"), "{}"), std::runtime_error);
}
