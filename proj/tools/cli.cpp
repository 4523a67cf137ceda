#include "cli.hpp"

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ganvert/fdcheck.hpp"
#include "ganvert/harness.hpp"
#include "ganvert/image_io.hpp"
#include "ganvert/interpolation.hpp"
#include "ganvert/inversion.hpp"
#include "ganvert/segmentation.hpp"
#include "ganvert/serde.hpp"

namespace ganvert {

namespace {

using nlohmann::json;

RunConfig load_run_config(const std::string& path) {
  return path.empty() ? RunConfig{} : run_config_from_json(load_text(path));
}

// Every artifact ships with the full config echo and the producing command,
// so re-running it reproduces the artifact byte for byte.
void write_manifest_at(const std::string& manifest_path, const std::vector<std::string>& command,
                       const RunConfig& config, const json& extra = json::object()) {
  json j{{"command", command}, {"run_config", json::parse(to_json(config))}};
  for (const auto& item : extra.items()) j[item.key()] = item.value();
  save_text(manifest_path, j.dump(2));
}

// Sidecar manifest for binary artifacts (PPM images, weight files).
void write_manifest(const std::string& artifact, const std::vector<std::string>& command,
                    const RunConfig& config) {
  write_manifest_at(artifact + ".json", command, config, json{{"artifact", artifact}});
}

// Report commands emit JSON already; the echo goes inside the document.
void write_report(const std::string& path, const std::string& report_json,
                  const std::vector<std::string>& command, const RunConfig& config) {
  json j = json::parse(report_json);
  j["command"] = command;
  j["run_config"] = json::parse(to_json(config));
  save_text(path, j.dump(2));
}

Tensor delta_or_zero(const ResultFile& result, const GeneratorBundle& bundle) {
  if (result.delta.size() > 0) return result.delta;
  return Tensor({bundle.config.d1()}, 0.0);
}

Tensor dense_point(const ResultFile& result, const GeneratorBundle& bundle) {
  return add(g1_forward(result.z, bundle), delta_or_zero(result, bundle));
}

// Weight resolution for report commands: an explicit file wins, then the
// config's embedded path, then a fresh seeded initialization.
GeneratorBundle bundle_for(const std::string& weights_flag, RunConfig& config) {
  if (!weights_flag.empty()) {
    config.weights = weights_flag;
    return load_weights(weights_flag);
  }
  if (!config.weights.empty()) return load_weights(config.weights);
  return init_weights(config.generator, config.seed);
}

std::string frame_name(std::size_t index) {
  std::ostringstream name;
  name << "frame_" << std::setw(3) << std::setfill('0') << index << ".ppm";
  return name.str();
}

std::string in_dir(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"ganvert: invert, interpolate and segment a small split generator"};
  app.require_subcommand(1);
  const std::vector<std::string> command(argv + 1, argv + argc);

  CLI::App* cmd_init = app.add_subcommand("init-weights", "Initialize and save generator weights");
  std::string init_config, init_out;
  std::uint64_t init_seed = 0;
  cmd_init->add_option("--config", init_config, "RunConfig JSON (generator section applies)");
  cmd_init->add_option("--seed", init_seed, "Weight initialization seed");
  cmd_init->add_option("--out", init_out, "Output weight file")->required();

  CLI::App* cmd_gen = app.add_subcommand("generate", "Render an image from a seed or a result file");
  std::string gen_weights, gen_out, gen_code, gen_config;
  std::uint64_t gen_seed = 0;
  cmd_gen->add_option("--weights", gen_weights, "Weight file");
  cmd_gen->add_option("--seed", gen_seed, "Latent draw seed");
  cmd_gen->add_option("--code", gen_code, "Result file whose recovered code is rendered");
  cmd_gen->add_option("--config", gen_config, "RunConfig JSON");
  cmd_gen->add_option("--out", gen_out, "Output PPM")->required();

  CLI::App* cmd_invert = app.add_subcommand("invert", "Invert a target image");
  std::string inv_weights, inv_target, inv_config, inv_out, inv_recon;
  std::string inv_stage = "dense";
  std::uint64_t inv_seed = 0;
  cmd_invert->add_option("--weights", inv_weights, "Weight file")->required();
  cmd_invert->add_option("--target", inv_target, "Target PPM")->required();
  cmd_invert->add_option("--config", inv_config, "RunConfig JSON");
  cmd_invert->add_option("--stage", inv_stage, "latent, dense or dense-unreg")
      ->check(CLI::IsMember({"latent", "dense", "dense-unreg"}));
  cmd_invert->add_option("--seed", inv_seed, "Restart seed (overrides the config)");
  cmd_invert->add_option("--out", inv_out, "Result JSON")->required();
  cmd_invert->add_option("--recon", inv_recon, "Reconstruction PPM");

  CLI::App* cmd_interp = app.add_subcommand("interpolate", "Morph between two inversion results");
  std::string it_mode = "latent", it_a, it_b, it_out, it_weights;
  int it_steps = 8;
  cmd_interp->add_option("--mode", it_mode, "latent, dense or delta")
      ->check(CLI::IsMember({"latent", "dense", "delta"}));
  cmd_interp->add_option("--a", it_a, "Result file of endpoint a")->required();
  cmd_interp->add_option("--b", it_b, "Result file of endpoint b")->required();
  cmd_interp->add_option("--steps", it_steps, "Number of frames (>= 2)");
  cmd_interp->add_option("--weights", it_weights, "Weight file (defaults to a's embedded path)");
  cmd_interp->add_option("--out", it_out, "Output directory")->required();

  CLI::App* cmd_seg = app.add_subcommand("segment", "Cluster the attention map of a result");
  std::string sg_weights, sg_code, sg_out;
  std::vector<std::size_t> sg_clusters = {8, 20, 40};
  cmd_seg->add_option("--weights", sg_weights, "Weight file (defaults to the embedded path)");
  cmd_seg->add_option("--code", sg_code, "Result file to segment")->required();
  cmd_seg->add_option("--clusters", sg_clusters, "Cluster counts")->delimiter(',');
  cmd_seg->add_option("--out", sg_out, "Output directory")->required();

  CLI::App* cmd_grad = app.add_subcommand("gradcheck", "Finite-difference check of every case");
  std::uint64_t gc_seed = 0;
  int gc_trials = 100;
  double gc_tolerance = 1e-6;
  cmd_grad->add_option("--seed", gc_seed, "Suite seed");
  cmd_grad->add_option("--trials", gc_trials, "Trials per case");
  cmd_grad->add_option("--tolerance", gc_tolerance, "Max relative deviation");

  CLI::App* cmd_gap = app.add_subcommand("gap", "Latent-vs-dense reconstruction error experiment");
  std::size_t gap_n = 20;
  std::vector<std::string> gap_kinds = {"generated", "delta_perturbed", "composite"};
  std::string gap_config, gap_weights, gap_out;
  std::uint64_t gap_seed = 0;
  cmd_gap->add_option("--n", gap_n, "Targets per kind");
  cmd_gap->add_option("--kinds", gap_kinds, "generated, delta_perturbed, composite")
      ->delimiter(',');
  cmd_gap->add_option("--config", gap_config, "RunConfig JSON");
  cmd_gap->add_option("--weights", gap_weights, "Weight file (default: seeded init)");
  cmd_gap->add_option("--seed", gap_seed, "Master seed (overrides the config)");
  cmd_gap->add_option("--out", gap_out, "Report JSON");

  CLI::App* cmd_thm = app.add_subcommand("theorem2", "Latent-vs-dense route equivalence check");
  std::size_t t2_trials = 10;
  std::string t2_config, t2_weights, t2_out;
  std::uint64_t t2_seed = 0;
  cmd_thm->add_option("--trials", t2_trials, "Seeded instances");
  cmd_thm->add_option("--config", t2_config, "RunConfig JSON");
  cmd_thm->add_option("--weights", t2_weights, "Weight file (default: seeded init)");
  cmd_thm->add_option("--seed", t2_seed, "Master seed (overrides the config)");
  cmd_thm->add_option("--out", t2_out, "Report JSON");

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "Displacement sparsity across lambda2 values");
  std::vector<double> sw_lambdas = {0.0, 0.001, 0.01, 0.1, 1.0, 10.0};
  std::uint64_t sw_seed = 0, sw_target_seed = 1;
  std::string sw_config, sw_weights, sw_out;
  cmd_sweep->add_option("--lambdas", sw_lambdas, "lambda2 values")->delimiter(',');
  cmd_sweep->add_option("--config", sw_config, "RunConfig JSON");
  cmd_sweep->add_option("--weights", sw_weights, "Weight file (default: seeded init)");
  cmd_sweep->add_option("--seed", sw_seed, "Master seed (overrides the config)");
  cmd_sweep->add_option("--target-seed", sw_target_seed, "Seed of the delta-perturbed target");
  cmd_sweep->add_option("--out", sw_out, "Report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cmd_init) {
      RunConfig config = load_run_config(init_config);
      if (cmd_init->count("--seed") > 0) config.seed = init_seed;
      GeneratorBundle bundle = init_weights(config.generator, config.seed);
      save_weights(bundle, init_out);
      config.weights = init_out;
      write_manifest(init_out, command, config);
      std::cout << "wrote " << init_out << " (" << bundle.weights.size() << " tensors, seed "
                << config.seed << ")\n";
    } else if (*cmd_gen) {
      RunConfig config;
      Tensor image;
      if (!gen_code.empty()) {
        const ResultFile result = result_from_json(load_text(gen_code));
        config = result.config;
        const std::string path = gen_weights.empty() ? config.weights : gen_weights;
        if (path.empty()) {
          throw std::invalid_argument(
              "generate: give --weights or a result with an embedded weight path");
        }
        config.weights = path;
        GeneratorBundle bundle = load_weights(path);
        image = g2_forward(dense_point(result, bundle), bundle).first;
      } else {
        if (gen_weights.empty()) {
          throw std::invalid_argument("generate: --weights is required unless --code is given");
        }
        config = load_run_config(gen_config);
        if (cmd_gen->count("--seed") > 0) config.seed = gen_seed;
        config.weights = gen_weights;
        GeneratorBundle bundle = load_weights(gen_weights);
        image = make_target(bundle, config.seed, TargetKind::generated);
      }
      write_ppm(image, gen_out);
      write_manifest(gen_out, command, config);
      std::cout << "wrote " << gen_out << '\n';
    } else if (*cmd_invert) {
      RunConfig config = load_run_config(inv_config);
      config.weights = inv_weights;
      if (cmd_invert->count("--seed") > 0) config.seed = inv_seed;
      GeneratorBundle bundle = load_weights(inv_weights);
      const Tensor target = read_ppm(inv_target);
      const std::vector<std::size_t> want = {bundle.config.out_channels,
                                             bundle.config.out_resolution,
                                             bundle.config.out_resolution};
      if (target.shape != want) {
        throw std::invalid_argument("invert: target is " + shape_string(target.shape) +
                                    " but the generator emits " + shape_string(want));
      }
      const FeatureExtractor fx = config.extractor.make(bundle.config.out_channels);
      const double lf = config.inversion.loss.lambda_feat;

      ResultFile result;
      result.config = config;
      result.stage = inv_stage;
      result.target = inv_target;
      Tensor recon;
      if (inv_stage == "latent") {
        const LatentStage st = invert_latent(target, bundle, config.inversion, config.seed, fx);
        result.z = st.z_star;
        result.delta = Tensor({bundle.config.d1()}, 0.0);
        result.trajectory_z = st.trajectory;
        result.restart_index = st.restart_index;
        recon = full_forward(st.z_star, bundle);
        result.error_latent = result.error_dense = loss_mse_feat(target, recon, fx, lf);
      } else if (inv_stage == "dense") {
        const InversionResult inv = invert_two_step(target, bundle, config.inversion,
                                                    config.seed, fx);
        result.z = inv.code.z;
        result.delta = inv.code.delta;
        result.trajectory_z = inv.trajectory_z;
        result.trajectory_delta = inv.trajectory_delta;
        result.restart_index = inv.restart_index;
        result.error_latent = inv.error_latent;
        result.error_dense = inv.error_dense;
        recon = g2_forward(inv.code.h, bundle).first;
      } else {
        const DenseCode code = invert_dense_unregularized(target, bundle, config.inversion,
                                                          config.seed, fx);
        result.z = code.z;
        result.delta = code.delta;
        recon = g2_forward(code.h, bundle).first;
        result.error_latent = loss_mse_feat(target, full_forward(code.z, bundle), fx, lf);
        result.error_dense = loss_mse_feat(target, recon, fx, lf);
      }
      save_text(inv_out, to_json(result));
      if (!inv_recon.empty()) {
        write_ppm(recon, inv_recon);
        write_manifest(inv_recon, command, config);
      }
      std::cout << "stage " << inv_stage << ": error_latent=" << result.error_latent
                << " error_dense=" << result.error_dense << " -> " << inv_out << '\n';
    } else if (*cmd_interp) {
      const ResultFile ra = result_from_json(load_text(it_a));
      const ResultFile rb = result_from_json(load_text(it_b));
      RunConfig config = ra.config;
      const std::string wpath = it_weights.empty() ? config.weights : it_weights;
      if (wpath.empty()) {
        throw std::invalid_argument(
            "interpolate: give --weights or results with an embedded weight path");
      }
      config.weights = wpath;
      GeneratorBundle bundle = load_weights(wpath);

      InterpolationSpec spec;
      spec.steps = it_steps;
      if (it_mode == "latent") {
        spec.mode = InterpolationMode::latent;
        spec.a = ra.z;
        spec.b = rb.z;
      } else if (it_mode == "dense") {
        spec.mode = InterpolationMode::dense;
        spec.a = dense_point(ra, bundle);
        spec.b = dense_point(rb, bundle);
      } else {
        // z* comes from --a, the displacement from --b; pass the same result
        // twice to walk from its latent-only reconstruction to the full one.
        spec.mode = InterpolationMode::delta;
        spec.a = ra.z;
        spec.b = delta_or_zero(rb, bundle);
      }
      const InterpolationResult res = interpolate(spec, bundle);
      const std::vector<double> off = off_subspace_certificate(res.codes, bundle);

      std::filesystem::create_directories(it_out);
      json frames = json::array();
      for (std::size_t i = 0; i < res.frames.size(); ++i) {
        const std::string name = frame_name(i);
        write_ppm(res.frames[i], in_dir(it_out, name));
        frames.push_back(name);
      }
      write_manifest_at(in_dir(it_out, "manifest.json"), command, config,
                        json{{"mode", it_mode},
                             {"alphas", res.alphas},
                             {"off_subspace", off},
                             {"frames", frames}});
      std::cout << "wrote " << res.frames.size() << " frames to " << it_out << '\n';
    } else if (*cmd_seg) {
      const ResultFile r = result_from_json(load_text(sg_code));
      RunConfig config = r.config;
      const std::string wpath = sg_weights.empty() ? config.weights : sg_weights;
      if (wpath.empty()) {
        throw std::invalid_argument(
            "segment: give --weights or a result with an embedded weight path");
      }
      config.weights = wpath;
      GeneratorBundle bundle = load_weights(wpath);
      const SegmentationResult seg = segment(dense_point(r, bundle), bundle, sg_clusters);

      std::filesystem::create_directories(sg_out);
      json parts = json::array();
      for (const Segmentation& s : seg.segmentations) {
        const std::string name = "segments_k" + std::to_string(s.k) + ".ppm";
        write_ppm(s.rendered, in_dir(sg_out, name));
        parts.push_back(json{{"k", s.k}, {"file", name}, {"labels", s.labels}});
      }
      write_manifest_at(in_dir(sg_out, "manifest.json"), command, config,
                        json{{"grid_h", seg.grid_h},
                             {"grid_w", seg.grid_w},
                             {"segmentations", parts}});
      std::cout << "wrote " << seg.segmentations.size() << " segmentations to " << sg_out
                << '\n';
    } else if (*cmd_grad) {
      const std::vector<FdCaseResult> results = fd_check_all(gc_seed, gc_trials, gc_tolerance);
      bool all = true;
      for (const FdCaseResult& r : results) {
        all = all && r.worst.pass;
        std::cout << (r.worst.pass ? "ok   " : "FAIL ") << r.primitive
                  << " max_rel=" << r.worst.max_rel_dev << '\n';
      }
      if (!all) throw std::runtime_error("gradcheck: tolerance exceeded");
      std::cout << "gradcheck: " << results.size() << " cases, " << gc_trials
                << " trials each, all within " << gc_tolerance << '\n';
    } else if (*cmd_gap) {
      RunConfig config = load_run_config(gap_config);
      if (cmd_gap->count("--seed") > 0) config.seed = gap_seed;
      GeneratorBundle bundle = bundle_for(gap_weights, config);
      std::vector<TargetKind> kinds;
      for (const std::string& name : gap_kinds) kinds.push_back(parse_target_kind(name));
      const FeatureExtractor fx = config.extractor.make(bundle.config.out_channels);
      const GapReport report = gap_experiment(bundle, gap_n, kinds, config.inversion, fx,
                                              config.seed);
      for (const GapSummary& s : report.summaries) {
        std::cout << target_kind_name(s.kind) << ": n=" << s.count
                  << " median_latent=" << s.median_latent << " median_dense=" << s.median_dense
                  << " median_rel_mse=" << s.median_relative_mse_latent << '\n';
      }
      if (!gap_out.empty()) write_report(gap_out, to_json(report), command, config);
    } else if (*cmd_thm) {
      RunConfig config = load_run_config(t2_config);
      if (cmd_thm->count("--seed") > 0) config.seed = t2_seed;
      GeneratorBundle bundle = bundle_for(t2_weights, config);
      const Theorem2Report report = theorem2_report(bundle, t2_trials, config.seed);
      for (const Theorem2Trial& t : report.trials) {
        std::cout << (t.pass ? "ok   " : "FAIL ") << "residual=" << t.subspace_residual
                  << " gap_z=" << t.gap_z_route << " gap_h=" << t.gap_h_route << '\n';
      }
      std::cout << "theorem2: rank " << report.rank << "/" << report.d_z << ", "
                << report.trials.size() << " trials, "
                << (report.all_pass ? "all passed" : "FAILED") << '\n';
      if (!t2_out.empty()) write_report(t2_out, to_json(report), command, config);
      if (!report.all_pass) throw std::runtime_error("theorem2: a trial failed");
    } else if (*cmd_sweep) {
      RunConfig config = load_run_config(sw_config);
      if (cmd_sweep->count("--seed") > 0) config.seed = sw_seed;
      GeneratorBundle bundle = bundle_for(sw_weights, config);
      const FeatureExtractor fx = config.extractor.make(bundle.config.out_channels);
      const SweepReport report = lambda_sweep(bundle, sw_target_seed, sw_lambdas,
                                              config.inversion, fx, config.seed);
      for (const SweepEntry& e : report.entries) {
        std::cout << "lambda2=" << e.lambda2 << " error_dense=" << e.error_dense
                  << " l1=" << e.l1_norm << " support=" << e.support << '\n';
      }
      if (!sw_out.empty()) write_report(sw_out, to_json(report), command, config);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace ganvert
