#include "ganvert/serde.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

namespace ganvert {

namespace {

using nlohmann::json;

json parse_document(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw serde_error(std::string(what) + ": " + e.what());
  }
}

void check_keys(const json& j, const std::string& context,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw serde_error(context + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) known = known || item.key() == key;
    if (!known) throw serde_error(context + ": unknown key '" + item.key() + "'");
  }
}

// Optional-field reader: absent keys keep the default already in `out`.
template <typename T>
void read_field(const json& j, const std::string& context, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw serde_error(context + ": bad value for '" + key + "': " + e.what());
  }
}

json generator_to_json(const GeneratorConfig& g) {
  return json{{"d_z", g.d_z},
              {"dense_out", g.dense_out},
              {"block_channels", g.block_channels},
              {"attention_stage", g.attention_stage},
              {"attention_subsample", g.attention_subsample},
              {"out_channels", g.out_channels},
              {"out_resolution", g.out_resolution}};
}

GeneratorConfig generator_from_json(const json& j) {
  GeneratorConfig g;
  check_keys(j, "generator",
             {"d_z", "dense_out", "block_channels", "attention_stage", "attention_subsample",
              "out_channels", "out_resolution"});
  read_field(j, "generator", "d_z", g.d_z);
  read_field(j, "generator", "dense_out", g.dense_out);
  read_field(j, "generator", "block_channels", g.block_channels);
  read_field(j, "generator", "attention_stage", g.attention_stage);
  read_field(j, "generator", "attention_subsample", g.attention_subsample);
  read_field(j, "generator", "out_channels", g.out_channels);
  read_field(j, "generator", "out_resolution", g.out_resolution);
  return g;
}

json loss_to_json(const LossConfig& l) {
  return json{{"lambda_feat", l.lambda_feat}, {"lambda1", l.lambda1}, {"lambda2", l.lambda2}};
}

LossConfig loss_from_json(const json& j) {
  LossConfig l;
  check_keys(j, "loss", {"lambda_feat", "lambda1", "lambda2"});
  read_field(j, "loss", "lambda_feat", l.lambda_feat);
  read_field(j, "loss", "lambda1", l.lambda1);
  read_field(j, "loss", "lambda2", l.lambda2);
  return l;
}

json inversion_to_json(const InversionConfig& c) {
  return json{{"steps_z", c.steps_z},
              {"steps_delta", c.steps_delta},
              {"lr_z", c.lr_z},
              {"lr_delta", c.lr_delta},
              {"restarts", c.restarts},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"epsilon", c.epsilon},
              {"plateau_tolerance", c.plateau_tolerance},
              {"plateau_window", c.plateau_window}};
}

InversionConfig inversion_from_json(const json& j) {
  InversionConfig c;
  check_keys(j, "inversion",
             {"steps_z", "steps_delta", "lr_z", "lr_delta", "restarts", "beta1", "beta2",
              "epsilon", "plateau_tolerance", "plateau_window"});
  read_field(j, "inversion", "steps_z", c.steps_z);
  read_field(j, "inversion", "steps_delta", c.steps_delta);
  read_field(j, "inversion", "lr_z", c.lr_z);
  read_field(j, "inversion", "lr_delta", c.lr_delta);
  read_field(j, "inversion", "restarts", c.restarts);
  read_field(j, "inversion", "beta1", c.beta1);
  read_field(j, "inversion", "beta2", c.beta2);
  read_field(j, "inversion", "epsilon", c.epsilon);
  read_field(j, "inversion", "plateau_tolerance", c.plateau_tolerance);
  read_field(j, "inversion", "plateau_window", c.plateau_window);
  return c;
}

json extractor_to_json(const ExtractorSpec& e) {
  return json{{"kind", e.kind}, {"seed", e.seed}};
}

ExtractorSpec extractor_from_json(const json& j) {
  ExtractorSpec e;
  check_keys(j, "extractor", {"kind", "seed"});
  read_field(j, "extractor", "kind", e.kind);
  read_field(j, "extractor", "seed", e.seed);
  return e;
}

json run_config_to_json(const RunConfig& config) {
  return json{{"generator", generator_to_json(config.generator)},
              {"loss", loss_to_json(config.inversion.loss)},
              {"inversion", inversion_to_json(config.inversion)},
              {"extractor", extractor_to_json(config.extractor)},
              {"seed", config.seed},
              {"weights", config.weights}};
}

RunConfig run_config_from_json_value(const json& j, const std::string& context) {
  RunConfig config;
  check_keys(j, context, {"generator", "loss", "inversion", "extractor", "seed", "weights"});
  if (j.contains("generator")) config.generator = generator_from_json(j.at("generator"));
  if (j.contains("inversion")) config.inversion = inversion_from_json(j.at("inversion"));
  if (j.contains("loss")) config.inversion.loss = loss_from_json(j.at("loss"));
  if (j.contains("extractor")) config.extractor = extractor_from_json(j.at("extractor"));
  read_field(j, context, "seed", config.seed);
  read_field(j, context, "weights", config.weights);
  config.validate();
  return config;
}

Tensor vector_tensor(const json& j, const std::string& context, const char* key) {
  std::vector<double> values;
  read_field(j, context, key, values);
  Tensor t({values.size()});
  t.data = std::move(values);
  return t;
}

const char* kind_key(TargetKind kind) { return target_kind_name(kind); }

}  // namespace

void ExtractorSpec::validate() const {
  if (kind != "pixel" && kind != "randconv") {
    throw serde_error("extractor: unknown kind '" + kind + "' (pixel or randconv)");
  }
}

FeatureExtractor ExtractorSpec::make(std::size_t in_channels) const {
  validate();
  return kind == "pixel" ? FeatureExtractor::pixel()
                         : FeatureExtractor::randconv(seed, in_channels);
}

void RunConfig::validate() const {
  generator.validate();
  inversion.validate();
  extractor.validate();
}

std::string to_json(const RunConfig& config) { return run_config_to_json(config).dump(2); }

RunConfig run_config_from_json(const std::string& text) {
  return run_config_from_json_value(parse_document(text, "run config"), "run config");
}

std::string to_json(const ResultFile& result) {
  json j{{"run_config", run_config_to_json(result.config)},
         {"stage", result.stage},
         {"target", result.target},
         {"z", result.z.data},
         {"delta", result.delta.data},
         {"error_latent", result.error_latent},
         {"error_dense", result.error_dense},
         {"restart_index", result.restart_index},
         {"trajectory_z", result.trajectory_z},
         {"trajectory_delta", result.trajectory_delta}};
  return j.dump(2);
}

ResultFile result_from_json(const std::string& text) {
  const json j = parse_document(text, "result file");
  check_keys(j, "result file",
             {"run_config", "stage", "target", "z", "delta", "error_latent", "error_dense",
              "restart_index", "trajectory_z", "trajectory_delta"});
  ResultFile r;
  if (!j.contains("run_config")) throw serde_error("result file: missing 'run_config'");
  r.config = run_config_from_json_value(j.at("run_config"), "result file run_config");
  read_field(j, "result file", "stage", r.stage);
  read_field(j, "result file", "target", r.target);
  r.z = vector_tensor(j, "result file", "z");
  r.delta = vector_tensor(j, "result file", "delta");
  read_field(j, "result file", "error_latent", r.error_latent);
  read_field(j, "result file", "error_dense", r.error_dense);
  read_field(j, "result file", "restart_index", r.restart_index);
  read_field(j, "result file", "trajectory_z", r.trajectory_z);
  read_field(j, "result file", "trajectory_delta", r.trajectory_delta);
  if (r.z.size() == 0) throw serde_error("result file: missing or empty 'z'");
  return r;
}

std::string to_json(const GapReport& report) {
  json records = json::array();
  for (const GapRecord& rec : report.records) {
    records.push_back(json{{"kind", kind_key(rec.kind)},
                           {"target_seed", rec.target_seed},
                           {"ok", rec.ok},
                           {"message", rec.message},
                           {"error_latent", rec.error_latent},
                           {"error_dense", rec.error_dense},
                           {"relative_mse_latent", rec.relative_mse_latent}});
  }
  json summaries = json::array();
  for (const GapSummary& s : report.summaries) {
    summaries.push_back(json{{"kind", kind_key(s.kind)},
                             {"count", s.count},
                             {"median_latent", s.median_latent},
                             {"q1_latent", s.q1_latent},
                             {"q3_latent", s.q3_latent},
                             {"median_dense", s.median_dense},
                             {"q1_dense", s.q1_dense},
                             {"q3_dense", s.q3_dense},
                             {"median_relative_mse_latent", s.median_relative_mse_latent}});
  }
  json j{{"master_seed", report.master_seed}, {"records", records}, {"summaries", summaries}};
  return j.dump(2);
}

std::string to_json(const Theorem2Report& report) {
  json trials = json::array();
  for (const Theorem2Trial& t : report.trials) {
    trials.push_back(json{{"seed", t.seed},
                          {"rank_ok", t.rank_ok},
                          {"subspace_residual", t.subspace_residual},
                          {"gap_z_route", t.gap_z_route},
                          {"gap_h_route", t.gap_h_route},
                          {"gap_between_routes", t.gap_between_routes},
                          {"pass", t.pass}});
  }
  json j{{"d_z", report.d_z},
         {"rank", report.rank},
         {"all_pass", report.all_pass},
         {"trials", trials}};
  return j.dump(2);
}

std::string to_json(const SweepReport& report) {
  json entries = json::array();
  for (const SweepEntry& e : report.entries) {
    entries.push_back(json{{"lambda2", e.lambda2},
                           {"error_dense", e.error_dense},
                           {"l1_norm", e.l1_norm},
                           {"support", e.support}});
  }
  json j{{"master_seed", report.master_seed},
         {"target_seed", report.target_seed},
         {"entries", entries}};
  return j.dump(2);
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text << '\n';
  if (!out) throw std::runtime_error("could not write '" + path + "'");
}

std::string load_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("could not read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace ganvert
