#include "pdfm/config.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"
#include "pdfm/rng.hpp"

namespace pdfm::cli {

using nlohmann::json;

void RunConfig::derive_seeds() {
  synth.rng_seed = Rng::derive(seed, "synth");
  sampler.rng_seed = Rng::derive(seed, "sampler");
  pdfm.rng_seed = Rng::derive(seed, "pdfm");
  ridge_spec.rng_seed = Rng::derive(seed, "downstream");
  mlp_spec.rng_seed = Rng::derive(seed, "downstream");
  gbdt_spec.rng_seed = Rng::derive(seed, "downstream");
  adapter.rng_seed = Rng::derive(seed, "adapter");
}

void RunConfig::validate() const {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  synth.validate();
  graph.validate();
  if (features.clip_sigma <= 0.0) throw ConfigError("features.clip_sigma must be positive");
  if (features.row_drop_missing_threshold <= 0.0 || features.row_drop_missing_threshold > 1.0)
    throw ConfigError("features.row_drop_missing_threshold must be in (0, 1]");
  sampler.validate();
  pdfm.validate();
  ridge_spec.validate();
  mlp_spec.validate();
  gbdt_spec.validate();
  if (idw_power <= 0.0) throw ConfigError("idw.power must be positive");
  if (idw_k < 1) throw ConfigError("idw.k must be >= 1");
  if (eval.holdout_fraction <= 0.0 || eval.holdout_fraction >= 1.0)
    throw ConfigError("eval.holdout_fraction must be in (0, 1)");
  forecast_base.validate();
  forecast_arima.validate();
  adapter.validate();
  if (!synth.series_specs.empty()) {
    const std::size_t steps = synth.series_specs.front().n_steps;
    forecast_split.validate(steps);
  }
  // The model's per-source widths must mirror the generator's block dims.
  for (const auto& [source, width] : pdfm.source_widths) {
    auto it = synth.block_dims.find(source);
    if (it == synth.block_dims.end() || it->second != width)
      throw ConfigError("pdfm.source_widths." + source + " disagrees with synth.block_dims");
  }
}

namespace {

std::vector<synth::LabelSpec> desk_labels() {
  return {
      // Elevation analog: low-noise monotone function of a smooth field.
      {"elevation_analog", synth::LabelTransform::linear, 0, 0.02, false, 0.0},
      {"smooth_mild", synth::LabelTransform::mild_cubic, 1, 0.05, false, 0.0},
      {"neighbor_smooth", synth::LabelTransform::linear, 2, 0.05, false, 0.5},
      // Rough tasks: functions of white-noise factors; coordinates carry
      // almost no signal while the feature blocks carry it all.
      {"rough_linear", synth::LabelTransform::linear, 3, 0.02, true, 0.0},
      {"rough_mild", synth::LabelTransform::mild_cubic, 4, 0.05, true, 0.0},
      {"rough_noiseless", synth::LabelTransform::mild_cubic, 5, 0.0, true, 0.0},
  };
}

synth::SeriesSpec desk_series() {
  synth::SeriesSpec s;
  s.task = "unemployment_analog";
  s.level = "county";
  s.frequency = "monthly";
  s.period = 12;
  s.n_steps = 43;  // 36 context + 1 anchor + 6 test
  s.ar_coefficient = 0.6;
  s.slope_min = -0.002;
  s.slope_max = 0.002;
  s.region_bias_scale = 2.0;
  s.noise_std = 0.05;
  s.level_offset = 10.0;
  s.bias_onset_step = 36;  // the level shift the base forecaster cannot see
  return s;
}

}  // namespace

RunConfig desk_config() {
  RunConfig cfg;
  cfg.preset = "desk";
  cfg.seed = 7;
  cfg.synth.rng_seed = 7;
  cfg.synth.n_states = 5;
  cfg.synth.n_counties = 50;
  cfg.synth.n_postal = 500;
  cfg.synth.latent_dim = 6;
  cfg.synth.spatial_smoothness = {150.0, 200.0, 250.0, 0.0, 0.0, 0.0};
  cfg.synth.label_specs = desk_labels();
  cfg.synth.series_specs = {desk_series()};

  cfg.pdfm = model::PdfmConfig::desk_preset(cfg.synth.block_dims);
  cfg.pdfm.lr_max = 2e-3;
  cfg.pdfm.epochs = 30;
  cfg.pdfm.batch_size = 32;

  // Desk-scale phase-2 shapes; the full-size defaults live on the "paper" preset.
  cfg.mlp_spec.family = downstream::Family::mlp;
  cfg.mlp_spec.mlp_dims = {128, 64, 32};
  cfg.gbdt_spec.family = downstream::Family::gbdt;
  cfg.gbdt_spec.gbdt_max_trees = 300;
  cfg.gbdt_spec.gbdt_min_samples_leaf = 8;

  cfg.forecast_base.family = forecast::ForecastFamily::seasonal_naive;
  cfg.forecast_base.seasonal_period = 12;
  cfg.forecast_arima.family = forecast::ForecastFamily::arima;
  cfg.forecast_arima.p = 1;
  cfg.forecast_arima.d = 1;
  cfg.forecast_arima.q = 1;
  cfg.forecast_split = {36, 37, 43};
  cfg.derive_seeds();
  return cfg;
}

RunConfig paper_config() {
  RunConfig cfg = desk_config();
  cfg.preset = "paper";
  cfg.pdfm = model::PdfmConfig::paper_preset(cfg.synth.block_dims);
  cfg.pdfm.lr_max = 2e-3;
  cfg.pdfm.epochs = 30;
  cfg.pdfm.batch_size = 32;
  cfg.mlp_spec.mlp_dims = {512, 256, 128};
  cfg.gbdt_spec.gbdt_max_trees = 3000;
  cfg.gbdt_spec.gbdt_min_samples_leaf = 40;
  cfg.derive_seeds();
  return cfg;
}

RunConfig config_from_preset(const std::string& name) {
  if (name == "desk") return desk_config();
  if (name == "paper") return paper_config();
  throw ConfigError("unknown preset '" + name + "' (expected \"desk\" or \"paper\")");
}

namespace {

void require_keys(const json& j, const std::string& path,
                  const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown config key: " + (path.empty() ? key : path + "." + key));
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_synth(const json& j, synth::SynthConfig& cfg) {
  require_keys(j, "synth",
               {"n_states", "n_counties", "n_postal", "latent_dim", "spatial_smoothness",
                "block_dims", "feature_noise_std", "labels", "series"});
  read(j, "n_states", cfg.n_states);
  read(j, "n_counties", cfg.n_counties);
  read(j, "n_postal", cfg.n_postal);
  read(j, "latent_dim", cfg.latent_dim);
  read(j, "spatial_smoothness", cfg.spatial_smoothness);
  if (j.contains("block_dims")) cfg.block_dims = j.at("block_dims").get<std::map<std::string, int>>();
  if (j.contains("feature_noise_std"))
    cfg.feature_noise_std = j.at("feature_noise_std").get<std::map<std::string, double>>();
  if (j.contains("labels")) {
    cfg.label_specs.clear();
    for (const auto& jl : j.at("labels")) {
      require_keys(jl, "synth.labels[]",
                   {"task", "transform", "factor", "noise_std", "rough", "neighbor_mix"});
      synth::LabelSpec spec;
      read(jl, "task", spec.task);
      if (jl.contains("transform"))
        spec.transform = synth::label_transform_from_string(jl.at("transform").get<std::string>());
      read(jl, "factor", spec.factor);
      read(jl, "noise_std", spec.noise_std);
      read(jl, "rough", spec.rough);
      read(jl, "neighbor_mix", spec.neighbor_mix);
      cfg.label_specs.push_back(std::move(spec));
    }
  }
  if (j.contains("series")) {
    cfg.series_specs.clear();
    for (const auto& js : j.at("series")) {
      require_keys(js, "synth.series[]",
                   {"task", "level", "frequency", "period", "n_steps", "ar_coefficient",
                    "slope_min", "slope_max", "region_bias_scale", "noise_std",
                    "level_offset", "bias_onset_step"});
      synth::SeriesSpec spec;
      read(js, "task", spec.task);
      read(js, "level", spec.level);
      read(js, "frequency", spec.frequency);
      read(js, "period", spec.period);
      read(js, "n_steps", spec.n_steps);
      read(js, "ar_coefficient", spec.ar_coefficient);
      read(js, "slope_min", spec.slope_min);
      read(js, "slope_max", spec.slope_max);
      read(js, "region_bias_scale", spec.region_bias_scale);
      read(js, "noise_std", spec.noise_std);
      read(js, "level_offset", spec.level_offset);
      read(js, "bias_onset_step", spec.bias_onset_step);
      cfg.series_specs.push_back(std::move(spec));
    }
  }
}

void parse_pdfm(const json& j, model::PdfmConfig& cfg) {
  require_keys(j, "pdfm",
               {"hidden_width", "embedding_width", "partitions", "huber_delta", "lr_max",
                "epochs", "batch_size", "validation_fraction", "share_edge_set_weights",
                "mean_pooling"});
  read(j, "hidden_width", cfg.hidden_width);
  read(j, "embedding_width", cfg.embedding_width);
  read(j, "huber_delta", cfg.huber_delta);
  read(j, "lr_max", cfg.lr_max);
  read(j, "epochs", cfg.epochs);
  read(j, "batch_size", cfg.batch_size);
  read(j, "validation_fraction", cfg.validation_fraction);
  read(j, "share_edge_set_weights", cfg.share_edge_set_weights);
  read(j, "mean_pooling", cfg.mean_pooling);
  if (j.contains("partitions")) {
    cfg.partitions.clear();
    for (const auto& jp : j.at("partitions")) {
      require_keys(jp, "pdfm.partitions[]", {"group", "lo", "hi", "sources"});
      model::Partition p;
      read(jp, "group", p.group);
      read(jp, "lo", p.lo);
      read(jp, "hi", p.hi);
      read(jp, "sources", p.sources);
      cfg.partitions.push_back(std::move(p));
    }
  }
}

void parse_regressors(const json& j, RunConfig& cfg) {
  require_keys(j, "downstream", {"ridge", "mlp", "gbdt"});
  if (j.contains("ridge")) {
    const auto& jr = j.at("ridge");
    require_keys(jr, "downstream.ridge", {"lambda"});
    read(jr, "lambda", cfg.ridge_spec.ridge_lambda);
  }
  if (j.contains("mlp")) {
    const auto& jm = j.at("mlp");
    require_keys(jm, "downstream.mlp", {"dims", "dropout", "lr", "epochs", "batch"});
    read(jm, "dims", cfg.mlp_spec.mlp_dims);
    read(jm, "dropout", cfg.mlp_spec.mlp_dropout);
    read(jm, "lr", cfg.mlp_spec.mlp_lr);
    read(jm, "epochs", cfg.mlp_spec.mlp_epochs);
    read(jm, "batch", cfg.mlp_spec.mlp_batch);
  }
  if (j.contains("gbdt")) {
    const auto& jg = j.at("gbdt");
    require_keys(jg, "downstream.gbdt",
                 {"max_trees", "max_leaves", "min_samples_leaf", "learning_rate", "patience"});
    read(jg, "max_trees", cfg.gbdt_spec.gbdt_max_trees);
    read(jg, "max_leaves", cfg.gbdt_spec.gbdt_max_leaves);
    read(jg, "min_samples_leaf", cfg.gbdt_spec.gbdt_min_samples_leaf);
    read(jg, "learning_rate", cfg.gbdt_spec.gbdt_lr);
    read(jg, "patience", cfg.gbdt_spec.gbdt_patience);
  }
}

void parse_forecaster(const json& j, const std::string& path, forecast::ForecasterSpec& spec) {
  require_keys(j, path, {"family", "p", "d", "q", "seasonal_period"});
  if (j.contains("family"))
    spec.family = forecast::forecast_family_from_string(j.at("family").get<std::string>());
  read(j, "p", spec.p);
  read(j, "d", spec.d);
  read(j, "q", spec.q);
  read(j, "seasonal_period", spec.seasonal_period);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_keys(j, "",
               {"preset", "seed", "output_dir", "workers", "synth", "graph", "features",
                "sampler", "pdfm", "downstream", "idw", "eval", "forecast", "report"});
  RunConfig cfg = config_from_preset(j.value("preset", std::string("desk")));
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("output_dir"))
    cfg.output_dir = std::filesystem::path(j.at("output_dir").get<std::string>());
  read(j, "workers", cfg.workers);

  if (j.contains("synth")) parse_synth(j.at("synth"), cfg.synth);
  if (j.contains("graph")) {
    const auto& jg = j.at("graph");
    require_keys(jg, "graph",
                 {"proximity_radius_miles", "proximity_degree_cap", "similarity_k",
                  "similarity_source"});
    read(jg, "proximity_radius_miles", cfg.graph.proximity_radius_miles);
    read(jg, "proximity_degree_cap", cfg.graph.proximity_degree_cap);
    read(jg, "similarity_k", cfg.graph.similarity_k);
    read(jg, "similarity_source", cfg.graph.similarity_source);
  }
  if (j.contains("features")) {
    const auto& jf = j.at("features");
    require_keys(jf, "features",
                 {"clip_sigma", "clip_before_standardize", "row_drop_missing_threshold"});
    read(jf, "clip_sigma", cfg.features.clip_sigma);
    read(jf, "clip_before_standardize", cfg.features.clip_before_standardize);
    read(jf, "row_drop_missing_threshold", cfg.features.row_drop_missing_threshold);
  }
  if (j.contains("sampler")) {
    const auto& js = j.at("sampler");
    require_keys(js, "sampler", {"max_hops", "fanout", "mode"});
    read(js, "max_hops", cfg.sampler.max_hops);
    if (js.contains("fanout")) {
      if (js.at("fanout").is_number_integer()) {
        cfg.sampler.set_fanout(js.at("fanout").get<int>());
      } else {
        const auto per_set = js.at("fanout").get<std::map<std::string, int>>();
        for (const auto& [name, f] : per_set)
          cfg.sampler.fanout[static_cast<int>(graph::edge_set_from_string(name))] = f;
      }
    }
    if (js.contains("mode"))
      cfg.sampler.mode = sampling::weight_mode_from_string(js.at("mode").get<std::string>());
  }
  if (j.contains("pdfm")) parse_pdfm(j.at("pdfm"), cfg.pdfm);
  if (j.contains("downstream")) parse_regressors(j.at("downstream"), cfg);
  if (j.contains("idw")) {
    const auto& ji = j.at("idw");
    require_keys(ji, "idw", {"power", "k"});
    read(ji, "power", cfg.idw_power);
    read(ji, "k", cfg.idw_k);
  }
  if (j.contains("eval")) {
    const auto& je = j.at("eval");
    require_keys(je, "eval", {"holdout_fraction", "external_embeddings", "modality_slices"});
    read(je, "holdout_fraction", cfg.eval.holdout_fraction);
    if (je.contains("external_embeddings") && !je.at("external_embeddings").is_null())
      cfg.eval.external_embeddings = je.at("external_embeddings").get<std::string>();
    read(je, "modality_slices", cfg.eval.modality_slices);
  }
  if (j.contains("forecast")) {
    const auto& jf = j.at("forecast");
    require_keys(jf, "forecast", {"base", "arima", "adapter", "split"});
    if (jf.contains("base")) parse_forecaster(jf.at("base"), "forecast.base", cfg.forecast_base);
    if (jf.contains("arima"))
      parse_forecaster(jf.at("arima"), "forecast.arima", cfg.forecast_arima);
    if (jf.contains("adapter")) {
      const auto& ja = jf.at("adapter");
      require_keys(ja, "forecast.adapter", {"hidden_dims", "lr", "epochs", "batch"});
      read(ja, "hidden_dims", cfg.adapter.hidden_dims);
      read(ja, "lr", cfg.adapter.lr);
      read(ja, "epochs", cfg.adapter.epochs);
      read(ja, "batch", cfg.adapter.batch);
    }
    if (jf.contains("split")) {
      const auto& js = jf.at("split");
      require_keys(js, "forecast.split", {"p1_end", "p2_end", "p3_end"});
      read(js, "p1_end", cfg.forecast_split.p1_end);
      read(js, "p2_end", cfg.forecast_split.p2_end);
      read(js, "p3_end", cfg.forecast_split.p3_end);
    }
  }
  if (j.contains("report")) {
    const auto& jr = j.at("report");
    require_keys(jr, "report", {"svg"});
    read(jr, "svg", cfg.report.svg);
  }

  // Synth block dims may have changed; keep the model's input map in sync
  // unless the document pinned its own widths via partitions+embedding_width.
  cfg.pdfm.source_widths = cfg.synth.block_dims;
  cfg.derive_seeds();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path));
}

std::string apply_override(const std::string& json_text, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects dotted.path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json j = json_text.empty() ? json::object() : json::parse(json_text);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("--set path has an empty segment: " + path);
    if (dot == std::string::npos) {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const json::parse_error&) {
        parsed = value;  // plain string
      }
      (*node)[key] = parsed;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
  return j.dump();
}

std::string dump_run_config(const RunConfig& cfg) {
  json j;
  j["preset"] = cfg.preset;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir.string();
  j["workers"] = cfg.workers;
  json js;
  js["n_states"] = cfg.synth.n_states;
  js["n_counties"] = cfg.synth.n_counties;
  js["n_postal"] = cfg.synth.n_postal;
  js["latent_dim"] = cfg.synth.latent_dim;
  js["spatial_smoothness"] = cfg.synth.spatial_smoothness;
  js["block_dims"] = cfg.synth.block_dims;
  js["feature_noise_std"] = cfg.synth.feature_noise_std;
  json labels = json::array();
  for (const auto& l : cfg.synth.label_specs)
    labels.push_back({{"task", l.task},
                      {"transform", synth::to_string(l.transform)},
                      {"factor", l.factor},
                      {"noise_std", l.noise_std},
                      {"rough", l.rough},
                      {"neighbor_mix", l.neighbor_mix}});
  js["labels"] = std::move(labels);
  json series = json::array();
  for (const auto& s : cfg.synth.series_specs)
    series.push_back({{"task", s.task},
                      {"level", s.level},
                      {"frequency", s.frequency},
                      {"period", s.period},
                      {"n_steps", s.n_steps},
                      {"ar_coefficient", s.ar_coefficient},
                      {"slope_min", s.slope_min},
                      {"slope_max", s.slope_max},
                      {"region_bias_scale", s.region_bias_scale},
                      {"noise_std", s.noise_std},
                      {"level_offset", s.level_offset},
                      {"bias_onset_step", s.bias_onset_step}});
  js["series"] = std::move(series);
  j["synth"] = std::move(js);
  j["graph"] = {{"proximity_radius_miles", cfg.graph.proximity_radius_miles},
                {"proximity_degree_cap", cfg.graph.proximity_degree_cap},
                {"similarity_k", cfg.graph.similarity_k},
                {"similarity_source", cfg.graph.similarity_source}};
  j["features"] = {{"clip_sigma", cfg.features.clip_sigma},
                   {"clip_before_standardize", cfg.features.clip_before_standardize},
                   {"row_drop_missing_threshold", cfg.features.row_drop_missing_threshold}};
  json fan;
  for (auto set : graph::kAllEdgeSets)
    fan[graph::to_string(set)] = cfg.sampler.fanout[static_cast<int>(set)];
  j["sampler"] = {{"max_hops", cfg.sampler.max_hops},
                  {"fanout", fan},
                  {"mode", sampling::to_string(cfg.sampler.mode)}};
  json parts = json::array();
  for (const auto& p : cfg.pdfm.partitions)
    parts.push_back({{"group", p.group}, {"lo", p.lo}, {"hi", p.hi}, {"sources", p.sources}});
  j["pdfm"] = {{"hidden_width", cfg.pdfm.hidden_width},
               {"embedding_width", cfg.pdfm.embedding_width},
               {"partitions", parts},
               {"huber_delta", cfg.pdfm.huber_delta},
               {"lr_max", cfg.pdfm.lr_max},
               {"epochs", cfg.pdfm.epochs},
               {"batch_size", cfg.pdfm.batch_size},
               {"validation_fraction", cfg.pdfm.validation_fraction},
               {"share_edge_set_weights", cfg.pdfm.share_edge_set_weights},
               {"mean_pooling", cfg.pdfm.mean_pooling}};
  j["downstream"] = {
      {"ridge", {{"lambda", cfg.ridge_spec.ridge_lambda}}},
      {"mlp",
       {{"dims", cfg.mlp_spec.mlp_dims},
        {"dropout", cfg.mlp_spec.mlp_dropout},
        {"lr", cfg.mlp_spec.mlp_lr},
        {"epochs", cfg.mlp_spec.mlp_epochs},
        {"batch", cfg.mlp_spec.mlp_batch}}},
      {"gbdt",
       {{"max_trees", cfg.gbdt_spec.gbdt_max_trees},
        {"max_leaves", cfg.gbdt_spec.gbdt_max_leaves},
        {"min_samples_leaf", cfg.gbdt_spec.gbdt_min_samples_leaf},
        {"learning_rate", cfg.gbdt_spec.gbdt_lr},
        {"patience", cfg.gbdt_spec.gbdt_patience}}}};
  j["idw"] = {{"power", cfg.idw_power}, {"k", cfg.idw_k}};
  j["eval"] = {{"holdout_fraction", cfg.eval.holdout_fraction},
               {"external_embeddings",
                cfg.eval.external_embeddings ? json(*cfg.eval.external_embeddings) : json()},
               {"modality_slices", cfg.eval.modality_slices}};
  auto forecaster_json = [](const forecast::ForecasterSpec& s) {
    return json{{"family", forecast::to_string(s.family)},
                {"p", s.p},
                {"d", s.d},
                {"q", s.q},
                {"seasonal_period", s.seasonal_period}};
  };
  j["forecast"] = {{"base", forecaster_json(cfg.forecast_base)},
                   {"arima", forecaster_json(cfg.forecast_arima)},
                   {"adapter",
                    {{"hidden_dims", cfg.adapter.hidden_dims},
                     {"lr", cfg.adapter.lr},
                     {"epochs", cfg.adapter.epochs},
                     {"batch", cfg.adapter.batch}}},
                   {"split",
                    {{"p1_end", cfg.forecast_split.p1_end},
                     {"p2_end", cfg.forecast_split.p2_end},
                     {"p3_end", cfg.forecast_split.p3_end}}}};
  j["report"] = {{"svg", cfg.report.svg}};
  return j.dump(2) + "\n";
}

}  // namespace pdfm::cli
