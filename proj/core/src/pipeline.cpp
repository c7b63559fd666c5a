#include "pdfm/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>

#include <nlohmann/json.hpp>

#include "pdfm/bench.hpp"
#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"
#include "pdfm/forecast.hpp"
#include "pdfm/svg_map.hpp"

namespace pdfm::cli {

using nlohmann::json;

namespace {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json config_json(const RunConfig& cfg) { return json::parse(dump_run_config(cfg)); }

std::string section_dump(const RunConfig& cfg, std::initializer_list<const char*> keys) {
  const json full = config_json(cfg);
  json out;
  for (const char* k : keys) out[k] = full.at(k);
  out["seed"] = cfg.seed;
  return out.dump();
}

std::filesystem::path manifest_path(const RunConfig& cfg, const std::string& stage) {
  return cfg.output_dir / "manifests" / (stage + ".json");
}

void write_manifest(const RunConfig& cfg, const std::string& stage) {
  json j;
  j["stage"] = stage;
  j["fingerprint"] = stage_fingerprint(cfg, stage);
  write_text_file(manifest_path(cfg, stage), j.dump(2) + "\n");
}

void progress(const std::string& line) { std::cout << line << "\n" << std::flush; }

}  // namespace

std::string stage_fingerprint(const RunConfig& cfg, const std::string& stage) {
  if (stage == "synth") return hex64(fnv1a64("synth|" + section_dump(cfg, {"synth"})));
  if (stage == "build-graph")
    return hex64(fnv1a64("graph|" + stage_fingerprint(cfg, "synth") +
                         section_dump(cfg, {"graph", "features"})));
  if (stage == "train")
    return hex64(fnv1a64("train|" + stage_fingerprint(cfg, "build-graph") +
                         section_dump(cfg, {"sampler", "pdfm"})));
  if (stage == "embed")
    return hex64(fnv1a64("embed|" + stage_fingerprint(cfg, "train")));
  if (stage == "eval")
    return hex64(fnv1a64("eval|" + stage_fingerprint(cfg, "embed") +
                         section_dump(cfg, {"downstream", "idw", "eval"})));
  if (stage == "forecast")
    return hex64(fnv1a64("forecast|" + stage_fingerprint(cfg, "embed") +
                         section_dump(cfg, {"forecast"})));
  if (stage == "report")
    return hex64(fnv1a64("report|" + stage_fingerprint(cfg, "eval") +
                         stage_fingerprint(cfg, "forecast") + section_dump(cfg, {"report"})));
  throw ConfigError("unknown stage: " + stage);
}

bool stage_is_fresh(const RunConfig& cfg, const std::string& stage) {
  const auto path = manifest_path(cfg, stage);
  if (!std::filesystem::exists(path)) return false;
  try {
    json j = json::parse(read_text_file(path));
    return j.at("fingerprint").get<std::string>() == stage_fingerprint(cfg, stage);
  } catch (...) {
    return false;
  }
}

void require_stage(const RunConfig& cfg, const std::string& stage) {
  if (!stage_is_fresh(cfg, stage))
    throw StaleArtifactError("stage '" + stage +
                             "' artifacts are missing or stale; rerun `pdfm " + stage + "`");
}

bool stage_synth(const RunConfig& cfg, bool resume) {
  if (resume && stage_is_fresh(cfg, "synth")) {
    progress("synth: up to date, skipped");
    return false;
  }
  auto world = synth::generate_world(cfg.synth);
  auto files = synth::write_world(world, cfg.output_dir);
  write_manifest(cfg, "synth");
  progress("synth: wrote " + std::to_string(files.size()) + " files to " +
           cfg.output_dir.string());
  return true;
}

namespace {

/// Standardized (or clip-then-standardized) block over all region rows,
/// counties first then postal codes, matching the regions-table order.
features::FeatureBlock prepare_block(const synth::WorldBundle& world,
                                     const std::string& source,
                                     const FeaturePrepConfig& prep) {
  const auto& county = world.county_blocks.at(source);
  const auto& postal = world.postal_blocks.at(source);
  features::FeatureBlock all;
  all.source = source;
  all.columns = postal.columns;
  all.ids = county.ids;
  all.ids.insert(all.ids.end(), postal.ids.begin(), postal.ids.end());
  all.values = Matrix(all.ids.size(), postal.values.cols());
  for (std::size_t i = 0; i < county.ids.size(); ++i)
    std::copy(county.values.row(i).begin(), county.values.row(i).end(),
              all.values.row(i).begin());
  for (std::size_t i = 0; i < postal.ids.size(); ++i)
    std::copy(postal.values.row(i).begin(), postal.values.row(i).end(),
              all.values.row(county.ids.size() + i).begin());

  all = features::impute_missing(all);
  if (prep.clip_before_standardize) {
    auto stats0 = features::fit_standardizer(all, prep.clip_sigma);
    for (std::size_t i = 0; i < all.values.rows(); ++i)
      for (std::size_t j = 0; j < all.values.cols(); ++j) {
        const double lo = stats0.mean[j] - prep.clip_sigma * stats0.std[j];
        const double hi = stats0.mean[j] + prep.clip_sigma * stats0.std[j];
        all.values.at(i, j) = std::clamp(all.values.at(i, j), lo, hi);
      }
    auto stats = features::fit_standardizer(all, 1e9);
    return features::apply_standardizer(all, stats);
  }
  auto stats = features::fit_standardizer(all, prep.clip_sigma);
  return features::apply_standardizer(all, stats);
}

}  // namespace

bool stage_build_graph(const RunConfig& cfg, bool resume) {
  require_stage(cfg, "synth");
  if (resume && stage_is_fresh(cfg, "build-graph")) {
    progress("build-graph: up to date, skipped");
    return false;
  }
  auto world = synth::read_world(cfg.synth, cfg.output_dir);
  std::map<std::string, features::FeatureBlock> blocks;
  for (const auto& [source, dim] : cfg.synth.block_dims)
    blocks[source] = prepare_block(world, source, cfg.features);

  auto [prox_postal, prox_county] = graph::build_proximity_edges(world.regions, cfg.graph);
  auto containment = graph::build_containment_edges(world.regions);
  auto similarity = graph::build_similarity_edges(
      world.regions, blocks.at(cfg.graph.similarity_source), cfg.graph.similarity_k);
  auto g = graph::assemble_graph(
      world.regions,
      {std::move(prox_postal), std::move(prox_county), std::move(containment),
       std::move(similarity)},
      std::move(blocks));
  graph::export_graph(g, cfg.output_dir / "graph");
  write_manifest(cfg, "build-graph");
  progress("build-graph: " + std::to_string(g.nodes().size()) + " nodes");
  return true;
}

bool stage_train(const RunConfig& cfg, bool resume) {
  require_stage(cfg, "build-graph");
  if (resume && stage_is_fresh(cfg, "train")) {
    progress("train: up to date, skipped");
    return false;
  }
  auto g = graph::import_graph(cfg.output_dir / "graph");
  auto result = model::train_pdfm(g, cfg.pdfm, cfg.sampler);
  model::save_checkpoint(result.model, cfg.output_dir / "checkpoint.json");
  std::string log;
  for (const auto& e : result.history) {
    json line = {{"epoch", e.epoch},
                 {"train_loss", e.train_loss},
                 {"val_loss", e.val_loss},
                 {"lr", e.lr}};
    log += line.dump() + "\n";
  }
  write_text_file(cfg.output_dir / "training_log.jsonl", log);
  write_manifest(cfg, "train");
  if (!result.history.empty())
    progress("train: " + std::to_string(result.history.size()) + " epochs, final loss " +
             format_double(result.history.back().train_loss));
  return true;
}

bool stage_embed(const RunConfig& cfg, bool resume) {
  require_stage(cfg, "train");
  if (resume && stage_is_fresh(cfg, "embed")) {
    progress("embed: up to date, skipped");
    return false;
  }
  auto g = graph::import_graph(cfg.output_dir / "graph");
  auto m = model::load_checkpoint(cfg.output_dir / "checkpoint.json");
  auto table = model::export_embeddings(m, g, cfg.sampler);
  table.fingerprint = stage_fingerprint(cfg, "embed");
  model::write_embeddings_csv(table, cfg.output_dir / "embeddings.csv");
  write_manifest(cfg, "embed");
  progress("embed: " + std::to_string(table.ids.size()) + " rows, width " +
           std::to_string(table.width()));
  return true;
}

namespace {

json cell_to_json(const bench::CellResult& cell) {
  json j;
  j["task"] = cell.task;
  j["method"] = cell.method;
  j["split"] = bench::to_string(cell.split);
  j["failed"] = cell.failed;
  if (cell.failed) {
    j["error"] = cell.error;
    return j;
  }
  j["metrics"] = cell.metrics;
  j["test_ids"] = cell.test_ids;
  j["y_true"] = cell.y_true;
  j["y_pred"] = cell.y_pred;
  return j;
}

bench::CellResult cell_from_json(const json& j) {
  bench::CellResult cell;
  cell.task = j.at("task").get<std::string>();
  cell.method = j.at("method").get<std::string>();
  cell.split = bench::task_kind_from_string(j.at("split").get<std::string>());
  cell.failed = j.at("failed").get<bool>();
  if (cell.failed) {
    cell.error = j.at("error").get<std::string>();
    return cell;
  }
  cell.metrics = j.at("metrics").get<std::map<std::string, double>>();
  cell.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  cell.y_true = j.at("y_true").get<std::vector<double>>();
  cell.y_pred = j.at("y_pred").get<std::vector<double>>();
  return cell;
}

json split_to_json(const bench::SplitSpec& s) {
  json j;
  j["kind"] = bench::to_string(s.kind);
  j["seed"] = s.rng_seed;
  j["holdout_fraction"] = s.holdout_fraction;
  j["manifest_hash"] = s.manifest_hash;
  j["holdout_groups"] = s.holdout_groups;
  j["train"] = s.train;
  j["validation"] = s.validation;
  j["test"] = s.test;
  return j;
}

bench::SplitSpec split_from_json(const json& j) {
  bench::SplitSpec s;
  s.kind = bench::task_kind_from_string(j.at("kind").get<std::string>());
  s.rng_seed = j.at("seed").get<std::uint64_t>();
  s.holdout_fraction = j.at("holdout_fraction").get<double>();
  s.manifest_hash = j.at("manifest_hash").get<std::string>();
  s.holdout_groups = j.at("holdout_groups").get<std::vector<std::string>>();
  s.train = j.at("train").get<std::vector<std::string>>();
  s.validation = j.at("validation").get<std::vector<std::string>>();
  s.test = j.at("test").get<std::vector<std::string>>();
  return s;
}

}  // namespace

bool stage_eval(const RunConfig& cfg, bool resume) {
  require_stage(cfg, "embed");
  if (resume && stage_is_fresh(cfg, "eval")) {
    progress("eval: up to date, skipped");
    return false;
  }
  auto g = graph::import_graph(cfg.output_dir / "graph");
  auto world = synth::read_world(cfg.synth, cfg.output_dir);
  auto table = model::read_embeddings_csv(cfg.output_dir / "embeddings.csv");
  table.partitions = cfg.pdfm.partitions;

  bench::BenchInputs inputs;
  inputs.graph = &g;
  inputs.labels = &world.labels;
  inputs.embeddings["pdfm"] = table;
  for (const auto& spec : cfg.synth.label_specs)
    inputs.tasks.push_back({spec.task, spec.rough});

  bench::BenchConfig bcfg;
  bcfg.holdout_fraction = cfg.eval.holdout_fraction;
  bcfg.split_seed = Rng::derive(cfg.seed, "splits");
  bcfg.ridge_spec = cfg.ridge_spec;
  bcfg.mlp_spec = cfg.mlp_spec;
  bcfg.gbdt_spec = cfg.gbdt_spec;
  bcfg.idw_power = cfg.idw_power;
  bcfg.idw_k = cfg.idw_k;
  bcfg.methods = bench::BenchConfig::default_methods();
  bcfg.workers = cfg.workers;

  if (cfg.eval.external_embeddings) {
    auto ext = model::read_embeddings_csv(*cfg.eval.external_embeddings);
    inputs.embeddings["pdfm_ext"] = model::concat_external(table, ext);
    bcfg.methods.push_back({"pdfmext_ridge", true, "pdfm_ext", downstream::Family::ridge});
    bcfg.methods.push_back({"pdfmext_gbdt", true, "pdfm_ext", downstream::Family::gbdt});
  }
  for (const auto& group : cfg.eval.modality_slices) {
    inputs.embeddings["pdfm_" + group] = model::slice_modality(table, group);
    bcfg.methods.push_back(
        {"pdfm_" + group + "_gbdt", true, "pdfm_" + group, downstream::Family::gbdt});
  }

  auto report = bench::run_benchmark(inputs, bcfg);
  report.fingerprint = stage_fingerprint(cfg, "eval");

  json j;
  j["fingerprint"] = report.fingerprint;
  json cells = json::array();
  for (const auto& cell : report.cells) cells.push_back(cell_to_json(cell));
  j["cells"] = std::move(cells);
  json splits = json::array();
  for (const auto& s : report.splits) splits.push_back(split_to_json(s));
  j["splits"] = std::move(splits);
  write_text_file(cfg.output_dir / "eval_cells.json", j.dump() + "\n");
  bench::write_predictions_csv(report, cfg.output_dir / "predictions.csv");
  write_manifest(cfg, "eval");
  progress("eval: " + std::to_string(report.cells.size()) + " cells");
  return true;
}

bool stage_forecast(const RunConfig& cfg, bool resume) {
  require_stage(cfg, "embed");
  if (resume && stage_is_fresh(cfg, "forecast")) {
    progress("forecast: up to date, skipped");
    return false;
  }
  auto world = synth::read_world(cfg.synth, cfg.output_dir);
  auto table = model::read_embeddings_csv(cfg.output_dir / "embeddings.csv");

  forecast::ForecastBenchConfig fcfg;
  fcfg.base = cfg.forecast_base;
  fcfg.arima = cfg.forecast_arima;
  fcfg.adapter = cfg.adapter;
  fcfg.m_comparisons = std::max<std::size_t>(world.series.size(), 1);

  json j;
  json tasks = json::object();
  for (const auto& panel : world.series) {
    auto report = forecast::run_forecast_benchmark(panel, cfg.forecast_split, table, fcfg);
    json jt;
    json methods = json::object();
    for (const auto& row : report.methods) {
      methods[row.method] = {{"mape", row.mape},
                             {"region_errors", row.region_errors}};
      forecast::write_forecasts_csv(
          cfg.output_dir / ("forecasts_" + panel.task + "_" + row.method + ".csv"),
          report.region_ids, row.part3_forecasts);
    }
    jt["methods"] = std::move(methods);
    jt["t_test"] = {{"t", report.arima_vs_adapter.t},
                    {"p", report.arima_vs_adapter.p},
                    {"significant", report.arima_vs_adapter.significant},
                    {"m_comparisons", report.arima_vs_adapter.m_comparisons},
                    {"degenerate", report.arima_vs_adapter.degenerate}};
    jt["regions_used"] = report.regions_used;
    jt["regions_dropped"] = report.regions_dropped;
    jt["region_ids"] = report.region_ids;
    tasks[panel.task] = std::move(jt);
  }
  j["tasks"] = std::move(tasks);
  write_text_file(cfg.output_dir / "forecast_report.json", j.dump() + "\n");
  write_manifest(cfg, "forecast");
  progress("forecast: " + std::to_string(world.series.size()) + " panels");
  return true;
}

bool stage_report(const RunConfig& cfg, bool resume) {
  require_stage(cfg, "eval");
  require_stage(cfg, "forecast");
  if (resume && stage_is_fresh(cfg, "report")) {
    progress("report: up to date, skipped");
    return false;
  }
  json eval = json::parse(read_text_file(cfg.output_dir / "eval_cells.json"));
  json fore = json::parse(read_text_file(cfg.output_dir / "forecast_report.json"));

  bench::EvalReport report;
  report.fingerprint = eval.at("fingerprint").get<std::string>();
  for (const auto& jc : eval.at("cells")) report.cells.push_back(cell_from_json(jc));
  for (const auto& js : eval.at("splits")) report.splits.push_back(split_from_json(js));

  json out;
  out["config_fingerprint"] = stage_fingerprint(cfg, "report");
  json results;
  for (const auto& cell : report.cells) {
    json m;
    if (cell.failed) {
      m["failed"] = true;
      m["error"] = cell.error;
    } else {
      for (const auto& [k, v] : cell.metrics) m[k] = v;
    }
    results[cell.task][cell.method][bench::to_string(cell.split)] = std::move(m);
  }
  out["results"] = std::move(results);
  json splits;
  for (const auto& s : report.splits) {
    splits[bench::to_string(s.kind)] = {{"seed", s.rng_seed},
                                        {"holdout_fraction", s.holdout_fraction},
                                        {"manifest_hash", s.manifest_hash},
                                        {"train_count", s.train.size()},
                                        {"validation_count", s.validation.size()},
                                        {"test_count", s.test.size()}};
  }
  out["splits"] = std::move(splits);
  out["forecast"] = fore.at("tasks");
  write_text_file(cfg.output_dir / "report.json", out.dump(2) + "\n");
  bench::write_report_csv(report, cfg.output_dir / "report.csv");
  bench::write_splits_manifest(report, cfg.output_dir / "splits.json");

  if (cfg.report.svg) {
    auto regions = read_csv(cfg.output_dir / "regions.csv");
    std::map<std::string, LatLon> pos;
    for (const auto& row : regions.rows)
      pos[row[0]] = {parse_double(row[2]), parse_double(row[3])};
    std::filesystem::create_directories(cfg.output_dir / "maps");
    for (const auto& cell : report.cells) {
      if (cell.failed || cell.split != bench::TaskKind::interpolation) continue;
      std::vector<bench::MapPoint> points;
      for (std::size_t i = 0; i < cell.test_ids.size(); ++i)
        points.push_back({pos.at(cell.test_ids[i]), cell.y_pred[i]});
      bench::write_choropleth_svg(
          cfg.output_dir / "maps" / (cell.task + "_" + cell.method + ".svg"), points,
          cell.task + " / " + cell.method + " (interpolation test predictions)");
    }
  }
  write_manifest(cfg, "report");
  progress("report: wrote report.json, report.csv, splits.json");
  return true;
}

void run_pipeline(const RunConfig& cfg, bool resume) {
  stage_synth(cfg, resume);
  stage_build_graph(cfg, resume);
  stage_train(cfg, resume);
  stage_embed(cfg, resume);
  stage_eval(cfg, resume);
  stage_forecast(cfg, resume);
  stage_report(cfg, resume);
}

}  // namespace pdfm::cli
