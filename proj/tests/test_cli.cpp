#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "pdfm/config.hpp"
#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"
#include "pdfm/model.hpp"
#include "pdfm/pipeline.hpp"
#include "pdfm/sampling.hpp"

using namespace pdfm;
using namespace pdfm::cli;
namespace fs = std::filesystem;

namespace {

/// Tiny end-to-end config: minutes become seconds.
RunConfig micro_config(const fs::path& out) {
  auto cfg = desk_config();
  cfg.synth.n_states = 5;
  cfg.synth.n_counties = 10;
  cfg.synth.n_postal = 80;
  cfg.synth.latent_dim = 3;
  cfg.synth.spatial_smoothness = {150.0, 0.0, 0.0};
  cfg.synth.block_dims = {{"trends", 6}, {"maps", 4}, {"busyness", 3}, {"weather_aq", 4}};
  cfg.synth.feature_noise_std = {
      {"trends", 0.05}, {"maps", 0.05}, {"busyness", 0.05}, {"weather_aq", 0.05}};
  cfg.synth.label_specs = {
      {"smooth", synth::LabelTransform::linear, 0, 0.02, false, 0.0},
      {"rough", synth::LabelTransform::linear, 1, 0.02, true, 0.0},
  };
  cfg.synth.series_specs[0].task = "panel";
  cfg.pdfm.source_widths = cfg.synth.block_dims;
  cfg.pdfm.hidden_width = 16;
  cfg.pdfm.embedding_width = 6;
  cfg.pdfm.partitions = {
      {"trends", 0, 2, {"trends"}},
      {"maps_busyness", 2, 4, {"maps", "busyness"}},
      {"weather_aq", 4, 6, {"weather_aq"}},
  };
  cfg.pdfm.epochs = 2;
  cfg.mlp_spec.mlp_dims = {8, 4, 2};
  cfg.mlp_spec.mlp_epochs = 3;
  cfg.gbdt_spec.gbdt_min_samples_leaf = 4;
  cfg.gbdt_spec.gbdt_max_trees = 20;
  cfg.adapter.epochs = 40;
  cfg.output_dir = out;
  cfg.derive_seeds();
  cfg.validate();
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PDFM_BIN) + " " + args + " >/dev/null 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST(Config, PresetsValidate) {
  auto desk = desk_config();
  desk.validate();
  EXPECT_EQ(desk.pdfm.embedding_width, 48);
  auto paper = paper_config();
  paper.validate();
  EXPECT_EQ(paper.pdfm.embedding_width, 330);
  EXPECT_EQ(paper.pdfm.partitions[2].lo, 256u);
  EXPECT_EQ(paper.gbdt_spec.gbdt_max_trees, 3000);
  EXPECT_EQ(paper.mlp_spec.mlp_dims, (std::vector<int>{512, 256, 128}));
  EXPECT_THROW(config_from_preset("nope"), ConfigError);
}

TEST(Config, UnknownKeysRejectedWithPath) {
  EXPECT_THROW(parse_run_config("{\"nope\": 1}"), ConfigError);
  try {
    parse_run_config("{\"graph\": {\"radius\": 5}}");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("graph.radius"), std::string::npos);
  }
  EXPECT_THROW(parse_run_config("not json"), ConfigError);
}

TEST(Config, OverridesApply) {
  std::string doc = "{}";
  doc = apply_override(doc, "seed=99");
  doc = apply_override(doc, "graph.proximity_radius_miles=50");
  doc = apply_override(doc, "pdfm.epochs=3");
  auto cfg = parse_run_config(doc);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_DOUBLE_EQ(cfg.graph.proximity_radius_miles, 50.0);
  EXPECT_EQ(cfg.pdfm.epochs, 3);
  EXPECT_THROW(apply_override(doc, "novalue"), ConfigError);
}

TEST(Config, SeedDrivesStageSeeds) {
  auto a = parse_run_config("{\"seed\": 1}");
  auto b = parse_run_config("{\"seed\": 2}");
  EXPECT_NE(a.synth.rng_seed, b.synth.rng_seed);
  EXPECT_NE(a.pdfm.rng_seed, b.pdfm.rng_seed);
  EXPECT_NE(a.sampler.rng_seed, a.pdfm.rng_seed);
}

TEST(Config, DumpRoundTrips) {
  auto cfg = desk_config();
  const auto doc = dump_run_config(cfg);
  auto back = parse_run_config(doc);
  EXPECT_EQ(dump_run_config(back), doc);
}

TEST(Pipeline, FullRunProducesReport) {
  const auto out = fs::temp_directory_path() / "pdfm_pipe_full";
  fs::remove_all(out);
  auto cfg = micro_config(out);
  run_pipeline(cfg);

  ASSERT_TRUE(fs::exists(out / "report.json"));
  auto report = nlohmann::json::parse(read_text_file(out / "report.json"));
  const auto& results = report.at("results");
  for (const char* task : {"smooth", "rough"}) {
    ASSERT_TRUE(results.contains(task));
    for (const char* method : {"pdfm_ridge", "pdfm_mlp", "pdfm_gbdt", "idw"}) {
      ASSERT_TRUE(results.at(task).contains(method)) << method;
      for (const char* split : {"interpolation", "extrapolation", "superres"})
        EXPECT_TRUE(results.at(task).at(method).contains(split)) << split;
    }
  }
  EXPECT_TRUE(report.contains("forecast"));
  EXPECT_TRUE(report.at("forecast").contains("panel"));
  for (const char* f :
       {"regions.csv", "labels.csv", "embeddings.csv", "checkpoint.json",
        "training_log.jsonl", "report.csv", "splits.json", "predictions.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_TRUE(fs::exists(out / "maps" / "smooth_idw.svg"));

  // --resume skips everything the second time.
  EXPECT_FALSE(stage_synth(cfg, true));
  EXPECT_FALSE(stage_report(cfg, true));
  fs::remove_all(out);
}

TEST(Pipeline, StaleArtifactNamesStage) {
  const auto out = fs::temp_directory_path() / "pdfm_pipe_stale";
  fs::remove_all(out);
  auto cfg = micro_config(out);
  try {
    stage_eval(cfg);
    FAIL() << "expected StaleArtifactError";
  } catch (const StaleArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("embed"), std::string::npos);
  }
  // synth alone, then build-graph works; train without build-graph would not.
  stage_synth(cfg);
  stage_build_graph(cfg);
  EXPECT_THROW(stage_embed(cfg), StaleArtifactError);
  fs::remove_all(out);
}

TEST(Pipeline, ConfigChangeInvalidatesDownstream) {
  const auto out = fs::temp_directory_path() / "pdfm_pipe_fp";
  fs::remove_all(out);
  auto cfg = micro_config(out);
  stage_synth(cfg);
  EXPECT_TRUE(stage_is_fresh(cfg, "synth"));
  auto cfg2 = cfg;
  cfg2.synth.n_postal = 81;
  EXPECT_FALSE(stage_is_fresh(cfg2, "synth"));
  fs::remove_all(out);
}

TEST(CliBinary, ExitCodes) {
  const auto dir = fs::temp_directory_path() / "pdfm_cli_bin";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Config with a micro world written to disk.
  nlohmann::json doc;
  doc["seed"] = 5;
  doc["output_dir"] = (dir / "out").string();
  doc["synth"]["n_states"] = 5;
  doc["synth"]["n_counties"] = 10;
  doc["synth"]["n_postal"] = 60;
  doc["synth"]["latent_dim"] = 2;
  doc["synth"]["spatial_smoothness"] = {150.0, 0.0};
  doc["synth"]["block_dims"] = {{"trends", 4}, {"maps", 3}, {"busyness", 2}, {"weather_aq", 2}};
  doc["synth"]["labels"] = nlohmann::json::array({{{"task", "t"}, {"factor", 0}}});
  doc["synth"]["series"] = nlohmann::json::array();
  doc["pdfm"] = {{"hidden_width", 8},
                 {"embedding_width", 6},
                 {"epochs", 1},
                 {"partitions",
                  nlohmann::json::array(
                      {{{"group", "trends"}, {"lo", 0}, {"hi", 2}, {"sources", {"trends"}}},
                       {{"group", "maps_busyness"},
                        {"lo", 2},
                        {"hi", 4},
                        {"sources", {"maps", "busyness"}}},
                       {{"group", "weather_aq"},
                        {"lo", 4},
                        {"hi", 6},
                        {"sources", {"weather_aq"}}}})}};
  const auto cfg_path = dir / "config.json";
  write_text_file(cfg_path, doc.dump());

  EXPECT_EQ(run_cli("synth -c " + cfg_path.string()), 0);
  // Rerunning synth with the same seed is byte-identical.
  const auto regions_a = read_text_file(dir / "out" / "regions.csv");
  EXPECT_EQ(run_cli("synth -c " + cfg_path.string()), 0);
  EXPECT_EQ(read_text_file(dir / "out" / "regions.csv"), regions_a);

  // Malformed config -> 2 with a field-level message on stderr.
  write_text_file(dir / "bad.json", "{\"synth\": {\"n_postal\": -3}}");
  EXPECT_EQ(run_cli("synth -c " + (dir / "bad.json").string()), 2);
  write_text_file(dir / "unknown.json", "{\"synth\": {\"postal\": 10}}");
  EXPECT_EQ(run_cli("synth -c " + (dir / "unknown.json").string()), 2);

  // eval before embed -> stale artifact (4). Missing input file -> 3.
  EXPECT_EQ(run_cli("eval -c " + cfg_path.string()), 4);
  EXPECT_EQ(run_cli("synth -c " + (dir / "missing.json").string()), 3);

  // config subcommand prints the resolved document.
  EXPECT_EQ(run_cli("config -p desk"), 0);
  fs::remove_all(dir);
}

TEST(Pipeline, DeskWorldGraphShape) {
  // The desk preset's assembled graph: 550 nodes, all four edge sets present.
  const auto out = fs::temp_directory_path() / "pdfm_desk_graph";
  fs::remove_all(out);
  auto cfg = desk_config();
  cfg.output_dir = out;
  stage_synth(cfg);
  stage_build_graph(cfg);
  auto g = pdfm::graph::import_graph(out / "graph");
  EXPECT_EQ(g.nodes().size(), 550u);
  for (auto set : pdfm::graph::kAllEdgeSets)
    EXPECT_FALSE(g.edge_set(set).edges.empty()) << pdfm::graph::to_string(set);
  EXPECT_EQ(pdfm::sampling::enumerate_seeds(g).size(), 550u);
  // Exactly 1000 containment edges for the 500 postal memberships.
  EXPECT_EQ(g.edge_set(pdfm::graph::EdgeSetName::containment).edges.size(), 1000u);
  fs::remove_all(out);
}

TEST(Pipeline, ExternalEmbeddingsAndModalitySlices) {
  const auto out = fs::temp_directory_path() / "pdfm_pipe_ext";
  fs::remove_all(out);
  auto cfg = micro_config(out);
  stage_synth(cfg);
  stage_build_graph(cfg);
  stage_train(cfg);
  stage_embed(cfg);

  // External table covering every region id, width 2.
  auto table = pdfm::model::read_embeddings_csv(out / "embeddings.csv");
  pdfm::model::EmbeddingTable ext;
  ext.ids = table.ids;
  ext.values = pdfm::Matrix(table.ids.size(), 2);
  for (std::size_t i = 0; i < ext.values.size(); ++i)
    ext.values.flat()[i] = 0.01 * static_cast<double>(i % 17);
  pdfm::model::write_embeddings_csv(ext, out / "external.csv");

  cfg.eval.external_embeddings = (out / "external.csv").string();
  cfg.eval.modality_slices = {"trends"};
  stage_eval(cfg);
  stage_forecast(cfg);
  stage_report(cfg);
  auto report = nlohmann::json::parse(read_text_file(out / "report.json"));
  const auto& rough = report.at("results").at("rough");
  EXPECT_TRUE(rough.contains("pdfmext_gbdt"));
  EXPECT_TRUE(rough.contains("pdfm_trends_gbdt"));
  fs::remove_all(out);
}
