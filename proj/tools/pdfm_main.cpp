#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pdfm/config.hpp"
#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"
#include "pdfm/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::string out_dir;
  std::int64_t seed = -1;
  int workers = 0;
  std::vector<std::string> overrides;
  bool resume = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "Config document (JSON)");
  cmd->add_option("-p,--preset", args.preset, "Built-in preset: desk or paper");
  cmd->add_option("-o,--out", args.out_dir,
                  "Output directory (default from config or $PDFM_OUT)");
  cmd->add_option("--seed", args.seed, "Master seed override");
  cmd->add_option("--workers", args.workers, "Worker threads (never changes results)");
  cmd->add_option("--set", args.overrides, "Override a config key: dotted.path=value")
      ->take_all();
  cmd->add_flag("--resume", args.resume, "Skip stages whose artifacts are up to date");
}

pdfm::cli::RunConfig build_config(const CommonArgs& args) {
  std::string doc;
  if (!args.config_path.empty()) {
    doc = pdfm::read_text_file(args.config_path);
  } else {
    nlohmann::json j = nlohmann::json::object();
    if (!args.preset.empty()) j["preset"] = args.preset;
    doc = j.dump();
  }
  if (!args.preset.empty() && !args.config_path.empty())
    doc = pdfm::cli::apply_override(doc, "preset=" + args.preset);
  for (const auto& assignment : args.overrides)
    doc = pdfm::cli::apply_override(doc, assignment);
  if (args.seed >= 0)
    doc = pdfm::cli::apply_override(doc, "seed=" + std::to_string(args.seed));
  if (!args.out_dir.empty())
    doc = pdfm::cli::apply_override(doc, "output_dir=" + args.out_dir);
  else if (args.config_path.empty() && std::getenv("PDFM_OUT"))
    doc = pdfm::cli::apply_override(doc, std::string("output_dir=") + std::getenv("PDFM_OUT"));
  return pdfm::cli::parse_run_config(doc);
}

void emit_error(const std::string& kind, const std::string& message) {
  nlohmann::json j = {{"error", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdfm: region-graph embeddings and geospatial benchmarks"};
  app.require_subcommand(1);

  struct Cmd {
    const char* name;
    const char* help;
  };
  const std::vector<Cmd> stage_cmds = {
      {"synth", "Generate the synthetic world files"},
      {"build-graph", "Assemble the region graph from world files"},
      {"train", "Self-supervised training of the graph model"},
      {"embed", "Export per-region embeddings"},
      {"eval", "Run the interpolation/extrapolation/super-resolution benchmarks"},
      {"forecast", "Run the forecast-correction benchmark"},
      {"report", "Render report.json, report.csv and maps"},
      {"run", "Run the full pipeline"},
  };
  std::map<std::string, CommonArgs> cmd_args;
  for (const auto& c : stage_cmds) add_common(app.add_subcommand(c.name, c.help), cmd_args[c.name]);

  CommonArgs config_args;
  auto* show = app.add_subcommand("config", "Print the resolved config document");
  add_common(show, config_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "config") {
      std::cout << pdfm::cli::dump_run_config(build_config(config_args));
      return 0;
    }
    const CommonArgs& args = cmd_args.at(cmd);
    const auto cfg = build_config(args);
    auto run_cfg = cfg;
    if (args.workers > 0) run_cfg.workers = args.workers;

    if (cmd == "synth") pdfm::cli::stage_synth(run_cfg, args.resume);
    else if (cmd == "build-graph") pdfm::cli::stage_build_graph(run_cfg, args.resume);
    else if (cmd == "train") pdfm::cli::stage_train(run_cfg, args.resume);
    else if (cmd == "embed") pdfm::cli::stage_embed(run_cfg, args.resume);
    else if (cmd == "eval") pdfm::cli::stage_eval(run_cfg, args.resume);
    else if (cmd == "forecast") pdfm::cli::stage_forecast(run_cfg, args.resume);
    else if (cmd == "report") pdfm::cli::stage_report(run_cfg, args.resume);
    else if (cmd == "run") pdfm::cli::run_pipeline(run_cfg, args.resume);
    return 0;
  } catch (const pdfm::ConfigError& e) {
    emit_error("config", e.what());
    return 2;
  } catch (const pdfm::IoError& e) {
    emit_error("io", e.what());
    return 3;
  } catch (const pdfm::StaleArtifactError& e) {
    emit_error("stale-artifact", e.what());
    return 4;
  } catch (const pdfm::Error& e) {
    emit_error("runtime", e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("unexpected", e.what());
    return 1;
  }
}
