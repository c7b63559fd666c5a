#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pdfm/bench.hpp"
#include "pdfm/forecast.hpp"
#include "pdfm/graph.hpp"
#include "pdfm/model.hpp"
#include "pdfm/sampling.hpp"
#include "pdfm/synthgeo.hpp"

namespace pdfm::cli {

struct FeaturePrepConfig {
  double clip_sigma = 4.0;
  bool clip_before_standardize = false;  // alternate order: clip raw, then scale
  double row_drop_missing_threshold = 0.98;
};

struct EvalConfig {
  double holdout_fraction = 0.2;
  std::optional<std::string> external_embeddings;  // CSV path
  std::vector<std::string> modality_slices;        // extra per-group ablation methods
};

struct ReportConfig {
  bool svg = true;
};

/// One declarative document driving the whole pipeline. All stage seeds are
/// derived from `seed`, so a config is a complete experiment manifest.
struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 7;
  std::filesystem::path output_dir = "out";
  int workers = 1;

  synth::SynthConfig synth;
  graph::GraphConfig graph;
  FeaturePrepConfig features;
  sampling::SamplerConfig sampler;
  model::PdfmConfig pdfm;
  downstream::RegressorSpec ridge_spec;
  downstream::RegressorSpec mlp_spec;
  downstream::RegressorSpec gbdt_spec;
  double idw_power = 2.0;
  int idw_k = 32;
  EvalConfig eval;
  forecast::ForecasterSpec forecast_base;
  forecast::ForecasterSpec forecast_arima;
  forecast::AdapterConfig adapter;
  forecast::ThreePartSplit forecast_split;
  ReportConfig report;

  void derive_seeds();  // fills stage seeds from the master seed
  void validate() const;
};

/// Desk preset: 5 states / 50 counties / 500 postal codes, 48-dim embedding,
/// six labelled tasks and one monthly panel. Runs end to end in minutes.
RunConfig desk_config();

/// Full-scale preset: 330-dim embedding partitioned 128/128/74 and the
/// heavier phase-2 hyperparameters. Same synthetic world schema.
RunConfig paper_config();

RunConfig config_from_preset(const std::string& name);

/// Parses a config document (JSON) over its preset's defaults. Unknown keys
/// are rejected with the offending path.
RunConfig parse_run_config(const std::string& json_text);

RunConfig load_run_config(const std::filesystem::path& path);

/// Applies one `--set dotted.path=value` override onto a config document.
std::string apply_override(const std::string& json_text, const std::string& assignment);

/// Canonical JSON rendering of a config (used for fingerprints and docs).
std::string dump_run_config(const RunConfig& cfg);

}  // namespace pdfm::cli
