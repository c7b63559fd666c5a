#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdfm/config.hpp"

namespace pdfm::cli {

inline const std::vector<std::string> kStageOrder = {
    "synth", "build-graph", "train", "embed", "eval", "forecast", "report"};

/// Deterministic 64-bit fingerprint of the config slice a stage depends on,
/// chained through its upstream stages.
std::string stage_fingerprint(const RunConfig& cfg, const std::string& stage);

/// True when the stage's manifest exists and matches the expected fingerprint.
bool stage_is_fresh(const RunConfig& cfg, const std::string& stage);

/// Throws StaleArtifactError naming the stage to rerun.
void require_stage(const RunConfig& cfg, const std::string& stage);

/// Each stage returns false when skipped by --resume.
bool stage_synth(const RunConfig& cfg, bool resume = false);
bool stage_build_graph(const RunConfig& cfg, bool resume = false);
bool stage_train(const RunConfig& cfg, bool resume = false);
bool stage_embed(const RunConfig& cfg, bool resume = false);
bool stage_eval(const RunConfig& cfg, bool resume = false);
bool stage_forecast(const RunConfig& cfg, bool resume = false);
bool stage_report(const RunConfig& cfg, bool resume = false);

void run_pipeline(const RunConfig& cfg, bool resume = false);

}  // namespace pdfm::cli
