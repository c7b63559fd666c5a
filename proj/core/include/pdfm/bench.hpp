#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdfm/downstream.hpp"
#include "pdfm/graph.hpp"
#include "pdfm/idw.hpp"
#include "pdfm/metrics.hpp"
#include "pdfm/model.hpp"
#include "pdfm/splits.hpp"

namespace pdfm::bench {

struct TaskSpec {
  std::string name;
  bool rough = false;  // spatial-roughness metadata from the generator
};

enum class LabelPurpose { train, validation, test };

std::string to_string(LabelPurpose p);

/// Data-access layer for labels. Every label read in the benchmark goes
/// through `fetch`, which enforces the super-resolution protocol: training
/// reads of postal-level labels are rejected for superres splits.
class LabelAccess {
 public:
  LabelAccess(const std::map<std::string, std::map<std::string, double>>& labels,
              const std::map<std::string, graph::RegionKind>& kinds)
      : labels_(&labels), kinds_(&kinds) {}

  std::vector<double> fetch(const std::string& task, std::span<const std::string> ids,
                            TaskKind split, LabelPurpose purpose) const;

 private:
  const std::map<std::string, std::map<std::string, double>>* labels_;
  const std::map<std::string, graph::RegionKind>* kinds_;
};

struct MethodSpec {
  std::string id;           // e.g. "pdfm_ridge", "idw"
  bool uses_embeddings = true;
  std::string embedding_key = "pdfm";  // table to read features from
  downstream::Family family = downstream::Family::ridge;  // embedding methods only
};

struct BenchConfig {
  double holdout_fraction = 0.2;
  std::uint64_t split_seed = 1;
  downstream::RegressorSpec ridge_spec;
  downstream::RegressorSpec mlp_spec;
  downstream::RegressorSpec gbdt_spec;
  double idw_power = 2.0;
  int idw_k = 32;
  std::vector<MethodSpec> methods;
  int workers = 1;

  static std::vector<MethodSpec> default_methods();
};

struct BenchInputs {
  const graph::RegionGraph* graph = nullptr;
  std::map<std::string, model::EmbeddingTable> embeddings;
  const std::map<std::string, std::map<std::string, double>>* labels = nullptr;
  std::vector<TaskSpec> tasks;
};

struct CellResult {
  std::string task;
  std::string method;
  TaskKind split = TaskKind::interpolation;
  bool failed = false;
  std::string error;
  std::map<std::string, double> metrics;
  std::vector<std::string> test_ids;
  std::vector<double> y_true;
  std::vector<double> y_pred;
};

struct EvalReport {
  std::vector<CellResult> cells;
  std::vector<SplitSpec> splits;
  std::string fingerprint;

  const CellResult* find(const std::string& task, const std::string& method,
                         TaskKind split) const;
};

/// Fits and scores every (task, method, split) cell. Failures are recorded
/// per cell and the run continues. Deterministic for a fixed config; the
/// worker count changes scheduling only.
EvalReport run_benchmark(const BenchInputs& inputs, const BenchConfig& cfg);

void write_report_json(const EvalReport& report, const std::filesystem::path& path);
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
void write_splits_manifest(const EvalReport& report, const std::filesystem::path& path);
void write_predictions_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace pdfm::bench
