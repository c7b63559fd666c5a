#include "pdfm/bench.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"

namespace pdfm::bench {

using nlohmann::json;

std::string to_string(LabelPurpose p) {
  switch (p) {
    case LabelPurpose::train: return "train";
    case LabelPurpose::validation: return "validation";
    case LabelPurpose::test: return "test";
  }
  return "train";
}

std::vector<double> LabelAccess::fetch(const std::string& task,
                                       std::span<const std::string> ids, TaskKind split,
                                       LabelPurpose purpose) const {
  auto task_it = labels_->find(task);
  if (task_it == labels_->end()) throw LookupError("unknown task: " + task);
  std::vector<double> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto kind_it = kinds_->find(id);
    if (kind_it == kinds_->end()) throw LookupError("unknown region id: " + id);
    if (split == TaskKind::superres && purpose == LabelPurpose::train &&
        kind_it->second == graph::RegionKind::postal)
      throw AccessError("super-resolution training must not read postal-level labels (task '" +
                        task + "', id '" + id + "')");
    auto val_it = task_it->second.find(id);
    if (val_it == task_it->second.end())
      throw LookupError("task '" + task + "' has no label for region '" + id + "'");
    out.push_back(val_it->second);
  }
  return out;
}

std::vector<MethodSpec> BenchConfig::default_methods() {
  return {
      {"pdfm_ridge", true, "pdfm", downstream::Family::ridge},
      {"pdfm_mlp", true, "pdfm", downstream::Family::mlp},
      {"pdfm_gbdt", true, "pdfm", downstream::Family::gbdt},
      {"idw", false, "", downstream::Family::ridge},
  };
}

const CellResult* EvalReport::find(const std::string& task, const std::string& method,
                                   TaskKind split) const {
  for (const auto& cell : cells)
    if (cell.task == task && cell.method == method && cell.split == split) return &cell;
  return nullptr;
}

namespace {

struct FeatureStandardizer {
  std::vector<double> mean, std;

  static FeatureStandardizer fit(const Matrix& x) {
    FeatureStandardizer s;
    s.mean.assign(x.cols(), 0.0);
    s.std.assign(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) s.mean[j] += x.at(i, j);
    for (double& m : s.mean) m /= static_cast<double>(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) {
        const double d = x.at(i, j) - s.mean[j];
        s.std[j] += d * d;
      }
    for (double& v : s.std)
      v = std::max(std::sqrt(v / static_cast<double>(x.rows())), 1e-8);
    return s;
  }

  Matrix apply(const Matrix& x) const {
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j)
        out.at(i, j) = (out.at(i, j) - mean[j]) / std[j];
    return out;
  }
};

Matrix gather_rows(const model::EmbeddingTable& table,
                   std::span<const std::string> ids) {
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < table.ids.size(); ++i) row_of[table.ids[i]] = i;
  Matrix out(ids.size(), table.values.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = row_of.find(ids[i]);
    if (it == row_of.end())
      throw LookupError("embedding table has no row for '" + std::string(ids[i]) + "'");
    std::copy(table.values.row(it->second).begin(), table.values.row(it->second).end(),
              out.row(i).begin());
  }
  return out;
}

std::vector<LatLon> gather_coords(const graph::RegionGraph& g,
                                  std::span<const std::string> ids) {
  std::vector<LatLon> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(g.node(g.index_of(id)).centroid);
  return out;
}

CellResult run_cell(const BenchInputs& inputs, const BenchConfig& cfg,
                    const LabelAccess& labels, const SplitSpec& split,
                    const RegionIndex& index, const TaskSpec& task,
                    const MethodSpec& method) {
  CellResult cell;
  cell.task = task.name;
  cell.method = method.id;
  cell.split = split.kind;

  const auto& train_ids = split.train;
  const auto& val_ids = split.validation;
  const auto& test_ids = split.test;

  auto y_train = labels.fetch(task.name, train_ids, split.kind, LabelPurpose::train);
  auto y_val = labels.fetch(task.name, val_ids, split.kind, LabelPurpose::validation);
  auto y_test = labels.fetch(task.name, test_ids, split.kind, LabelPurpose::test);

  std::vector<double> pred_test, pred_train;
  if (!method.uses_embeddings) {
    // Coordinate-only baseline; fits on train + validation per the
    // interpolation-methods protocol (no tuning happens on validation).
    auto coords_train = gather_coords(*inputs.graph, train_ids);
    auto coords_val = gather_coords(*inputs.graph, val_ids);
    std::vector<LatLon> coords_fit = coords_train;
    coords_fit.insert(coords_fit.end(), coords_val.begin(), coords_val.end());
    std::vector<double> y_fit = y_train;
    y_fit.insert(y_fit.end(), y_val.begin(), y_val.end());
    auto idw = baselines::idw_fit(coords_fit, y_fit, cfg.idw_power, cfg.idw_k);
    pred_test = baselines::idw_predict(idw, gather_coords(*inputs.graph, test_ids));
    pred_train = baselines::idw_predict(idw, coords_train);
  } else {
    auto table_it = inputs.embeddings.find(method.embedding_key);
    if (table_it == inputs.embeddings.end())
      throw LookupError("no embedding table '" + method.embedding_key + "'");
    Matrix x_train = gather_rows(table_it->second, train_ids);
    Matrix x_val = gather_rows(table_it->second, val_ids);
    Matrix x_test = gather_rows(table_it->second, test_ids);

    downstream::TrainedRegressor reg;
    switch (method.family) {
      case downstream::Family::ridge: {
        const auto stats = FeatureStandardizer::fit(x_train);
        reg = downstream::ridge_fit(stats.apply(x_train), y_train,
                                    cfg.ridge_spec.ridge_lambda);
        pred_test = downstream::predict(reg, stats.apply(x_test));
        pred_train = downstream::predict(reg, stats.apply(x_train));
        break;
      }
      case downstream::Family::mlp: {
        reg = downstream::mlp_fit(x_train, y_train, cfg.mlp_spec);
        pred_test = downstream::predict(reg, x_test);
        pred_train = downstream::predict(reg, x_train);
        break;
      }
      case downstream::Family::gbdt: {
        reg = downstream::gbdt_fit(x_train, y_train, x_val, y_val, cfg.gbdt_spec);
        pred_test = downstream::predict(reg, x_test);
        pred_train = downstream::predict(reg, x_train);
        break;
      }
    }
  }

  cell.metrics["r2"] = r_squared(y_test, pred_test);
  cell.metrics["train_r2"] = r_squared(y_train, pred_train);
  try {
    cell.metrics["pearson"] = pearson_r(y_test, pred_test);
  } catch (const MetricError&) {
    // constant predictions; pearson undefined, r2 already recorded
  }
  if (split.kind == TaskKind::superres) {
    std::vector<std::string> county_of;
    county_of.reserve(test_ids.size());
    for (const auto& id : test_ids) county_of.push_back(index.postal_to_county.at(id));
    try {
      auto intra = intra_county_pearson(y_test, pred_test, county_of);
      cell.metrics["intra_county_r"] = intra.mean_r;
      cell.metrics["intra_county_used"] = intra.counties_used;
      cell.metrics["intra_county_skipped"] = intra.counties_skipped;
    } catch (const MetricError&) {
      // Constant predictions inside every county: the metric is undefined.
      // The cell keeps its other metrics and reports the blanket skip.
      std::set<std::string> counties(county_of.begin(), county_of.end());
      cell.metrics["intra_county_used"] = 0;
      cell.metrics["intra_county_skipped"] = static_cast<double>(counties.size());
    }
  }
  cell.test_ids = test_ids;
  cell.y_true = y_test;
  cell.y_pred = pred_test;
  return cell;
}

}  // namespace

EvalReport run_benchmark(const BenchInputs& inputs, const BenchConfig& cfg) {
  if (!inputs.graph || !inputs.labels)
    throw ConfigError("run_benchmark: graph and labels are required");
  if (cfg.workers < 1) throw ConfigError("bench.workers must be >= 1");

  EvalReport report;
  const auto index = RegionIndex::from_regions(inputs.graph->nodes());
  const auto interp = make_interpolation_split(index, cfg.holdout_fraction, cfg.split_seed);
  const auto extrap = make_extrapolation_split(index, cfg.holdout_fraction, cfg.split_seed);
  const auto superres = make_superres_split(interp, index);
  report.splits = {interp, extrap, superres};

  std::map<std::string, graph::RegionKind> kinds;
  for (const auto& r : inputs.graph->nodes()) kinds[r.id] = r.kind;
  const LabelAccess labels(*inputs.labels, kinds);

  struct Job {
    const SplitSpec* split;
    const TaskSpec* task;
    const MethodSpec* method;
  };
  std::vector<Job> jobs;
  const auto methods = cfg.methods.empty() ? BenchConfig::default_methods() : cfg.methods;
  for (const auto& split : report.splits)
    for (const auto& task : inputs.tasks)
      for (const auto& method : methods) jobs.push_back({&split, &task, &method});

  std::vector<CellResult> cells(jobs.size());
  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        cells[i] = run_cell(inputs, cfg, labels, *jobs[i].split, index, *jobs[i].task,
                            *jobs[i].method);
      } catch (const Error& e) {
        cells[i].task = jobs[i].task->name;
        cells[i].method = jobs[i].method->id;
        cells[i].split = jobs[i].split->kind;
        cells[i].failed = true;
        cells[i].error = e.what();
      }
    }
  };
  if (cfg.workers == 1 || jobs.size() < 2) {
    run_range(0, jobs.size());
  } else {
    // Cells land in preallocated slots, so scheduling never changes results.
    const std::size_t nw = std::min<std::size_t>(cfg.workers, jobs.size());
    std::vector<std::thread> pool;
    const std::size_t chunk = (jobs.size() + nw - 1) / nw;
    for (std::size_t w = 0; w < nw; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(jobs.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  report.cells = std::move(cells);
  return report;
}

namespace {

json metrics_to_json(const CellResult& cell) {
  json j;
  if (cell.failed) {
    j["failed"] = true;
    j["error"] = cell.error;
    return j;
  }
  for (const auto& [k, v] : cell.metrics) j[k] = v;
  return j;
}

}  // namespace

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  json j;
  j["fingerprint"] = report.fingerprint;
  json tasks;
  for (const auto& cell : report.cells)
    tasks[cell.task][cell.method][to_string(cell.split)] = metrics_to_json(cell);
  j["results"] = std::move(tasks);
  json splits;
  for (const auto& s : report.splits) {
    json js;
    js["seed"] = s.rng_seed;
    js["holdout_fraction"] = s.holdout_fraction;
    js["manifest_hash"] = s.manifest_hash;
    js["train_count"] = s.train.size();
    js["validation_count"] = s.validation.size();
    js["test_count"] = s.test.size();
    splits[to_string(s.kind)] = std::move(js);
  }
  j["splits"] = std::move(splits);
  write_text_file(path, j.dump(2) + "\n");
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  CsvTable t;
  t.header = {"task", "method", "split", "metric", "value"};
  for (const auto& cell : report.cells) {
    if (cell.failed) {
      t.rows.push_back({cell.task, cell.method, to_string(cell.split), "failed", "1"});
      continue;
    }
    for (const auto& [metric, value] : cell.metrics)
      t.rows.push_back(
          {cell.task, cell.method, to_string(cell.split), metric, format_double(value)});
  }
  write_csv(path, t);
}

void write_splits_manifest(const EvalReport& report, const std::filesystem::path& path) {
  json j;
  for (const auto& s : report.splits) {
    json js;
    js["seed"] = s.rng_seed;
    js["holdout_fraction"] = s.holdout_fraction;
    js["manifest_hash"] = s.manifest_hash;
    js["holdout_groups"] = s.holdout_groups;
    js["train"] = s.train;
    js["validation"] = s.validation;
    js["test"] = s.test;
    j[to_string(s.kind)] = std::move(js);
  }
  write_text_file(path, j.dump(2) + "\n");
}

void write_predictions_csv(const EvalReport& report, const std::filesystem::path& path) {
  CsvTable t;
  t.header = {"region_id", "task", "method", "split", "y_true", "y_pred"};
  for (const auto& cell : report.cells) {
    if (cell.failed) continue;
    for (std::size_t i = 0; i < cell.test_ids.size(); ++i)
      t.rows.push_back({cell.test_ids[i], cell.task, cell.method, to_string(cell.split),
                        format_double(cell.y_true[i]), format_double(cell.y_pred[i])});
  }
  write_csv(path, t);
}

}  // namespace pdfm::bench
