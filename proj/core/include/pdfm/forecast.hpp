#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pdfm/downstream.hpp"
#include "pdfm/metrics.hpp"
#include "pdfm/model.hpp"
#include "pdfm/series.hpp"

namespace pdfm::forecast {

/// Contiguous, ordered, non-overlapping index ranges:
/// part1 = [0, p1_end), part2 = [p1_end, p2_end), part3 = [p2_end, p3_end).
struct ThreePartSplit {
  std::size_t p1_end = 0;
  std::size_t p2_end = 0;
  std::size_t p3_end = 0;

  std::size_t part2_len() const { return p2_end - p1_end; }
  std::size_t part3_len() const { return p3_end - p2_end; }
  void validate(std::size_t n_steps) const;
};

enum class ForecastFamily { naive_last, seasonal_naive, ar, arima };

std::string to_string(ForecastFamily f);
ForecastFamily forecast_family_from_string(const std::string& s);

struct ForecasterSpec {
  ForecastFamily family = ForecastFamily::seasonal_naive;
  int p = 0;
  int d = 0;
  int q = 0;
  int seasonal_period = 12;

  void validate() const;
};

struct ArimaModel {
  int p = 0, d = 0, q = 0;
  double intercept = 0.0;
  std::vector<double> ar;      // phi_1..phi_p
  std::vector<double> ma;      // theta_1..theta_q
  std::vector<double> tail_w;  // differenced series tail (for AR lags)
  std::vector<double> tail_e;  // residual tail (for MA lags)
  std::vector<double> last_levels;  // last value at each integration level
  bool stable = true;               // AR roots outside the unit circle
  std::vector<double> objective_trace;
};

/// Conditional-least-squares ARIMA: difference d times, Hannan-Rissanen
/// initialization, gradient descent with backtracking line search on the CSS
/// objective (tolerance 1e-8, max 500 iterations).
ArimaModel arima_fit(std::span<const double> series, int p, int d, int q);

/// Iterated one-step predictions with future shocks at zero, then d-fold
/// integration back to the original scale.
std::vector<double> arima_forecast(const ArimaModel& model, int horizon);

/// Deterministic baseline forecast for the configured family.
std::vector<double> base_forecast(std::span<const double> context,
                                  const ForecasterSpec& spec, int horizon);

struct AdapterConfig {
  std::vector<int> hidden_dims = {64, 32};  // exactly two hidden layers
  double lr = 0.005;
  int epochs = 100;
  int batch = 256;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Two-hidden-layer MLP mapping [base forecast value || embedding] to the
/// actual value; inputs standardized with training stats.
struct AdapterModel {
  downstream::MlpNet net;
  std::size_t embedding_width = 0;

  double correct(double base_value, std::span<const double> embedding) const;
};

/// Trains on part-2 anchors: one row per (region, part-2 step).
/// `base_part2` is regions x part2 steps; `actual_part2` matches.
AdapterModel train_adapter(const Matrix& base_part2, const Matrix& actual_part2,
                           const std::vector<std::string>& region_ids,
                           const model::EmbeddingTable& embeddings,
                           const AdapterConfig& cfg);

struct ForecastMethodRow {
  std::string method;
  double mape = 0.0;
  std::vector<double> region_errors;  // per-region mean absolute percentage error
  Matrix part3_forecasts;             // regions x part3 steps
};

struct ForecastTaskReport {
  std::string task;
  std::vector<ForecastMethodRow> methods;   // base_t, arima_t, base_tminus1, base_tminus1_adapter
  bench::TTestResult arima_vs_adapter;      // paired t-test on region errors
  int regions_used = 0;
  int regions_dropped = 0;
  std::vector<std::string> region_ids;      // aligned with region_errors
};

/// Externally produced base forecasts (e.g. a real foundation forecaster's
/// output dropped in through files) replacing the built-in families.
struct ExternalBaseForecasts {
  Matrix full_context;   // regions x part3 steps, context = part1+part2
  Matrix part1_context;  // regions x (part2+part3) steps, context = part1 only
};

struct ForecastBenchConfig {
  ForecasterSpec base;    // the pluggable stand-in base forecaster
  ForecasterSpec arima;   // the supervised comparison row
  AdapterConfig adapter;
  int m_comparisons = 1;  // Bonferroni correction across tasks
  const ExternalBaseForecasts* external_base = nullptr;  // file-input mode
};

/// Three method rows per task: (a) base with part1+part2 context, (b)
/// supervised ARIMA, (c) base with part1-only context plus the embedding
/// adapter trained on part2 — each scored by MAPE over regions; the raw
/// part1-only base row is kept for reference. Regions with invalid spans or
/// near-zero actuals are dropped from every method symmetrically.
ForecastTaskReport run_forecast_benchmark(const SeriesPanel& panel,
                                          const ThreePartSplit& split,
                                          const model::EmbeddingTable& embeddings,
                                          const ForecastBenchConfig& cfg);

/// File-input mode: externally produced base forecasts keyed by region id
/// (columns = forecast steps) substitute for the built-in families.
Matrix load_forecasts_csv(const std::filesystem::path& path,
                          const std::vector<std::string>& region_ids,
                          std::size_t expected_steps);

void write_forecasts_csv(const std::filesystem::path& path,
                         const std::vector<std::string>& region_ids,
                         const Matrix& forecasts);

}  // namespace pdfm::forecast
