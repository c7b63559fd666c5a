#include "pdfm/idw.hpp"

#include <algorithm>
#include <cmath>

#include "pdfm/errors.hpp"

namespace pdfm::baselines {

IdwModel idw_fit(std::span<const LatLon> coords, std::span<const double> values,
                 double power, int k) {
  if (coords.empty()) throw ValidationError("idw_fit: no training points");
  if (coords.size() != values.size()) throw SchemaError("idw_fit: length mismatch");
  if (power <= 0.0) throw ConfigError("idw power must be positive");
  if (k < 1) throw ConfigError("idw neighbor count must be >= 1");
  IdwModel model;
  model.coords.assign(coords.begin(), coords.end());
  model.values.assign(values.begin(), values.end());
  model.power = power;
  model.k = k;
  return model;
}

double idw_predict_one(const IdwModel& model, const LatLon& query) {
  const std::size_t n = model.coords.size();
  std::vector<double> dist(n);
  double coincident_sum = 0.0;
  std::size_t coincident_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = geodesic_distance_miles(model.coords[i], query);
    if (dist[i] <= model.zero_distance_tolerance_miles) {
      coincident_sum += model.values[i];
      ++coincident_count;
    }
  }
  if (coincident_count > 0)
    return coincident_sum / static_cast<double>(coincident_count);

  // k-th smallest distance; every point tied with it participates, and the
  // contributions accumulate in sorted order, so the result is exactly
  // invariant to the training-point order.
  const std::size_t k = std::min<std::size_t>(model.k, n);
  std::vector<double> sorted = dist;
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
  const double cutoff = sorted[k - 1];

  std::vector<std::pair<double, double>> neighbors;  // (distance, value)
  neighbors.reserve(k);
  for (std::size_t i = 0; i < n; ++i)
    if (dist[i] <= cutoff) neighbors.push_back({dist[i], model.values[i]});
  std::sort(neighbors.begin(), neighbors.end());

  double wsum = 0.0, vsum = 0.0;
  for (const auto& [d, v] : neighbors) {
    const double w = std::pow(d, -model.power);
    wsum += w;
    vsum += w * v;
  }
  return vsum / wsum;
}

std::vector<double> idw_predict(const IdwModel& model, std::span<const LatLon> queries) {
  std::vector<double> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q)
    out[q] = idw_predict_one(model, queries[q]);
  return out;
}

}  // namespace pdfm::baselines
