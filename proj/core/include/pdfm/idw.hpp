#pragma once

#include <span>
#include <vector>

#include "pdfm/geo.hpp"

namespace pdfm::baselines {

/// Shepard inverse-distance-weighted interpolation over geodesic miles,
/// restricted to the k nearest training points.
struct IdwModel {
  std::vector<LatLon> coords;
  std::vector<double> values;
  double power = 2.0;
  int k = 32;
  double zero_distance_tolerance_miles = 1e-9;
};

IdwModel idw_fit(std::span<const LatLon> coords, std::span<const double> values,
                 double power = 2.0, int k = 32);

/// Exact at training coordinates (coincident points average); otherwise a
/// d^-p weighted mean over the k nearest points. Neighbor ties at the k-th
/// distance are all included, which keeps predictions invariant to the
/// training-point order.
std::vector<double> idw_predict(const IdwModel& model, std::span<const LatLon> queries);

double idw_predict_one(const IdwModel& model, const LatLon& query);

}  // namespace pdfm::baselines
