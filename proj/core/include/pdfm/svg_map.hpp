#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pdfm/geo.hpp"

namespace pdfm::bench {

struct MapPoint {
  LatLon pos;
  double value = 0.0;
};

/// Static choropleth: points binned onto an equal-area grid (longitude scaled
/// by cos of the mid latitude), cells colored by mean value on a linear
/// blue-to-red ramp, with a legend bar.
void write_choropleth_svg(const std::filesystem::path& path,
                          const std::vector<MapPoint>& points, const std::string& title,
                          int grid_width = 64);

}  // namespace pdfm::bench
