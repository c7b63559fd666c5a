#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdfm/matrix.hpp"

namespace pdfm {

/// Per-region time series over a shared uniform time index.
struct SeriesPanel {
  std::string task;
  std::string frequency = "monthly";  // monthly | yearly
  int period = 12;                    // seasonal period hint
  std::string level = "county";       // region granularity
  std::vector<std::string> ids;       // one row per region
  Matrix values;                      // ids.size() x n_steps
  std::vector<std::uint8_t> valid;    // per-region validity mask
};

}  // namespace pdfm
