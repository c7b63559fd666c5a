#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pdfm/matrix.hpp"

namespace pdfm::features {

/// One per-source feature matrix, rows aligned with a region-id list.
/// Missing raw values are represented as NaN until preprocessing.
struct FeatureBlock {
  std::string source;                 // trends | maps | busyness | weather_aq | external
  std::vector<std::string> ids;       // region id per row
  std::vector<std::string> columns;   // column labels
  Matrix values;                      // ids.size() x columns.size()
};

struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> std;            // floored at 1e-8 for constant columns
  double clip = 4.0;                  // in sigma units
};

/// Scales a nonnegative count vector to sum to 100, preserving proportions.
/// Throws ValidationError when all entries are zero (or any is negative).
std::vector<double> normalize_trends(std::span<const double> counts);

/// Column means/stds over all rows (population convention), NaNs excluded.
StandardizationStats fit_standardizer(const FeatureBlock& block, double clip = 4.0);

/// value <- clamp((x - mean) / std, -clip, +clip). Column count must match.
FeatureBlock apply_standardizer(const FeatureBlock& block,
                                const StandardizationStats& stats);

/// Replaces NaNs by the column mean over observed values (column of all NaNs
/// becomes zero). Applied before fitting stats.
FeatureBlock impute_missing(const FeatureBlock& block);

/// Drops rows whose fraction of missing cells exceeds `threshold`.
FeatureBlock drop_sparse_rows(const FeatureBlock& block, double threshold = 0.98);

/// County rows as unweighted means of member postal rows. `membership`
/// maps postal id -> county id; counties ordered by id. Counties with zero
/// members are excluded (callers may log them via `skipped`).
FeatureBlock aggregate_to_county(const FeatureBlock& postal_block,
                                 const std::map<std::string, std::string>& membership,
                                 std::vector<std::string>* skipped = nullptr);

/// Start column of each source in the concatenated matrix.
struct ColumnProvenance {
  std::vector<std::string> sources;
  std::vector<std::size_t> offsets;   // same length as sources
  std::size_t total_width = 0;

  std::pair<std::size_t, std::size_t> range(const std::string& source) const;
};

/// Row-wise concatenation of blocks; all blocks must list the same ids in the
/// same order. Returns the combined matrix and records column provenance.
Matrix concat_blocks(const std::vector<const FeatureBlock*>& blocks,
                     ColumnProvenance* provenance = nullptr);

}  // namespace pdfm::features
