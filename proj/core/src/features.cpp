#include "pdfm/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pdfm/errors.hpp"

namespace pdfm::features {

std::vector<double> normalize_trends(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0) throw ValidationError("normalize_trends: negative count");
    total += c;
  }
  if (total <= 0.0) throw ValidationError("normalize_trends: all-zero vector");
  std::vector<double> out(counts.begin(), counts.end());
  const double scale = 100.0 / total;
  for (double& v : out) v *= scale;
  return out;
}

StandardizationStats fit_standardizer(const FeatureBlock& block, double clip) {
  if (block.values.rows() == 0) throw ValidationError("fit_standardizer: empty block");
  if (clip <= 0.0) throw ConfigError("clip bound must be positive");
  const std::size_t cols = block.values.cols();
  StandardizationStats stats;
  stats.clip = clip;
  stats.mean.assign(cols, 0.0);
  stats.std.assign(cols, 0.0);
  for (std::size_t j = 0; j < cols; ++j) {
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < block.values.rows(); ++i) {
      const double x = block.values.at(i, j);
      if (std::isnan(x)) continue;
      sum += x;
      sumsq += x * x;
      ++n;
    }
    const double mean = n ? sum / static_cast<double>(n) : 0.0;
    const double var = n ? std::max(0.0, sumsq / static_cast<double>(n) - mean * mean) : 0.0;
    stats.mean[j] = mean;
    stats.std[j] = std::max(std::sqrt(var), 1e-8);
  }
  return stats;
}

FeatureBlock apply_standardizer(const FeatureBlock& block,
                                const StandardizationStats& stats) {
  if (stats.mean.size() != block.values.cols())
    throw SchemaError("apply_standardizer: stats fitted on " +
                      std::to_string(stats.mean.size()) + " columns, block has " +
                      std::to_string(block.values.cols()));
  FeatureBlock out = block;
  for (std::size_t i = 0; i < out.values.rows(); ++i) {
    for (std::size_t j = 0; j < out.values.cols(); ++j) {
      const double z = (out.values.at(i, j) - stats.mean[j]) / stats.std[j];
      out.values.at(i, j) = std::clamp(z, -stats.clip, stats.clip);
    }
  }
  return out;
}

FeatureBlock impute_missing(const FeatureBlock& block) {
  FeatureBlock out = block;
  const std::size_t rows = out.values.rows();
  const std::size_t cols = out.values.cols();
  for (std::size_t j = 0; j < cols; ++j) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      const double x = out.values.at(i, j);
      if (!std::isnan(x)) {
        sum += x;
        ++n;
      }
    }
    const double fill = n ? sum / static_cast<double>(n) : 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      if (std::isnan(out.values.at(i, j))) out.values.at(i, j) = fill;
  }
  return out;
}

FeatureBlock drop_sparse_rows(const FeatureBlock& block, double threshold) {
  if (threshold <= 0.0 || threshold > 1.0)
    throw ConfigError("drop_sparse_rows: threshold must be in (0, 1]");
  FeatureBlock out;
  out.source = block.source;
  out.columns = block.columns;
  const std::size_t cols = block.values.cols();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < block.values.rows(); ++i) {
    std::size_t missing = 0;
    for (std::size_t j = 0; j < cols; ++j)
      if (std::isnan(block.values.at(i, j))) ++missing;
    if (cols == 0 || static_cast<double>(missing) / static_cast<double>(cols) <= threshold)
      keep.push_back(i);
  }
  out.values = Matrix(keep.size(), cols);
  out.ids.reserve(keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.ids.push_back(block.ids[keep[r]]);
    for (std::size_t j = 0; j < cols; ++j)
      out.values.at(r, j) = block.values.at(keep[r], j);
  }
  return out;
}

FeatureBlock aggregate_to_county(const FeatureBlock& postal_block,
                                 const std::map<std::string, std::string>& membership,
                                 std::vector<std::string>* skipped) {
  const std::size_t cols = postal_block.values.cols();
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> acc;
  for (const auto& [postal, county] : membership) acc[county] = {std::vector<double>(cols, 0.0), 0};
  for (std::size_t i = 0; i < postal_block.ids.size(); ++i) {
    auto it = membership.find(postal_block.ids[i]);
    if (it == membership.end())
      throw JoinError("aggregate_to_county: postal id '" + postal_block.ids[i] +
                      "' has no county");
    auto& [sum, count] = acc[it->second];
    for (std::size_t j = 0; j < cols; ++j) sum[j] += postal_block.values.at(i, j);
    ++count;
  }
  FeatureBlock out;
  out.source = postal_block.source;
  out.columns = postal_block.columns;
  std::size_t nonempty = 0;
  for (const auto& [county, sc] : acc)
    if (sc.second > 0) ++nonempty;
  out.values = Matrix(nonempty, cols);
  std::size_t r = 0;
  for (const auto& [county, sc] : acc) {
    if (sc.second == 0) {
      if (skipped) skipped->push_back(county);
      continue;
    }
    out.ids.push_back(county);
    for (std::size_t j = 0; j < cols; ++j)
      out.values.at(r, j) = sc.first[j] / static_cast<double>(sc.second);
    ++r;
  }
  return out;
}

std::pair<std::size_t, std::size_t> ColumnProvenance::range(const std::string& source) const {
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i] == source) {
      const std::size_t end = i + 1 < offsets.size() ? offsets[i + 1] : total_width;
      return {offsets[i], end};
    }
  }
  throw LookupError("unknown source in provenance: " + source);
}

Matrix concat_blocks(const std::vector<const FeatureBlock*>& blocks,
                     ColumnProvenance* provenance) {
  if (blocks.empty()) throw ValidationError("concat_blocks: no blocks");
  const auto& ids = blocks.front()->ids;
  std::size_t width = 0;
  for (const auto* b : blocks) {
    if (b->ids != ids)
      throw SchemaError("concat_blocks: block '" + b->source +
                        "' is not aligned with '" + blocks.front()->source + "'");
    width += b->values.cols();
  }
  Matrix out(ids.size(), width);
  ColumnProvenance prov;
  std::size_t offset = 0;
  for (const auto* b : blocks) {
    prov.sources.push_back(b->source);
    prov.offsets.push_back(offset);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < b->values.cols(); ++j)
        out.at(i, offset + j) = b->values.at(i, j);
    offset += b->values.cols();
  }
  prov.total_width = width;
  if (provenance) *provenance = std::move(prov);
  return out;
}

}  // namespace pdfm::features
