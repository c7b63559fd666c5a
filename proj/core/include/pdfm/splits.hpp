#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pdfm/graph.hpp"

namespace pdfm::bench {

enum class TaskKind { interpolation, extrapolation, superres };

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

struct SplitSpec {
  TaskKind kind = TaskKind::interpolation;
  std::vector<std::string> train;       // postal ids (county ids for superres)
  std::vector<std::string> validation;  // postal ids
  std::vector<std::string> test;        // postal ids
  std::vector<std::string> holdout_groups;  // counties or states held out
  double holdout_fraction = 0.2;
  std::uint64_t rng_seed = 0;
  std::string manifest_hash;
};

/// Region membership view used by the split builders.
struct RegionIndex {
  std::vector<std::string> postal_ids;
  std::map<std::string, std::string> postal_to_county;  // argmax-overlap mapping
  std::map<std::string, std::string> county_to_state;

  static RegionIndex from_regions(const std::vector<graph::Region>& regions);
  std::string state_of_postal(const std::string& postal) const;
};

/// Argmax-overlap county per postal code; ties break toward the
/// lexicographically smallest county id. `candidates` lists
/// (postal id, county id, overlap weight) memberships.
std::map<std::string, std::string> map_postal_to_county(
    const std::vector<std::tuple<std::string, std::string, double>>& candidates);

/// Holds out floor(frac * n_counties) whole counties; their postal codes form
/// the test set and the remaining postal codes split 80/20 train/validation.
SplitSpec make_interpolation_split(const RegionIndex& index, double frac,
                                   std::uint64_t seed);

/// Same protocol at state granularity.
SplitSpec make_extrapolation_split(const RegionIndex& index, double frac,
                                   std::uint64_t seed);

/// Training rows become the counties of the training universe; validation is
/// a seeded 20% of the interpolation training postal codes; the test set is
/// the interpolation test set.
SplitSpec make_superres_split(const SplitSpec& interpolation, const RegionIndex& index);

std::string split_manifest_hash(const SplitSpec& split);

}  // namespace pdfm::bench
