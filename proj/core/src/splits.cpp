#include "pdfm/splits.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "pdfm/errors.hpp"
#include "pdfm/rng.hpp"

namespace pdfm::bench {

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::interpolation: return "interpolation";
    case TaskKind::extrapolation: return "extrapolation";
    case TaskKind::superres: return "superres";
  }
  return "interpolation";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "interpolation") return TaskKind::interpolation;
  if (s == "extrapolation") return TaskKind::extrapolation;
  if (s == "superres") return TaskKind::superres;
  throw ConfigError("unknown split kind: " + s);
}

RegionIndex RegionIndex::from_regions(const std::vector<graph::Region>& regions) {
  RegionIndex index;
  std::vector<std::tuple<std::string, std::string, double>> memberships;
  for (const auto& r : regions) {
    if (r.kind == graph::RegionKind::postal) {
      index.postal_ids.push_back(r.id);
      memberships.emplace_back(r.id, r.county_id, r.overlap_weight);
    } else {
      index.county_to_state[r.id] = r.state_id;
    }
  }
  index.postal_to_county = map_postal_to_county(memberships);
  return index;
}

std::string RegionIndex::state_of_postal(const std::string& postal) const {
  auto cit = postal_to_county.find(postal);
  if (cit == postal_to_county.end())
    throw LookupError("postal '" + postal + "' has no mapped county");
  auto sit = county_to_state.find(cit->second);
  if (sit == county_to_state.end())
    throw LookupError("county '" + cit->second + "' has no state");
  return sit->second;
}

std::map<std::string, std::string> map_postal_to_county(
    const std::vector<std::tuple<std::string, std::string, double>>& candidates) {
  std::map<std::string, std::pair<std::string, double>> best;
  std::set<std::string> postals;
  for (const auto& [postal, county, weight] : candidates) {
    postals.insert(postal);
    auto it = best.find(postal);
    if (it == best.end() || weight > it->second.second ||
        (weight == it->second.second && county < it->second.first))
      best[postal] = {county, weight};
  }
  std::map<std::string, std::string> out;
  for (const auto& postal : postals) {
    const auto& [county, weight] = best.at(postal);
    if (county.empty())
      throw JoinError("postal '" + postal + "' has no candidate county");
    out[postal] = county;
  }
  return out;
}

namespace {

SplitSpec make_group_holdout_split(const RegionIndex& index, double frac,
                                   std::uint64_t seed, TaskKind kind) {
  if (!(frac > 0.0 && frac < 1.0))
    throw ConfigError("split.holdout_fraction must be in (0, 1)");

  // Group of each postal: county for interpolation, state for extrapolation.
  std::map<std::string, std::string> group_of;
  std::set<std::string> group_set;
  for (const auto& postal : index.postal_ids) {
    const std::string group = kind == TaskKind::interpolation
                                  ? index.postal_to_county.at(postal)
                                  : index.state_of_postal(postal);
    group_of[postal] = group;
    group_set.insert(group);
  }
  // All groups participate, including ones without postal members.
  if (kind == TaskKind::interpolation) {
    for (const auto& [county, state] : index.county_to_state) group_set.insert(county);
  } else {
    for (const auto& [county, state] : index.county_to_state) group_set.insert(state);
  }
  std::vector<std::string> groups(group_set.begin(), group_set.end());
  if (groups.size() < 5)
    throw ValidationError("group holdout needs at least 5 " +
                          std::string(kind == TaskKind::interpolation ? "counties" : "states"));

  const std::size_t n_holdout =
      static_cast<std::size_t>(std::floor(frac * static_cast<double>(groups.size())));
  Rng rng(Rng::derive(seed, "holdout:" + to_string(kind)));
  shuffle(groups, rng);
  std::set<std::string> holdout(groups.begin(), groups.begin() + n_holdout);

  SplitSpec split;
  split.kind = kind;
  split.holdout_fraction = frac;
  split.rng_seed = seed;
  split.holdout_groups.assign(holdout.begin(), holdout.end());

  std::vector<std::string> remaining;
  for (const auto& postal : index.postal_ids) {
    if (holdout.count(group_of.at(postal)))
      split.test.push_back(postal);
    else
      remaining.push_back(postal);
  }
  // 80/20 train/validation over the remaining postal codes.
  Rng val_rng(Rng::derive(seed, "validation:" + to_string(kind)));
  shuffle(remaining, val_rng);
  const std::size_t n_val =
      static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(remaining.size())));
  split.validation.assign(remaining.begin(), remaining.begin() + n_val);
  split.train.assign(remaining.begin() + n_val, remaining.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  split.manifest_hash = split_manifest_hash(split);
  return split;
}

}  // namespace

SplitSpec make_interpolation_split(const RegionIndex& index, double frac,
                                   std::uint64_t seed) {
  return make_group_holdout_split(index, frac, seed, TaskKind::interpolation);
}

SplitSpec make_extrapolation_split(const RegionIndex& index, double frac,
                                   std::uint64_t seed) {
  return make_group_holdout_split(index, frac, seed, TaskKind::extrapolation);
}

SplitSpec make_superres_split(const SplitSpec& interpolation, const RegionIndex& index) {
  if (interpolation.kind != TaskKind::interpolation)
    throw ConfigError("make_superres_split needs an interpolation split");
  SplitSpec split;
  split.kind = TaskKind::superres;
  split.holdout_fraction = interpolation.holdout_fraction;
  split.rng_seed = interpolation.rng_seed;
  split.holdout_groups = interpolation.holdout_groups;

  // Training rows: counties of the training universe (all non-holdout counties).
  std::set<std::string> holdout(interpolation.holdout_groups.begin(),
                                interpolation.holdout_groups.end());
  for (const auto& [county, state] : index.county_to_state)
    if (!holdout.count(county)) split.train.push_back(county);

  // Validation: seeded 20% of the interpolation training postal codes.
  auto pool = interpolation.train;
  Rng rng(Rng::derive(interpolation.rng_seed, "superres-validation"));
  shuffle(pool, rng);
  const std::size_t n_val =
      static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(pool.size())));
  split.validation.assign(pool.begin(), pool.begin() + n_val);

  split.test = interpolation.test;
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  split.manifest_hash = split_manifest_hash(split);
  return split;
}

std::string split_manifest_hash(const SplitSpec& split) {
  // FNV-1a over the canonical member listing.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0x1f;
    h *= 0x100000001b3ULL;
  };
  mix(to_string(split.kind));
  mix(std::to_string(split.rng_seed));
  for (const auto& id : split.train) mix("t:" + id);
  for (const auto& id : split.validation) mix("v:" + id);
  for (const auto& id : split.test) mix("e:" + id);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace pdfm::bench
