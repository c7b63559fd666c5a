#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdfm/features.hpp"
#include "pdfm/geo.hpp"

namespace pdfm::graph {

enum class RegionKind { postal, county };

std::string to_string(RegionKind k);
RegionKind region_kind_from_string(const std::string& s);

struct Region {
  std::string id;
  RegionKind kind = RegionKind::postal;
  LatLon centroid;
  std::string state_id;
  std::string county_id;      // parent county; empty for county nodes
  double overlap_weight = 1.0;
};

enum class EdgeSetName : int { prox_postal = 0, prox_county = 1, containment = 2, similarity = 3 };
inline constexpr int kEdgeSetCount = 4;
inline constexpr std::array<EdgeSetName, 4> kAllEdgeSets = {
    EdgeSetName::prox_postal, EdgeSetName::prox_county, EdgeSetName::containment,
    EdgeSetName::similarity};

std::string to_string(EdgeSetName n);
EdgeSetName edge_set_from_string(const std::string& s);

/// Directed edge between node indices into the owning node list.
struct Edge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  double weight = 0.0;
};

struct EdgeSet {
  EdgeSetName name = EdgeSetName::prox_postal;
  std::vector<Edge> edges;
};

struct GraphConfig {
  double proximity_radius_miles = 100.0;
  int proximity_degree_cap = 64;
  int similarity_k = 10;
  std::string similarity_source = "trends";

  void validate() const;
};

/// Build the two same-kind proximity edge sets. An edge (u,v) exists when the
/// kinds match and centroid distance <= radius, subject to a nearest-first
/// degree cap; the union of both directions is kept, so the result is
/// symmetric. Weight = 1 / (1 + distance_miles).
std::pair<EdgeSet, EdgeSet> build_proximity_edges(const std::vector<Region>& nodes,
                                                  const GraphConfig& cfg);

/// One postal->county and one county->postal edge per membership, weighted by
/// the postal node's overlap fraction.
EdgeSet build_containment_edges(const std::vector<Region>& nodes);

/// k-nearest-by-cosine edges within each node kind, symmetrized by union.
/// Zero-norm feature rows are skipped both as source and as target.
EdgeSet build_similarity_edges(const std::vector<Region>& nodes,
                               const features::FeatureBlock& block, int k);

/// Immutable assembled graph: nodes, the four edge sets, per-edge-set
/// adjacency indexes, and standardized feature blocks row-aligned with nodes.
class RegionGraph {
 public:
  RegionGraph() = default;

  const std::vector<Region>& nodes() const { return nodes_; }
  const Region& node(std::uint32_t i) const { return nodes_[i]; }
  std::uint32_t index_of(const std::string& id) const;
  bool has_node(const std::string& id) const { return by_id_.count(id) > 0; }

  const EdgeSet& edge_set(EdgeSetName name) const {
    return edge_sets_[static_cast<int>(name)];
  }

  /// Out-neighbors of `node` in one edge set, O(degree).
  std::span<const Edge> neighbors(std::uint32_t node, EdgeSetName name) const;

  const std::map<std::string, features::FeatureBlock>& blocks() const { return blocks_; }
  const features::FeatureBlock& block(const std::string& source) const;

  /// Postal member indices per county index.
  const std::vector<std::vector<std::uint32_t>>& county_members() const {
    return county_members_;
  }

  friend RegionGraph assemble_graph(std::vector<Region> nodes,
                                    std::vector<EdgeSet> edge_sets,
                                    std::map<std::string, features::FeatureBlock> blocks);

 private:
  std::vector<Region> nodes_;
  std::map<std::string, std::uint32_t> by_id_;
  std::array<EdgeSet, kEdgeSetCount> edge_sets_;
  // CSR index per edge set: offsets_[set][node] .. offsets_[set][node+1]
  std::array<std::vector<std::uint32_t>, kEdgeSetCount> offsets_;
  std::array<std::vector<Edge>, kEdgeSetCount> sorted_edges_;
  std::map<std::string, features::FeatureBlock> blocks_;
  std::vector<std::vector<std::uint32_t>> county_members_;
};

/// Validates all component invariants, indexes adjacency and freezes the
/// result. Blocks must carry one row per node, aligned by id (any order).
RegionGraph assemble_graph(std::vector<Region> nodes, std::vector<EdgeSet> edge_sets,
                           std::map<std::string, features::FeatureBlock> blocks);

/// Writes graph.json plus edges_<set>.csv / features_std_<source>.csv.
void export_graph(const RegionGraph& graph, const std::filesystem::path& dir);

RegionGraph import_graph(const std::filesystem::path& dir);

}  // namespace pdfm::graph
