#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pdfm/graph.hpp"

namespace pdfm::sampling {

enum class WeightMode { uniform, edge_weight };

std::string to_string(WeightMode m);
WeightMode weight_mode_from_string(const std::string& s);

struct SamplerConfig {
  int max_hops = 4;
  // Neighbors drawn per frontier node, per edge set, at every hop.
  std::array<int, graph::kEdgeSetCount> fanout = {8, 8, 8, 8};
  WeightMode mode = WeightMode::edge_weight;
  std::uint64_t rng_seed = 0;

  void set_fanout(int f) { fanout.fill(f); }
  void validate() const;
};

struct SubgraphNode {
  std::uint32_t node = 0;
  int hop = 0;
};

struct SubgraphEdge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  graph::EdgeSetName set = graph::EdgeSetName::prox_postal;
  double weight = 0.0;
};

/// Seed-anchored sampled neighborhood. Nodes are ordered by (hop, id); each
/// node appears once, at its first discovery hop; edges are the sampled
/// expansion edges tagged with their edge set.
struct Subgraph {
  std::uint32_t seed = 0;
  std::vector<SubgraphNode> nodes;
  std::vector<SubgraphEdge> edges;

  bool contains(std::uint32_t node) const;
  int hop_of(std::uint32_t node) const;  // -1 when absent
};

/// Breadth-first expansion from the seed. At every frontier node each edge
/// set independently draws up to fanout neighbors without replacement,
/// uniformly or proportional to edge weight (exponential-race keys). The RNG
/// stream is split from (cfg.rng_seed, seed node id), so subgraphs are
/// reproducible and independent across seeds.
Subgraph sample_subgraph(const graph::RegionGraph& graph, const std::string& seed_id,
                         const SamplerConfig& cfg);

Subgraph sample_subgraph(const graph::RegionGraph& graph, std::uint32_t seed,
                         const SamplerConfig& cfg);

/// Every node id exactly once, in graph node order.
std::vector<std::string> enumerate_seeds(const graph::RegionGraph& graph);

/// Debug dump: seed, nodes-with-hops, edges.
void dump_subgraph_json(const Subgraph& sub, const graph::RegionGraph& graph,
                        const std::filesystem::path& path);

}  // namespace pdfm::sampling
