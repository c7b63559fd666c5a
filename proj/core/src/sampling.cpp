#include "pdfm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"
#include "pdfm/rng.hpp"

namespace pdfm::sampling {

std::string to_string(WeightMode m) {
  return m == WeightMode::uniform ? "uniform" : "edge_weight";
}

WeightMode weight_mode_from_string(const std::string& s) {
  if (s == "uniform") return WeightMode::uniform;
  if (s == "edge_weight") return WeightMode::edge_weight;
  throw ConfigError("unknown sampler weight mode: " + s);
}

void SamplerConfig::validate() const {
  if (max_hops < 1) throw ConfigError("sampler.max_hops must be >= 1");
  for (int f : fanout)
    if (f < 1) throw ConfigError("sampler.fanout must be >= 1");
}

bool Subgraph::contains(std::uint32_t node) const { return hop_of(node) >= 0; }

int Subgraph::hop_of(std::uint32_t node) const {
  for (const auto& n : nodes)
    if (n.node == node) return n.hop;
  return -1;
}

Subgraph sample_subgraph(const graph::RegionGraph& graph, const std::string& seed_id,
                         const SamplerConfig& cfg) {
  return sample_subgraph(graph, graph.index_of(seed_id), cfg);
}

Subgraph sample_subgraph(const graph::RegionGraph& g, std::uint32_t seed,
                         const SamplerConfig& cfg) {
  cfg.validate();
  if (seed >= g.nodes().size())
    throw LookupError("sample_subgraph: seed index out of range");

  Rng rng(Rng::derive(cfg.rng_seed, g.node(seed).id));

  Subgraph sub;
  sub.seed = seed;
  sub.nodes.push_back({seed, 0});
  std::unordered_map<std::uint32_t, int> hop_of;
  hop_of.emplace(seed, 0);

  std::vector<std::uint32_t> frontier{seed};
  struct Pick {
    double key;
    std::uint32_t idx;  // position in the neighbor span
  };
  std::vector<Pick> picks;

  for (int hop = 1; hop <= cfg.max_hops && !frontier.empty(); ++hop) {
    std::vector<std::uint32_t> next;
    for (std::uint32_t v : frontier) {
      for (auto set : graph::kAllEdgeSets) {
        const auto neighbors = g.neighbors(v, set);
        if (neighbors.empty()) continue;
        const int fanout = cfg.fanout[static_cast<int>(set)];
        picks.clear();
        picks.reserve(neighbors.size());
        // Exponential-race keys: key = -ln(u)/w, smallest keys win. One draw
        // per neighbor in adjacency order keeps the stream layout fixed.
        for (std::uint32_t i = 0; i < neighbors.size(); ++i) {
          const double u = 1.0 - rng.uniform();  // (0, 1]
          const double w = cfg.mode == WeightMode::uniform ? 1.0 : neighbors[i].weight;
          const double key =
              w > 0.0 ? -std::log(u) / w : std::numeric_limits<double>::infinity();
          picks.push_back({key, i});
        }
        const std::size_t take =
            std::min(picks.size(), static_cast<std::size_t>(fanout));
        std::partial_sort(picks.begin(), picks.begin() + take, picks.end(),
                          [&](const Pick& a, const Pick& b) {
                            if (a.key != b.key) return a.key < b.key;
                            return g.node(neighbors[a.idx].dst).id <
                                   g.node(neighbors[b.idx].dst).id;
                          });
        for (std::size_t p = 0; p < take; ++p) {
          if (!std::isfinite(picks[p].key)) break;  // zero-weight tail
          const auto& edge = neighbors[picks[p].idx];
          if (hop_of.count(edge.dst)) continue;  // first discovery hop only
          hop_of.emplace(edge.dst, hop);
          sub.nodes.push_back({edge.dst, hop});
          sub.edges.push_back({v, edge.dst, set, edge.weight});
          next.push_back(edge.dst);
        }
      }
    }
    // Deterministic frontier order for the next round: by node id.
    std::sort(next.begin(), next.end(), [&](std::uint32_t a, std::uint32_t b) {
      return g.node(a).id < g.node(b).id;
    });
    frontier = std::move(next);
  }

  std::sort(sub.nodes.begin(), sub.nodes.end(),
            [&](const SubgraphNode& a, const SubgraphNode& b) {
              if (a.hop != b.hop) return a.hop < b.hop;
              return g.node(a.node).id < g.node(b.node).id;
            });
  return sub;
}

std::vector<std::string> enumerate_seeds(const graph::RegionGraph& graph) {
  std::vector<std::string> out;
  out.reserve(graph.nodes().size());
  for (const auto& r : graph.nodes()) out.push_back(r.id);
  return out;
}

void dump_subgraph_json(const Subgraph& sub, const graph::RegionGraph& graph,
                        const std::filesystem::path& path) {
  nlohmann::json j;
  j["seed"] = graph.node(sub.seed).id;
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : sub.nodes)
    nodes.push_back({{"id", graph.node(n.node).id}, {"hop", n.hop}});
  j["nodes"] = std::move(nodes);
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : sub.edges)
    edges.push_back({{"src", graph.node(e.src).id},
                     {"dst", graph.node(e.dst).id},
                     {"set", graph::to_string(e.set)},
                     {"weight", e.weight}});
  j["edges"] = std::move(edges);
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace pdfm::sampling
