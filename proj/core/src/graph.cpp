#include "pdfm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"

namespace pdfm::graph {

using nlohmann::json;

std::string to_string(RegionKind k) {
  return k == RegionKind::postal ? "postal" : "county";
}

RegionKind region_kind_from_string(const std::string& s) {
  if (s == "postal") return RegionKind::postal;
  if (s == "county") return RegionKind::county;
  throw SchemaError("unknown region kind: " + s);
}

std::string to_string(EdgeSetName n) {
  switch (n) {
    case EdgeSetName::prox_postal: return "prox_postal";
    case EdgeSetName::prox_county: return "prox_county";
    case EdgeSetName::containment: return "containment";
    case EdgeSetName::similarity: return "similarity";
  }
  return "prox_postal";
}

EdgeSetName edge_set_from_string(const std::string& s) {
  for (auto name : kAllEdgeSets)
    if (to_string(name) == s) return name;
  throw SchemaError("unknown edge set: " + s);
}

void GraphConfig::validate() const {
  if (proximity_radius_miles <= 0.0)
    throw ConfigError("graph.proximity_radius_miles must be positive");
  if (proximity_degree_cap < 1)
    throw ConfigError("graph.proximity_degree_cap must be >= 1");
  if (similarity_k < 1) throw ConfigError("graph.similarity_k must be >= 1");
}

namespace {

void validate_region(const Region& r) {
  if (r.id.empty()) throw ValidationError("region with empty id");
  if (!(r.centroid.lat >= -90.0 && r.centroid.lat <= 90.0) ||
      !(r.centroid.lon >= -180.0 && r.centroid.lon <= 180.0))
    throw ValidationError("region '" + r.id + "' has out-of-range centroid");
  if (r.kind == RegionKind::postal && r.county_id.empty())
    throw ValidationError("postal region '" + r.id + "' has no parent county");
  if (r.kind == RegionKind::county && !r.county_id.empty())
    throw ValidationError("county region '" + r.id + "' must not have a parent county");
  if (r.overlap_weight < 0.0 || r.overlap_weight > 1.0)
    throw ValidationError("region '" + r.id + "' overlap weight outside [0,1]");
}

}  // namespace

std::pair<EdgeSet, EdgeSet> build_proximity_edges(const std::vector<Region>& nodes,
                                                  const GraphConfig& cfg) {
  cfg.validate();
  if (nodes.empty()) throw ValidationError("build_proximity_edges: empty node set");
  for (const auto& r : nodes) validate_region(r);

  EdgeSet postal{EdgeSetName::prox_postal, {}};
  EdgeSet county{EdgeSetName::prox_county, {}};

  struct Candidate {
    double dist;
    std::uint32_t other;
  };
  // Nearest-first truncation per node, then union of directions.
  std::set<std::pair<std::uint32_t, std::uint32_t>> kept;
  std::vector<Candidate> cands;
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    cands.clear();
    for (std::uint32_t j = 0; j < nodes.size(); ++j) {
      if (i == j || nodes[i].kind != nodes[j].kind) continue;
      const double d = geodesic_distance_miles(nodes[i].centroid, nodes[j].centroid);
      if (d <= cfg.proximity_radius_miles) cands.push_back({d, j});
    }
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.dist != b.dist) return a.dist < b.dist;
      return nodes[a.other].id < nodes[b.other].id;
    });
    const std::size_t cap = std::min<std::size_t>(cands.size(), cfg.proximity_degree_cap);
    for (std::size_t c = 0; c < cap; ++c) {
      kept.insert({i, cands[c].other});
      kept.insert({cands[c].other, i});
    }
  }
  for (const auto& [src, dst] : kept) {
    const double d = geodesic_distance_miles(nodes[src].centroid, nodes[dst].centroid);
    Edge e{src, dst, 1.0 / (1.0 + d)};
    if (nodes[src].kind == RegionKind::postal)
      postal.edges.push_back(e);
    else
      county.edges.push_back(e);
  }
  return {std::move(postal), std::move(county)};
}

EdgeSet build_containment_edges(const std::vector<Region>& nodes) {
  std::map<std::string, std::uint32_t> county_index;
  for (std::uint32_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].kind == RegionKind::county) county_index[nodes[i].id] = i;
  EdgeSet out{EdgeSetName::containment, {}};
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind != RegionKind::postal) continue;
    auto it = county_index.find(nodes[i].county_id);
    if (it == county_index.end())
      throw JoinError("postal region '" + nodes[i].id + "' references unknown county '" +
                      nodes[i].county_id + "'");
    out.edges.push_back({i, it->second, nodes[i].overlap_weight});
    out.edges.push_back({it->second, i, nodes[i].overlap_weight});
  }
  return out;
}

EdgeSet build_similarity_edges(const std::vector<Region>& nodes,
                               const features::FeatureBlock& block, int k) {
  if (k < 1) throw ConfigError("similarity k must be >= 1");
  if (block.ids.size() != nodes.size())
    throw SchemaError("similarity block row count != node count");
  std::map<std::string, std::uint32_t> row_of;
  for (std::uint32_t r = 0; r < block.ids.size(); ++r) row_of[block.ids[r]] = r;

  std::vector<double> norms(nodes.size(), 0.0);
  std::vector<std::uint32_t> row(nodes.size(), 0);
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    auto it = row_of.find(nodes[i].id);
    if (it == row_of.end())
      throw SchemaError("similarity block missing row for node '" + nodes[i].id + "'");
    row[i] = it->second;
    double s = 0.0;
    for (double v : block.values.row(it->second)) s += v * v;
    norms[i] = std::sqrt(s);
  }

  struct Candidate {
    double cos;
    std::uint32_t other;
  };
  std::set<std::pair<std::uint32_t, std::uint32_t>> kept;
  std::vector<Candidate> cands;
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    if (norms[i] == 0.0) continue;  // cosine undefined; skipped both ways
    cands.clear();
    auto ri = block.values.row(row[i]);
    for (std::uint32_t j = 0; j < nodes.size(); ++j) {
      if (i == j || nodes[i].kind != nodes[j].kind || norms[j] == 0.0) continue;
      auto rj = block.values.row(row[j]);
      double dot = 0.0;
      for (std::size_t c = 0; c < ri.size(); ++c) dot += ri[c] * rj[c];
      cands.push_back({dot / (norms[i] * norms[j]), j});
    }
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.cos != b.cos) return a.cos > b.cos;
      return nodes[a.other].id < nodes[b.other].id;
    });
    const std::size_t kk = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(k));
    for (std::size_t c = 0; c < kk; ++c) {
      kept.insert({i, cands[c].other});
      kept.insert({cands[c].other, i});
    }
  }
  EdgeSet out{EdgeSetName::similarity, {}};
  for (const auto& [src, dst] : kept) {
    auto rs = block.values.row(row[src]);
    auto rd = block.values.row(row[dst]);
    double dot = 0.0;
    for (std::size_t c = 0; c < rs.size(); ++c) dot += rs[c] * rd[c];
    const double cosine = dot / (norms[src] * norms[dst]);
    out.edges.push_back({src, dst, std::clamp(cosine, 0.0, 1.0)});
  }
  return out;
}

std::uint32_t RegionGraph::index_of(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw LookupError("unknown region id: " + id);
  return it->second;
}

std::span<const Edge> RegionGraph::neighbors(std::uint32_t node, EdgeSetName name) const {
  const auto& offs = offsets_[static_cast<int>(name)];
  const auto& edges = sorted_edges_[static_cast<int>(name)];
  return {edges.data() + offs[node], offs[node + 1] - offs[node]};
}

const features::FeatureBlock& RegionGraph::block(const std::string& source) const {
  auto it = blocks_.find(source);
  if (it == blocks_.end()) throw LookupError("graph has no block for source: " + source);
  return it->second;
}

RegionGraph assemble_graph(std::vector<Region> nodes, std::vector<EdgeSet> edge_sets,
                           std::map<std::string, features::FeatureBlock> blocks) {
  RegionGraph g;
  g.nodes_ = std::move(nodes);
  for (std::uint32_t i = 0; i < g.nodes_.size(); ++i) {
    validate_region(g.nodes_[i]);
    if (!g.by_id_.emplace(g.nodes_[i].id, i).second)
      throw AssemblyError("duplicate region id: " + g.nodes_[i].id);
  }

  for (auto& set : edge_sets) {
    auto& slot = g.edge_sets_[static_cast<int>(set.name)];
    if (!slot.edges.empty()) throw AssemblyError("edge set provided twice: " + to_string(set.name));
    slot = std::move(set);
  }

  const std::size_t n = g.nodes_.size();
  for (int s = 0; s < kEdgeSetCount; ++s) {
    const auto name = static_cast<EdgeSetName>(s);
    auto& set = g.edge_sets_[s];
    set.name = name;
    std::set<std::pair<std::uint32_t, std::uint32_t>> present;
    for (const auto& e : set.edges) {
      if (e.src >= n || e.dst >= n)
        throw AssemblyError("edge endpoint out of range in " + to_string(name));
      if (e.src == e.dst)
        throw AssemblyError("self-loop on '" + g.nodes_[e.src].id + "' in " + to_string(name));
      if (e.weight < 0.0)
        throw AssemblyError("negative edge weight in " + to_string(name));
      if (!present.insert({e.src, e.dst}).second)
        throw AssemblyError("duplicate edge " + g.nodes_[e.src].id + "->" +
                            g.nodes_[e.dst].id + " in " + to_string(name));
      const auto skind = g.nodes_[e.src].kind;
      const auto dkind = g.nodes_[e.dst].kind;
      switch (name) {
        case EdgeSetName::prox_postal:
          if (skind != RegionKind::postal || dkind != RegionKind::postal)
            throw AssemblyError("prox_postal edge touches a county node");
          break;
        case EdgeSetName::prox_county:
          if (skind != RegionKind::county || dkind != RegionKind::county)
            throw AssemblyError("prox_county edge touches a postal node");
          break;
        case EdgeSetName::containment:
          if (skind == dkind)
            throw AssemblyError("containment edge must connect postal and county: " +
                                g.nodes_[e.src].id + "->" + g.nodes_[e.dst].id);
          break;
        case EdgeSetName::similarity:
          if (skind != dkind)
            throw AssemblyError("similarity edge crosses node kinds");
          break;
      }
    }
    if (name != EdgeSetName::containment) {
      for (const auto& e : set.edges)
        if (!present.count({e.dst, e.src}))
          throw AssemblyError("asymmetric edge " + g.nodes_[e.src].id + "->" +
                              g.nodes_[e.dst].id + " in " + to_string(name));
    }
  }

  // Feature blocks: one row per node, reordered into node order.
  for (auto& [source, blk] : blocks) {
    if (blk.ids.size() != n)
      throw AssemblyError("block '" + source + "' has " + std::to_string(blk.ids.size()) +
                          " rows for " + std::to_string(n) + " nodes");
    std::map<std::string, std::uint32_t> row_of;
    for (std::uint32_t r = 0; r < blk.ids.size(); ++r) row_of[blk.ids[r]] = r;
    features::FeatureBlock aligned;
    aligned.source = blk.source;
    aligned.columns = blk.columns;
    aligned.values = Matrix(n, blk.values.cols());
    aligned.ids.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      auto it = row_of.find(g.nodes_[i].id);
      if (it == row_of.end())
        throw AssemblyError("block '" + source + "' missing row for node '" +
                            g.nodes_[i].id + "'");
      aligned.ids.push_back(g.nodes_[i].id);
      for (std::size_t j = 0; j < blk.values.cols(); ++j)
        aligned.values.at(i, j) = blk.values.at(it->second, j);
    }
    g.blocks_[source] = std::move(aligned);
  }

  // CSR adjacency per edge set, neighbors sorted by destination id.
  for (int s = 0; s < kEdgeSetCount; ++s) {
    auto edges = g.edge_sets_[s].edges;
    std::sort(edges.begin(), edges.end(), [&](const Edge& a, const Edge& b) {
      if (a.src != b.src) return a.src < b.src;
      return g.nodes_[a.dst].id < g.nodes_[b.dst].id;
    });
    auto& offs = g.offsets_[s];
    offs.assign(n + 1, 0);
    for (const auto& e : edges) ++offs[e.src + 1];
    for (std::size_t i = 0; i < n; ++i) offs[i + 1] += offs[i];
    g.sorted_edges_[s] = std::move(edges);
  }

  // County membership lists. A parent county id that is not a node is
  // tolerated here; containment edges are the validated structural link.
  g.county_members_.assign(n, {});
  for (std::uint32_t i = 0; i < n; ++i) {
    if (g.nodes_[i].kind != RegionKind::postal) continue;
    auto it = g.by_id_.find(g.nodes_[i].county_id);
    if (it != g.by_id_.end()) g.county_members_[it->second].push_back(i);
  }
  return g;
}

void export_graph(const RegionGraph& graph, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["node_count"] = graph.nodes().size();
  json nodes = json::array();
  for (const auto& r : graph.nodes()) {
    nodes.push_back({{"id", r.id},
                     {"kind", to_string(r.kind)},
                     {"lat", r.centroid.lat},
                     {"lon", r.centroid.lon},
                     {"state_id", r.state_id},
                     {"county_id", r.county_id},
                     {"overlap_weight", r.overlap_weight}});
  }
  manifest["nodes"] = std::move(nodes);
  json sources = json::array();
  for (const auto& [source, blk] : graph.blocks()) sources.push_back(source);
  manifest["block_sources"] = std::move(sources);
  write_text_file(dir / "graph.json", manifest.dump(2) + "\n");

  for (auto name : kAllEdgeSets) {
    CsvTable t;
    t.header = {"src", "dst", "weight"};
    for (const auto& e : graph.edge_set(name).edges)
      t.rows.push_back({graph.node(e.src).id, graph.node(e.dst).id, format_double(e.weight)});
    write_csv(dir / ("edges_" + to_string(name) + ".csv"), t);
  }
  for (const auto& [source, blk] : graph.blocks()) {
    CsvTable t;
    t.header.push_back("region_id");
    for (const auto& c : blk.columns) t.header.push_back(c);
    for (std::size_t i = 0; i < blk.ids.size(); ++i) {
      std::vector<std::string> row{blk.ids[i]};
      for (double v : blk.values.row(i)) row.push_back(format_double(v));
      t.rows.push_back(std::move(row));
    }
    write_csv(dir / ("features_std_" + source + ".csv"), t);
  }
}

RegionGraph import_graph(const std::filesystem::path& dir) {
  json manifest = json::parse(read_text_file(dir / "graph.json"));
  std::vector<Region> nodes;
  for (const auto& jn : manifest.at("nodes")) {
    Region r;
    r.id = jn.at("id").get<std::string>();
    r.kind = region_kind_from_string(jn.at("kind").get<std::string>());
    r.centroid = {jn.at("lat").get<double>(), jn.at("lon").get<double>()};
    r.state_id = jn.at("state_id").get<std::string>();
    r.county_id = jn.at("county_id").get<std::string>();
    r.overlap_weight = jn.at("overlap_weight").get<double>();
    nodes.push_back(std::move(r));
  }
  std::map<std::string, std::uint32_t> index;
  for (std::uint32_t i = 0; i < nodes.size(); ++i) index[nodes[i].id] = i;

  std::vector<EdgeSet> sets;
  for (auto name : kAllEdgeSets) {
    EdgeSet set{name, {}};
    auto t = read_csv(dir / ("edges_" + to_string(name) + ".csv"));
    for (const auto& row : t.rows) {
      auto si = index.find(row[0]);
      auto di = index.find(row[1]);
      if (si == index.end() || di == index.end())
        throw SchemaError("edge references unknown node: " + row[0] + "->" + row[1]);
      set.edges.push_back({si->second, di->second, parse_double(row[2])});
    }
    sets.push_back(std::move(set));
  }

  std::map<std::string, features::FeatureBlock> blocks;
  for (const auto& js : manifest.at("block_sources")) {
    const std::string source = js.get<std::string>();
    auto t = read_csv(dir / ("features_std_" + source + ".csv"));
    features::FeatureBlock blk;
    blk.source = source;
    blk.columns.assign(t.header.begin() + 1, t.header.end());
    blk.values = Matrix(t.rows.size(), blk.columns.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      blk.ids.push_back(t.rows[i][0]);
      for (std::size_t j = 0; j < blk.columns.size(); ++j)
        blk.values.at(i, j) = parse_double(t.rows[i][j + 1]);
    }
    blocks[source] = std::move(blk);
  }
  return assemble_graph(std::move(nodes), std::move(sets), std::move(blocks));
}

}  // namespace pdfm::graph
