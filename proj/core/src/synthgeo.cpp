#include "pdfm/synthgeo.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"
#include "pdfm/rng.hpp"

namespace pdfm::synth {

std::string to_string(LabelTransform t) {
  switch (t) {
    case LabelTransform::linear: return "linear";
    case LabelTransform::mild_cubic: return "mild_cubic";
    case LabelTransform::scaled_tanh: return "scaled_tanh";
  }
  return "linear";
}

LabelTransform label_transform_from_string(const std::string& s) {
  if (s == "linear") return LabelTransform::linear;
  if (s == "mild_cubic") return LabelTransform::mild_cubic;
  if (s == "scaled_tanh") return LabelTransform::scaled_tanh;
  throw ConfigError("unknown label transform: " + s);
}

void SynthConfig::validate() const {
  if (n_states < 1) throw ConfigError("synth.n_states must be >= 1");
  if (n_counties < n_states) throw ConfigError("synth.n_counties must be >= n_states");
  if (n_postal < n_counties) throw ConfigError("synth.n_postal must be >= n_counties");
  if (latent_dim < 1) throw ConfigError("synth.latent_dim must be >= 1");
  if (static_cast<int>(spatial_smoothness.size()) != latent_dim)
    throw ConfigError("synth.spatial_smoothness must list one length-scale per latent factor");
  for (const auto& [source, dim] : block_dims)
    if (dim < 1) throw ConfigError("synth.block_dims." + source + " must be >= 1");
  for (const auto& [source, std] : feature_noise_std)
    if (std < 0.0) throw ConfigError("synth.feature_noise_std." + source + " must be >= 0");
  for (const auto& spec : label_specs) {
    if (spec.task.empty()) throw ConfigError("synth.label_specs: empty task name");
    if (spec.factor < 0 || spec.factor >= latent_dim)
      throw ConfigError("synth.label_specs." + spec.task + ".factor out of range");
    if (spec.noise_std < 0.0)
      throw ConfigError("synth.label_specs." + spec.task + ".noise_std must be >= 0");
    if (spec.neighbor_mix < 0.0 || spec.neighbor_mix > 1.0)
      throw ConfigError("synth.label_specs." + spec.task + ".neighbor_mix must be in [0,1]");
  }
  for (const auto& spec : series_specs) {
    if (spec.task.empty()) throw ConfigError("synth.series_specs: empty task name");
    if (spec.n_steps < 3) throw ConfigError("synth.series_specs." + spec.task + ".n_steps must be >= 3");
    if (std::abs(spec.ar_coefficient) >= 1.0)
      throw ConfigError("synth.series_specs." + spec.task + ".ar_coefficient must satisfy |phi| < 1");
    if (spec.slope_min > spec.slope_max)
      throw ConfigError("synth.series_specs." + spec.task + ".slope range is inverted");
    if (spec.noise_std < 0.0)
      throw ConfigError("synth.series_specs." + spec.task + ".noise_std must be >= 0");
    if (spec.level != "postal" && spec.level != "county")
      throw ConfigError("synth.series_specs." + spec.task + ".level must be postal or county");
    if (spec.bias_onset_step < 0 || spec.bias_onset_step >= spec.n_steps)
      throw ConfigError("synth.series_specs." + spec.task + ".bias_onset_step out of range");
    if (spec.period < 1)
      throw ConfigError("synth.series_specs." + spec.task + ".period must be >= 1");
  }
}

namespace {

constexpr double kLat0 = 34.0;
constexpr double kLon0 = -104.0;

struct StateCell {
  double lat_lo, lat_hi, lon_lo, lon_hi;
};

std::vector<StateCell> layout_states(int n_states) {
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_states))));
  const int rows = (n_states + cols - 1) / cols;
  const double cell = 4.0;
  if (kLat0 + rows * cell > 88.0 || kLon0 + cols * cell > 178.0)
    throw ConfigError("synth.n_states too large for the state grid layout");
  std::vector<StateCell> cells;
  for (int s = 0; s < n_states; ++s) {
    const int r = s / cols, c = s % cols;
    cells.push_back({kLat0 + r * cell, kLat0 + (r + 1) * cell,
                     kLon0 + c * cell, kLon0 + (c + 1) * cell});
  }
  return cells;
}

std::string pad_id(const char* prefix, int i, int width) {
  std::string n = std::to_string(i);
  std::string out(prefix);
  out.append(width - std::min<std::size_t>(width, n.size()), '0');
  out += n;
  return out;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double apply_transform(LabelTransform t, double z) {
  switch (t) {
    case LabelTransform::linear: return z;
    case LabelTransform::mild_cubic: return z + 0.03 * z * z * z;
    case LabelTransform::scaled_tanh: return 5.0 * std::tanh(z / 5.0);
  }
  return z;
}

void standardize_column(Matrix& m, std::size_t col) {
  double sum = 0.0, sumsq = 0.0;
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i) sum += m.at(i, col);
  const double mean = sum / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = m.at(i, col) - mean;
    sumsq += d * d;
  }
  const double std = std::max(std::sqrt(sumsq / static_cast<double>(n)), 1e-12);
  for (std::size_t i = 0; i < n; ++i) m.at(i, col) = (m.at(i, col) - mean) / std;
}

}  // namespace

WorldBundle generate_world(const SynthConfig& cfg) {
  cfg.validate();
  WorldBundle world;
  world.label_specs = cfg.label_specs;
  const auto cells = layout_states(cfg.n_states);

  // Postal positions first, uniform inside their round-robin state cell.
  std::vector<LatLon> postal_pos(cfg.n_postal);
  for (int p = 0; p < cfg.n_postal; ++p) {
    const int state = p % cfg.n_states;
    const auto& cell = cells[state];
    Rng rng(Rng::derive(cfg.rng_seed, "postal:" + pad_id("P", p, 5)));
    postal_pos[p] = {rng.uniform(cell.lat_lo, cell.lat_hi),
                     rng.uniform(cell.lon_lo, cell.lon_hi)};
  }

  // County seeds anchor to postal positions (the j-th postal of their state),
  // so every county Voronoi cell owns at least its anchor.
  struct CountySeed {
    std::string id;
    int state;
    LatLon pos;
  };
  std::vector<CountySeed> counties;
  for (int c = 0; c < cfg.n_counties; ++c) {
    const int state = c % cfg.n_states;
    const int rank = c / cfg.n_states;  // j-th county of this state
    const int anchor = state + rank * cfg.n_states;
    counties.push_back({pad_id("C", c, 4), state, postal_pos[anchor]});
  }

  for (const auto& c : counties) {
    graph::Region r;
    r.id = c.id;
    r.kind = graph::RegionKind::county;
    r.centroid = c.pos;
    r.state_id = pad_id("S", c.state, 3);
    r.overlap_weight = 1.0;
    world.regions.push_back(std::move(r));
  }

  // Postal nodes, each assigned to the nearest same-state county seed.
  for (int p = 0; p < cfg.n_postal; ++p) {
    const int state = p % cfg.n_states;
    const std::string id = pad_id("P", p, 5);
    const LatLon pos = postal_pos[p];
    std::string best;
    double best_d = 0.0;
    for (const auto& c : counties) {
      if (c.state != state) continue;
      const double d = geodesic_distance_miles(pos, c.pos);
      if (best.empty() || d < best_d || (d == best_d && c.id < best)) {
        best = c.id;
        best_d = d;
      }
    }
    graph::Region r;
    r.id = id;
    r.kind = graph::RegionKind::postal;
    r.centroid = pos;
    r.state_id = pad_id("S", state, 3);
    r.county_id = best;
    r.overlap_weight = 1.0;  // Voronoi assignment: full overlap with one county
    world.regions.push_back(std::move(r));
    world.membership[id] = best;
    world.postal_ids.push_back(id);
  }

  // Latent factors at postal nodes.
  const int n = cfg.n_postal;
  const int k = cfg.latent_dim;
  world.latents = Matrix(n, k);
  const double lat_lo = kLat0;
  double lat_hi = kLat0, lon_hi = kLon0;
  for (const auto& cell : cells) {
    lat_hi = std::max(lat_hi, cell.lat_hi);
    lon_hi = std::max(lon_hi, cell.lon_hi);
  }
  for (int f = 0; f < k; ++f) {
    const double scale = cfg.spatial_smoothness[f];
    if (scale > 0.0) {
      Rng rng(Rng::derive(cfg.rng_seed, "factor:" + std::to_string(f)));
      struct Bump {
        LatLon center;
        double amp;
      };
      std::vector<Bump> bumps(10);
      for (auto& b : bumps) {
        b.center = {rng.uniform(lat_lo, lat_hi), rng.uniform(kLon0, lon_hi)};
        b.amp = rng.normal();
      }
      for (int p = 0; p < n; ++p) {
        double v = 0.0;
        for (const auto& b : bumps) {
          const double d = geodesic_distance_miles(postal_pos[p], b.center);
          v += b.amp * std::exp(-0.5 * (d / scale) * (d / scale));
        }
        world.latents.at(p, f) = v;
      }
    } else {
      for (int p = 0; p < n; ++p) {
        Rng rng(Rng::derive(cfg.rng_seed, "rough:" + std::to_string(f) + ":" + world.postal_ids[p]));
        world.latents.at(p, f) = rng.normal();
      }
    }
    standardize_column(world.latents, f);
  }

  // Feature blocks: fixed random linear map of the latents plus block noise.
  for (const auto& [source, dim] : cfg.block_dims) {
    Rng mixer_rng(Rng::derive(cfg.rng_seed, "mixer:" + source));
    Matrix mixer(k, dim);
    const double norm = 1.0 / std::sqrt(static_cast<double>(k));
    for (double& v : mixer.flat()) v = mixer_rng.normal() * norm;
    const double noise_std =
        cfg.feature_noise_std.count(source) ? cfg.feature_noise_std.at(source) : 0.0;

    features::FeatureBlock blk;
    blk.source = source;
    blk.ids = world.postal_ids;
    for (int j = 0; j < dim; ++j) blk.columns.push_back(source + "_" + pad_id("", j, 3));
    blk.values = matmul(world.latents, mixer);
    for (int p = 0; p < n; ++p) {
      Rng noise_rng(Rng::derive(cfg.rng_seed, "noise:" + source + ":" + world.postal_ids[p]));
      for (int j = 0; j < dim; ++j) blk.values.at(p, j) += noise_std * noise_rng.normal();
    }
    if (source == "trends") {
      // Trends analog carries nonnegative "query counts" summing to 100.
      for (int p = 0; p < n; ++p) {
        auto row = blk.values.row(p);
        for (double& v : row) v = softplus(v);
        auto scaled = features::normalize_trends(row);
        std::copy(scaled.begin(), scaled.end(), row.begin());
      }
    }
    world.postal_blocks[source] = std::move(blk);
  }
  for (const auto& [source, blk] : world.postal_blocks)
    world.county_blocks[source] = features::aggregate_to_county(blk, world.membership);

  // Labels: monotone transform of one factor, optional neighbor-mean mix.
  std::vector<std::vector<int>> knn;
  for (const auto& spec : cfg.label_specs) {
    if (spec.neighbor_mix > 0.0 && knn.empty()) {
      knn.assign(n, {});
      for (int p = 0; p < n; ++p) {
        std::vector<std::pair<double, int>> d;
        d.reserve(n - 1);
        for (int q = 0; q < n; ++q)
          if (q != p) d.push_back({geodesic_distance_miles(postal_pos[p], postal_pos[q]), q});
        std::sort(d.begin(), d.end(), [&](const auto& a, const auto& b) {
          if (a.first != b.first) return a.first < b.first;
          return world.postal_ids[a.second] < world.postal_ids[b.second];
        });
        for (int i = 0; i < std::min(8, static_cast<int>(d.size())); ++i)
          knn[p].push_back(d[i].second);
      }
    }
    std::vector<double> base(n);
    for (int p = 0; p < n; ++p)
      base[p] = apply_transform(spec.transform, world.latents.at(p, spec.factor));
    std::vector<double> value = base;
    if (spec.neighbor_mix > 0.0) {
      for (int p = 0; p < n; ++p) {
        double nb = 0.0;
        for (int q : knn[p]) nb += base[q];
        if (!knn[p].empty()) nb /= static_cast<double>(knn[p].size());
        value[p] = (1.0 - spec.neighbor_mix) * base[p] + spec.neighbor_mix * nb;
      }
    }
    Rng noise_rng(Rng::derive(cfg.rng_seed, "label:" + spec.task));
    auto& table = world.labels[spec.task];
    for (int p = 0; p < n; ++p)
      table[world.postal_ids[p]] = value[p] + spec.noise_std * noise_rng.normal();
    // County labels by construction equal the mean of member postal labels.
    std::map<std::string, std::pair<double, int>> agg;
    for (int p = 0; p < n; ++p) {
      auto& [sum, count] = agg[world.membership.at(world.postal_ids[p])];
      sum += table.at(world.postal_ids[p]);
      ++count;
    }
    for (const auto& [county, sc] : agg)
      table[county] = sc.first / static_cast<double>(sc.second);
  }

  // Series: level + region bias (function of the latents) + trend + AR(1).
  // County latents are member means, mirroring the label aggregation rule.
  Matrix county_latents(cfg.n_counties, k);
  {
    std::map<std::string, int> county_row;
    for (int c = 0; c < cfg.n_counties; ++c) county_row[counties[c].id] = c;
    std::vector<int> member_count(cfg.n_counties, 0);
    for (int p = 0; p < n; ++p) {
      const int c = county_row.at(world.membership.at(world.postal_ids[p]));
      for (int f = 0; f < k; ++f) county_latents.at(c, f) += world.latents.at(p, f);
      ++member_count[c];
    }
    for (int c = 0; c < cfg.n_counties; ++c)
      if (member_count[c] > 0)
        for (int f = 0; f < k; ++f)
          county_latents.at(c, f) /= static_cast<double>(member_count[c]);
  }
  for (const auto& spec : cfg.series_specs) {
    SeriesPanel panel;
    panel.task = spec.task;
    panel.frequency = spec.frequency;
    panel.period = spec.period;
    panel.level = spec.level;
    const bool county_level = spec.level == "county";
    const int rows = county_level ? cfg.n_counties : n;
    panel.values = Matrix(rows, spec.n_steps);
    panel.valid.assign(rows, 1);
    for (int r = 0; r < rows; ++r) {
      const std::string id = county_level ? counties[r].id : world.postal_ids[r];
      panel.ids.push_back(id);
      double bias = 0.0;
      for (int f = 0; f < k; ++f)
        bias += county_level ? county_latents.at(r, f) : world.latents.at(r, f);
      bias *= spec.region_bias_scale / static_cast<double>(k);
      Rng rng(Rng::derive(cfg.rng_seed, "series:" + spec.task + ":" + id));
      const double slope = rng.uniform(spec.slope_min, spec.slope_max);
      double ar = 0.0;
      for (int t = 0; t < spec.n_steps; ++t) {
        ar = spec.ar_coefficient * ar + spec.noise_std * rng.normal();
        const double b = t >= spec.bias_onset_step ? bias : 0.0;
        panel.values.at(r, t) = spec.level_offset + b + slope * t + ar;
      }
    }
    world.series.push_back(std::move(panel));
  }
  return world;
}

std::vector<std::string> write_world(const WorldBundle& world,
                                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;

  CsvTable regions;
  regions.header = {"id", "kind", "lat", "lon", "state_id", "county_id", "overlap_weight"};
  for (const auto& r : world.regions)
    regions.rows.push_back({r.id, graph::to_string(r.kind), format_double(r.centroid.lat),
                            format_double(r.centroid.lon), r.state_id, r.county_id,
                            format_double(r.overlap_weight)});
  write_csv(dir / "regions.csv", regions);
  written.push_back("regions.csv");

  for (const auto& [source, postal_blk] : world.postal_blocks) {
    CsvTable t;
    t.header.push_back("region_id");
    for (const auto& c : postal_blk.columns) t.header.push_back(c);
    const auto& county_blk = world.county_blocks.at(source);
    for (std::size_t i = 0; i < county_blk.ids.size(); ++i) {
      std::vector<std::string> row{county_blk.ids[i]};
      for (double v : county_blk.values.row(i)) row.push_back(format_double(v));
      t.rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < postal_blk.ids.size(); ++i) {
      std::vector<std::string> row{postal_blk.ids[i]};
      for (double v : postal_blk.values.row(i)) row.push_back(format_double(v));
      t.rows.push_back(std::move(row));
    }
    const std::string name = "features_" + source + ".csv";
    write_csv(dir / name, t);
    written.push_back(name);
  }

  CsvTable labels;
  labels.header = {"region_id", "task", "value"};
  for (const auto& [task, table] : world.labels)
    for (const auto& [id, value] : table)
      labels.rows.push_back({id, task, format_double(value)});
  write_csv(dir / "labels.csv", labels);
  written.push_back("labels.csv");

  for (const auto& panel : world.series) {
    CsvTable t;
    t.header.push_back("region_id");
    for (std::size_t s = 0; s < panel.values.cols(); ++s)
      t.header.push_back("t" + std::to_string(s));
    for (std::size_t i = 0; i < panel.ids.size(); ++i) {
      std::vector<std::string> row{panel.ids[i]};
      for (double v : panel.values.row(i)) row.push_back(format_double(v));
      t.rows.push_back(std::move(row));
    }
    const std::string name = "series_" + panel.task + ".csv";
    write_csv(dir / name, t);
    written.push_back(name);
  }
  return written;
}

WorldBundle read_world(const SynthConfig& cfg, const std::filesystem::path& dir) {
  WorldBundle world;
  world.label_specs = cfg.label_specs;

  auto regions = read_csv(dir / "regions.csv");
  std::map<std::string, graph::RegionKind> kind_of;
  for (const auto& row : regions.rows) {
    graph::Region r;
    r.id = row[0];
    r.kind = graph::region_kind_from_string(row[1]);
    r.centroid = {parse_double(row[2]), parse_double(row[3])};
    r.state_id = row[4];
    r.county_id = row[5];
    r.overlap_weight = parse_double(row[6]);
    kind_of[r.id] = r.kind;
    if (r.kind == graph::RegionKind::postal) {
      world.membership[r.id] = r.county_id;
      world.postal_ids.push_back(r.id);
    }
    world.regions.push_back(std::move(r));
  }

  for (const auto& [source, dim] : cfg.block_dims) {
    auto t = read_csv(dir / ("features_" + source + ".csv"));
    if (static_cast<int>(t.header.size()) != dim + 1)
      throw SchemaError("features_" + source + ".csv: expected " + std::to_string(dim) +
                        " feature columns");
    features::FeatureBlock postal_blk, county_blk;
    postal_blk.source = county_blk.source = source;
    postal_blk.columns.assign(t.header.begin() + 1, t.header.end());
    county_blk.columns = postal_blk.columns;
    std::vector<std::size_t> postal_rows, county_rows;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      auto it = kind_of.find(t.rows[i][0]);
      if (it == kind_of.end())
        throw JoinError("features_" + source + ".csv row '" + t.rows[i][0] +
                        "' is not in regions.csv");
      (it->second == graph::RegionKind::postal ? postal_rows : county_rows).push_back(i);
    }
    auto fill = [&](features::FeatureBlock& blk, const std::vector<std::size_t>& rows) {
      blk.values = Matrix(rows.size(), blk.columns.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        blk.ids.push_back(t.rows[rows[r]][0]);
        for (std::size_t j = 0; j < blk.columns.size(); ++j)
          blk.values.at(r, j) = parse_double(t.rows[rows[r]][j + 1]);
      }
    };
    fill(postal_blk, postal_rows);
    fill(county_blk, county_rows);
    world.postal_blocks[source] = std::move(postal_blk);
    world.county_blocks[source] = std::move(county_blk);
  }

  auto labels = read_csv(dir / "labels.csv");
  for (const auto& row : labels.rows)
    world.labels[row[1]][row[0]] = parse_double(row[2]);

  for (const auto& spec : cfg.series_specs) {
    auto t = read_csv(dir / ("series_" + spec.task + ".csv"));
    SeriesPanel panel;
    panel.task = spec.task;
    panel.frequency = spec.frequency;
    panel.period = spec.period;
    panel.level = spec.level;
    panel.values = Matrix(t.rows.size(), t.header.size() - 1);
    panel.valid.assign(t.rows.size(), 1);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      panel.ids.push_back(t.rows[i][0]);
      for (std::size_t j = 1; j < t.header.size(); ++j)
        panel.values.at(i, j - 1) = parse_double(t.rows[i][j]);
    }
    world.series.push_back(std::move(panel));
  }
  return world;
}

}  // namespace pdfm::synth
