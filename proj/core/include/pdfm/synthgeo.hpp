#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pdfm/features.hpp"
#include "pdfm/graph.hpp"
#include "pdfm/matrix.hpp"
#include "pdfm/series.hpp"

namespace pdfm::synth {

/// Monotone transforms applied to a latent factor to produce a label:
///   linear       h(z) = z
///   mild_cubic   h(z) = z + 0.03 z^3
///   scaled_tanh  h(z) = 5 tanh(z / 5)
enum class LabelTransform { linear, mild_cubic, scaled_tanh };

std::string to_string(LabelTransform t);
LabelTransform label_transform_from_string(const std::string& s);

struct LabelSpec {
  std::string task;
  LabelTransform transform = LabelTransform::linear;
  int factor = 0;             // latent factor index
  double noise_std = 0.0;
  bool rough = false;         // spatial-roughness flag (metadata for benchmarks)
  double neighbor_mix = 0.0;  // weight of the 8-nearest-neighbor mean component
};

struct SeriesSpec {
  std::string task;
  std::string level = "county";  // postal | county
  std::string frequency = "monthly";
  int period = 12;
  int n_steps = 48;
  double ar_coefficient = 0.6;
  double slope_min = -0.02;
  double slope_max = 0.02;
  double region_bias_scale = 1.0;
  double noise_std = 0.1;
  double level_offset = 10.0;    // keeps series away from zero for MAPE
  int bias_onset_step = 0;       // bias applies for t >= onset
};

struct SynthConfig {
  std::uint64_t rng_seed = 7;
  int n_states = 5;
  int n_counties = 50;
  int n_postal = 500;
  int latent_dim = 6;
  // Per-factor spatial length-scale in miles; <= 0 marks a white-noise factor.
  std::vector<double> spatial_smoothness = {150.0, 200.0, 250.0, 0.0, 0.0, 0.0};
  std::map<std::string, int> block_dims = {
      {"trends", 64}, {"maps", 64}, {"busyness", 32}, {"weather_aq", 45}};
  std::map<std::string, double> feature_noise_std = {
      {"trends", 0.05}, {"maps", 0.05}, {"busyness", 0.05}, {"weather_aq", 0.05}};
  std::vector<LabelSpec> label_specs;
  std::vector<SeriesSpec> series_specs;

  void validate() const;  // throws ConfigError naming the field
};

struct WorldBundle {
  std::vector<graph::Region> regions;                      // counties then postals
  std::map<std::string, std::string> membership;           // postal id -> county id
  std::map<std::string, features::FeatureBlock> postal_blocks;  // raw, per source
  std::map<std::string, features::FeatureBlock> county_blocks;  // unweighted means
  std::map<std::string, std::map<std::string, double>> labels;  // task -> region id -> value
  std::vector<LabelSpec> label_specs;
  std::vector<SeriesPanel> series;
  // True latent factors at postal nodes (test oracle; not exported).
  std::vector<std::string> postal_ids;
  Matrix latents;  // n_postal x latent_dim
};

/// Deterministic synthetic world. Latents are Gaussian-bump fields (smooth
/// factors) or white noise (rough factors), standardized over postal nodes;
/// each feature block is a fixed random linear map of the latents plus block
/// noise; labels are monotone transforms of single factors; series follow
/// level + region bias + linear trend + AR(1).
WorldBundle generate_world(const SynthConfig& cfg);

/// Writes regions.csv, features_<source>.csv (postal + county rows),
/// labels.csv and series_<task>.csv; returns the file names written.
std::vector<std::string> write_world(const WorldBundle& world,
                                     const std::filesystem::path& dir);

WorldBundle read_world(const SynthConfig& cfg, const std::filesystem::path& dir);

}  // namespace pdfm::synth
