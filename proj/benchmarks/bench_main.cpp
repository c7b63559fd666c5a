#include <benchmark/benchmark.h>

#include "pdfm/downstream.hpp"
#include "pdfm/graph.hpp"
#include "pdfm/idw.hpp"
#include "pdfm/model.hpp"
#include "pdfm/nn.hpp"
#include "pdfm/rng.hpp"
#include "pdfm/sampling.hpp"
#include "pdfm/synthgeo.hpp"

namespace {

using namespace pdfm;

synth::SynthConfig bench_world_config() {
  synth::SynthConfig cfg;
  cfg.rng_seed = 7;
  cfg.n_states = 5;
  cfg.n_counties = 50;
  cfg.n_postal = 500;
  cfg.latent_dim = 6;
  cfg.spatial_smoothness = {150.0, 200.0, 250.0, 0.0, 0.0, 0.0};
  return cfg;
}

struct BenchGraph {
  graph::RegionGraph g;

  BenchGraph() {
    auto world = synth::generate_world(bench_world_config());
    std::map<std::string, features::FeatureBlock> blocks;
    for (const auto& [source, postal] : world.postal_blocks) {
      features::FeatureBlock all;
      const auto& county = world.county_blocks.at(source);
      all.source = source;
      all.columns = postal.columns;
      all.ids = county.ids;
      all.ids.insert(all.ids.end(), postal.ids.begin(), postal.ids.end());
      all.values = Matrix(all.ids.size(), postal.values.cols());
      for (std::size_t i = 0; i < county.ids.size(); ++i)
        std::copy(county.values.row(i).begin(), county.values.row(i).end(),
                  all.values.row(i).begin());
      for (std::size_t i = 0; i < postal.ids.size(); ++i)
        std::copy(postal.values.row(i).begin(), postal.values.row(i).end(),
                  all.values.row(county.ids.size() + i).begin());
      auto stats = features::fit_standardizer(all);
      blocks[source] = features::apply_standardizer(all, stats);
    }
    graph::GraphConfig gcfg;
    auto [pp, pc] = graph::build_proximity_edges(world.regions, gcfg);
    auto cont = graph::build_containment_edges(world.regions);
    auto sim = graph::build_similarity_edges(world.regions, blocks.at("trends"),
                                             gcfg.similarity_k);
    g = graph::assemble_graph(world.regions, {pp, pc, cont, sim}, blocks);
  }
};

const BenchGraph& shared_graph() {
  static BenchGraph instance;
  return instance;
}

void BM_GenerateWorld(benchmark::State& state) {
  auto cfg = bench_world_config();
  for (auto _ : state) {
    auto world = synth::generate_world(cfg);
    benchmark::DoNotOptimize(world.latents.data());
  }
}
BENCHMARK(BM_GenerateWorld)->Unit(benchmark::kMillisecond);

void BM_SampleSubgraph(benchmark::State& state) {
  const auto& g = shared_graph().g;
  sampling::SamplerConfig cfg;
  cfg.rng_seed = 3;
  std::size_t i = 0;
  const auto seeds = sampling::enumerate_seeds(g);
  for (auto _ : state) {
    auto sub = sampling::sample_subgraph(g, seeds[i++ % seeds.size()], cfg);
    benchmark::DoNotOptimize(sub.nodes.data());
  }
}
BENCHMARK(BM_SampleSubgraph)->Unit(benchmark::kMicrosecond);

void BM_ForwardLoss(benchmark::State& state) {
  const auto& g = shared_graph().g;
  auto cfg = model::PdfmConfig::desk_preset(
      {{"trends", 64}, {"maps", 64}, {"busyness", 32}, {"weather_aq", 45}});
  cfg.rng_seed = 5;
  Rng rng(cfg.rng_seed);
  auto m = model::init_model(cfg, rng);
  sampling::SamplerConfig scfg;
  scfg.rng_seed = 3;
  auto sub = sampling::sample_subgraph(g, "P00000", scfg);
  auto ctx = model::make_seed_context(g, sub, cfg);
  for (auto _ : state) {
    model::PdfmGrads grads;
    benchmark::DoNotOptimize(model::forward_loss(m, ctx, &grads));
  }
}
BENCHMARK(BM_ForwardLoss)->Unit(benchmark::kMicrosecond);

void BM_IdwPredict(benchmark::State& state) {
  Rng rng(11);
  std::vector<LatLon> coords;
  std::vector<double> values;
  for (int i = 0; i < 400; ++i) {
    coords.push_back({rng.uniform(34, 50), rng.uniform(-104, -88)});
    values.push_back(rng.normal());
  }
  auto model = baselines::idw_fit(coords, values);
  for (auto _ : state) {
    const LatLon q{rng.uniform(34, 50), rng.uniform(-104, -88)};
    benchmark::DoNotOptimize(baselines::idw_predict_one(model, q));
  }
}
BENCHMARK(BM_IdwPredict)->Unit(benchmark::kMicrosecond);

void BM_GbdtFit(benchmark::State& state) {
  Rng rng(13);
  Matrix x(400, 48);
  std::vector<double> y(400);
  for (double& v : x.flat()) v = rng.normal();
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = x.at(i, 0) - 0.5 * x.at(i, 3) + 0.1 * rng.normal();
  downstream::RegressorSpec spec;
  spec.family = downstream::Family::gbdt;
  spec.gbdt_min_samples_leaf = 8;
  spec.gbdt_max_trees = static_cast<int>(state.range(0));
  spec.gbdt_patience = 0;
  for (auto _ : state) {
    auto model = downstream::gbdt_fit(x, y, Matrix(0, 48), {}, spec);
    benchmark::DoNotOptimize(model.trees.size());
  }
}
BENCHMARK(BM_GbdtFit)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
