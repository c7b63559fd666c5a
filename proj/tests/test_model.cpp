#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "pdfm/errors.hpp"
#include "pdfm/model.hpp"

using namespace pdfm;
using namespace pdfm::graph;
using namespace pdfm::model;

namespace {

Region make_region(const std::string& id, RegionKind kind, double lat, double lon) {
  Region r;
  r.id = id;
  r.kind = kind;
  r.centroid = {lat, lon};
  r.state_id = "S1";
  if (kind == RegionKind::postal) r.county_id = "C0";
  return r;
}

/// Five postal nodes and one county, fully wired, with seeded feature blocks
/// shaped for a tiny model (widths 3/2/2/2).
RegionGraph fixture_graph(std::uint64_t seed = 5) {
  std::vector<Region> nodes;
  nodes.push_back(make_region("C0", RegionKind::county, 0.05, 0.05));
  for (int i = 0; i < 5; ++i)
    nodes.push_back(make_region("P" + std::to_string(i), RegionKind::postal, 0, 0.01 * i));

  EdgeSet pp{EdgeSetName::prox_postal, {}};
  auto link = [&](int a, int b) {
    pp.edges.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), 0.7});
    pp.edges.push_back({static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(a), 0.7});
  };
  link(1, 2);
  link(1, 3);
  link(2, 4);
  link(3, 5);
  EdgeSet cont{EdgeSetName::containment, {}};
  for (int i = 1; i <= 5; ++i) {
    cont.edges.push_back({static_cast<std::uint32_t>(i), 0, 1.0});
    cont.edges.push_back({0, static_cast<std::uint32_t>(i), 1.0});
  }
  EdgeSet sim{EdgeSetName::similarity, {{1, 4, 0.9}, {4, 1, 0.9}}};

  Rng rng(seed);
  std::map<std::string, features::FeatureBlock> blocks;
  const std::map<std::string, int> widths{
      {"trends", 3}, {"maps", 2}, {"busyness", 2}, {"weather_aq", 2}};
  for (const auto& [source, w] : widths) {
    features::FeatureBlock b;
    b.source = source;
    for (const auto& n : nodes) b.ids.push_back(n.id);
    for (int j = 0; j < w; ++j) b.columns.push_back(source + std::to_string(j));
    b.values = Matrix(nodes.size(), w);
    for (double& v : b.values.flat()) v = rng.normal();
    blocks[source] = std::move(b);
  }
  return assemble_graph(nodes, {pp, cont, sim}, blocks);
}

PdfmConfig tiny_config() {
  PdfmConfig cfg;
  cfg.source_widths = {{"trends", 3}, {"maps", 2}, {"busyness", 2}, {"weather_aq", 2}};
  cfg.hidden_width = 4;
  cfg.embedding_width = 6;
  cfg.partitions = {
      {"trends", 0, 2, {"trends"}},
      {"maps_busyness", 2, 4, {"maps", "busyness"}},
      {"weather_aq", 4, 6, {"weather_aq"}},
  };
  cfg.rng_seed = 17;
  return cfg;
}

void collect_params(PdfmModel& m, std::vector<std::span<double>>& params,
                    PdfmGrads& g, std::vector<std::span<const double>>& grads) {
  auto push = [&](nn::DenseLayer& l, nn::DenseGrads& dg) {
    params.push_back(l.weight.flat());
    params.push_back(std::span<double>(l.bias));
    grads.push_back(dg.dweight.flat());
    grads.push_back(std::span<const double>(dg.dbias));
  };
  push(m.encoder, g.encoder);
  for (int s = 0; s < kEdgeSetCount; ++s) push(m.neighbor[s], g.neighbor[s]);
  push(m.self_transform, g.self_transform);
  push(m.embedding, g.embedding);
  for (std::size_t d = 0; d < m.decoders.size(); ++d) push(m.decoders[d], g.decoders[d]);
}

}  // namespace

TEST(Config, PartitionValidation) {
  auto cfg = tiny_config();
  cfg.validate();
  cfg.partitions[1].lo = 3;  // gap
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.partitions.back().hi = 5;  // does not cover [0, D)
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.message_passing_rounds = 2;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.partitions[0].sources = {};  // partition without a source
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, PaperPresetShape) {
  const auto cfg = PdfmConfig::paper_preset(
      {{"trends", 64}, {"maps", 64}, {"busyness", 32}, {"weather_aq", 45}});
  cfg.validate();
  EXPECT_EQ(cfg.embedding_width, 330);
  EXPECT_EQ(cfg.partitions[0].hi, 128u);
  EXPECT_EQ(cfg.partitions[1].hi, 256u);
  EXPECT_EQ(cfg.partitions[2].hi, 330u);
}

TEST(Init, DeterministicAndShaped) {
  const auto cfg = tiny_config();
  Rng r1(3), r2(3);
  auto m1 = init_model(cfg, r1);
  auto m2 = init_model(cfg, r2);
  EXPECT_EQ(m1.encoder.weight, m2.encoder.weight);
  EXPECT_EQ(m1.embedding.weight, m2.embedding.weight);
  EXPECT_EQ(m1.embedding.weight.rows(), 6u);
  EXPECT_EQ(m1.embedding.weight.cols(), 4u);
  ASSERT_EQ(m1.decoders.size(), 4u);  // trends, maps, busyness, weather_aq
  EXPECT_EQ(m1.decoders[0].weight.rows(), 3u);  // trends width
  EXPECT_EQ(m1.decoders[0].weight.cols(), 2u);  // trends slice width
}

TEST(Encode, MatchesDenseOracle) {
  const auto cfg = tiny_config();
  Rng rng(9);
  auto m = init_model(cfg, rng);
  Matrix x(3, cfg.input_width());
  for (double& v : x.flat()) v = rng.normal();
  const auto h = encode_inputs(m, x);
  for (std::size_t i = 0; i < 3; ++i)
    for (int j = 0; j < cfg.hidden_width; ++j) {
      double pre = m.encoder.bias[j];
      for (int k = 0; k < cfg.input_width(); ++k) pre += m.encoder.weight.at(j, k) * x.at(i, k);
      EXPECT_NEAR(h.at(i, j), nn::gelu(pre), 1e-12);
    }
}

TEST(Encode, DuplicateRowsGiveDuplicateStates) {
  const auto cfg = tiny_config();
  Rng rng(10);
  auto m = init_model(cfg, rng);
  Matrix x(2, cfg.input_width());
  for (int k = 0; k < cfg.input_width(); ++k) {
    x.at(0, k) = 0.1 * k;
    x.at(1, k) = 0.1 * k;
  }
  const auto h = encode_inputs(m, x);
  for (int j = 0; j < cfg.hidden_width; ++j) EXPECT_DOUBLE_EQ(h.at(0, j), h.at(1, j));
}

TEST(Sage, IsolatedSeedUsesSelfPathOnly) {
  const auto cfg = tiny_config();
  Rng rng(11);
  auto m = init_model(cfg, rng);
  SeedContext ctx;
  ctx.seed_node = 0;
  ctx.graph_nodes = {0};
  ctx.inputs = Matrix(1, cfg.input_width());
  for (double& v : ctx.inputs.flat()) v = rng.normal();
  const auto h0 = encode_inputs(m, ctx.inputs);
  const auto h1 = sage_forward(m, ctx, h0);
  for (int j = 0; j < cfg.hidden_width; ++j) {
    double expect = m.self_transform.bias[j];
    for (int k = 0; k < cfg.hidden_width; ++k)
      expect += m.self_transform.weight.at(j, k) * h0.at(0, k);
    EXPECT_NEAR(h1[j], expect, 1e-12);
  }
}

TEST(Sage, HandComputedTwoNeighborFixture) {
  // H = 2, hand-set weights; h1 = W_self h0(seed) + b_self
  //   + sum over neighbors of ReLU(W_e h0(u) + b_e).
  PdfmConfig cfg;
  cfg.source_widths = {{"trends", 2}};
  cfg.hidden_width = 2;
  cfg.embedding_width = 2;
  cfg.partitions = {{"trends", 0, 2, {"trends"}}};
  Rng rng(1);
  auto m = init_model(cfg, rng);
  // Encoder = identity-ish: weight I, bias 0, but activation is GeLU; feed
  // through explicit h0 instead by calling sage_forward directly.
  m.self_transform.weight.at(0, 0) = 1.0;
  m.self_transform.weight.at(0, 1) = 2.0;
  m.self_transform.weight.at(1, 0) = 0.0;
  m.self_transform.weight.at(1, 1) = -1.0;
  m.self_transform.bias = {0.5, 0.0};
  auto& nbr = m.neighbor[static_cast<int>(EdgeSetName::prox_postal)];
  nbr.weight.at(0, 0) = 1.0;
  nbr.weight.at(0, 1) = 0.0;
  nbr.weight.at(1, 0) = 0.0;
  nbr.weight.at(1, 1) = 1.0;
  nbr.bias = {0.0, 0.0};

  SeedContext ctx;
  ctx.seed_node = 0;
  ctx.graph_nodes = {0, 1, 2};
  ctx.neighbor_rows[static_cast<int>(EdgeSetName::prox_postal)] = {1, 2};
  ctx.inputs = Matrix(3, 2);  // unused by sage_forward

  Matrix h0(3, 2);
  h0.at(0, 0) = 1.0;  h0.at(0, 1) = -1.0;  // seed
  h0.at(1, 0) = 2.0;  h0.at(1, 1) = -3.0;  // neighbor u1
  h0.at(2, 0) = -1.0; h0.at(2, 1) = 4.0;   // neighbor u2
  const auto h1 = sage_forward(m, ctx, h0);
  // self: [1*1 + 2*(-1) + 0.5, 0*1 + (-1)(-1)] = [-0.5, 1]
  // ReLU(u1) = [2, 0]; ReLU(u2) = [0, 4]; pooled = [2, 4]
  EXPECT_NEAR(h1[0], -0.5 + 2.0, 1e-12);
  EXPECT_NEAR(h1[1], 1.0 + 4.0, 1e-12);
}

TEST(Sage, NeighborPermutationInvariant) {
  const auto g = fixture_graph();
  const auto cfg = tiny_config();
  Rng rng(12);
  auto m = init_model(cfg, rng);
  sampling::SamplerConfig scfg;
  scfg.rng_seed = 3;
  auto sub = sampling::sample_subgraph(g, "P1", scfg);
  auto ctx = make_seed_context(g, sub, cfg);
  const auto e1 = embed(m, ctx);

  // Reverse each edge set's neighbor list (rows stay aligned with inputs).
  auto ctx2 = ctx;
  for (auto& rows : ctx2.neighbor_rows) std::reverse(rows.begin(), rows.end());
  const auto e2 = embed(m, ctx2);
  for (std::size_t j = 0; j < e1.size(); ++j) EXPECT_NEAR(e1[j], e2[j], 1e-12);
}

TEST(Embed, ZeroHiddenGivesBias) {
  const auto cfg = tiny_config();
  Rng rng(13);
  auto m = init_model(cfg, rng);
  for (double& v : m.self_transform.weight.flat()) v = 0.0;
  m.self_transform.bias.assign(cfg.hidden_width, 0.0);
  for (auto& layer : m.neighbor) {
    for (double& v : layer.weight.flat()) v = 0.0;
    layer.bias.assign(cfg.hidden_width, 0.0);
  }
  for (double& v : m.embedding.bias) v = rng.normal();
  SeedContext ctx;
  ctx.seed_node = 0;
  ctx.graph_nodes = {0};
  ctx.inputs = Matrix(1, cfg.input_width(), 0.3);
  const auto e = embed(m, ctx);
  for (std::size_t j = 0; j < e.size(); ++j) EXPECT_DOUBLE_EQ(e[j], m.embedding.bias[j]);
}

TEST(Reconstruct, StructuralPartitionIsolation) {
  const auto cfg = tiny_config();
  Rng rng(14);
  auto m = init_model(cfg, rng);
  std::vector<double> e(cfg.embedding_width);
  for (double& v : e) v = rng.normal();
  const auto base = reconstruct(m, e);

  // Zeroing the trends partition changes only the trends reconstruction.
  auto e2 = e;
  e2[0] = e2[1] = 0.0;
  const auto out = reconstruct(m, e2);
  EXPECT_NE(out.at("trends"), base.at("trends"));
  EXPECT_EQ(out.at("maps"), base.at("maps"));
  EXPECT_EQ(out.at("busyness"), base.at("busyness"));
  EXPECT_EQ(out.at("weather_aq"), base.at("weather_aq"));

  // Perturbing any out-of-partition coordinate leaves a source untouched:
  // finite-difference sensitivity is exactly zero.
  for (std::size_t j = 2; j < 6; ++j) {
    auto ep = e;
    ep[j] += 1e-3;
    EXPECT_EQ(reconstruct(m, ep).at("trends"), base.at("trends"));
  }
}

TEST(Reconstruct, ZeroEmbeddingGivesDecoderBias) {
  const auto cfg = tiny_config();
  Rng rng(15);
  auto m = init_model(cfg, rng);
  for (auto& d : m.decoders)
    for (double& v : d.bias) v = rng.normal();
  std::vector<double> zero(cfg.embedding_width, 0.0);
  const auto out = reconstruct(m, zero);
  for (std::size_t d = 0; d < m.decoders.size(); ++d)
    EXPECT_EQ(out.at(m.decoder_sources[d]), m.decoders[d].bias);
}

TEST(FullModel, GradCheckOnFixture) {
  const auto g = fixture_graph();
  auto cfg = tiny_config();
  auto sub = [&] {
    sampling::SamplerConfig scfg;
    scfg.rng_seed = 4;
    return sampling::sample_subgraph(g, "P1", scfg);
  }();
  auto ctx = make_seed_context(g, sub, cfg);
  Rng rng(cfg.rng_seed);
  auto m = init_model(cfg, rng);

  PdfmGrads grads;
  forward_loss(m, ctx, &grads);
  std::vector<std::span<double>> params;
  std::vector<std::span<const double>> analytic;
  collect_params(m, params, grads, analytic);
  auto loss = [&] { return forward_loss(m, ctx, nullptr); };
  const auto result = nn::grad_check(loss, params, analytic, 1e-5);
  EXPECT_LT(result.max_rel_error, 1e-6);
}

TEST(FullModel, PartitionIsolationByFiniteDifference) {
  // dL_trends / d e_j == 0 exactly for j outside the trends partition,
  // measured through the decoder forward path.
  const auto cfg = tiny_config();
  Rng rng(16);
  auto m = init_model(cfg, rng);
  std::vector<double> e(cfg.embedding_width);
  for (double& v : e) v = rng.normal();
  const auto base = reconstruct(m, e).at("trends");
  for (int j = 0; j < cfg.embedding_width; ++j) {
    auto ep = e;
    ep[j] += 1e-4;
    const auto out = reconstruct(m, ep).at("trends");
    double diff = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) diff += std::abs(out[k] - base[k]);
    if (j < 2)
      EXPECT_GT(diff, 0.0) << j;
    else
      EXPECT_EQ(diff, 0.0) << j;
  }
}

TEST(Train, LrZeroKeepsInitWeights) {
  const auto g = fixture_graph();
  auto cfg = tiny_config();
  cfg.lr_max = 0.0;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  sampling::SamplerConfig scfg;
  scfg.rng_seed = 8;
  auto result = train_pdfm(g, cfg, scfg);
  Rng rng(Rng::derive(cfg.rng_seed, "init"));
  auto init = init_model(cfg, rng);
  EXPECT_EQ(result.model.encoder.weight, init.encoder.weight);
  EXPECT_EQ(result.model.embedding.weight, init.embedding.weight);
  EXPECT_EQ(result.history.size(), 2u);
}

TEST(Train, ZeroEpochsReturnsInit) {
  const auto g = fixture_graph();
  auto cfg = tiny_config();
  cfg.epochs = 0;
  sampling::SamplerConfig scfg;
  auto result = train_pdfm(g, cfg, scfg);
  EXPECT_TRUE(result.history.empty());
  Rng rng(Rng::derive(cfg.rng_seed, "init"));
  auto init = init_model(cfg, rng);
  EXPECT_EQ(result.model.encoder.weight, init.encoder.weight);
}

TEST(Train, SplitIsDisjointAndComplete) {
  const auto g = fixture_graph();
  auto cfg = tiny_config();
  cfg.epochs = 1;
  sampling::SamplerConfig scfg;
  auto result = train_pdfm(g, cfg, scfg);
  std::set<std::string> all(result.train_seeds.begin(), result.train_seeds.end());
  for (const auto& id : result.val_seeds) EXPECT_TRUE(all.insert(id).second);
  EXPECT_EQ(all.size(), g.nodes().size());
  EXPECT_EQ(result.val_seeds.size(), 1u);  // floor(0.2 * 6) = 1
}

TEST(Train, LossDecreasesOnFixture) {
  const auto g = fixture_graph();
  auto cfg = tiny_config();
  cfg.hidden_width = 8;
  cfg.lr_max = 5e-3;
  cfg.epochs = 30;
  cfg.batch_size = 5;
  sampling::SamplerConfig scfg;
  scfg.rng_seed = 2;
  auto result = train_pdfm(g, cfg, scfg);
  ASSERT_FALSE(result.history.empty());
  EXPECT_LT(result.history.back().train_loss, result.history.front().train_loss);
}

TEST(Export, DeterministicRowsPerNode) {
  const auto g = fixture_graph();
  auto cfg = tiny_config();
  cfg.epochs = 2;
  cfg.lr_max = 1e-3;
  sampling::SamplerConfig scfg;
  scfg.rng_seed = 5;
  auto result = train_pdfm(g, cfg, scfg);
  auto t1 = export_embeddings(result.model, g, scfg);
  auto t2 = export_embeddings(result.model, g, scfg);
  EXPECT_EQ(t1.ids.size(), g.nodes().size());
  EXPECT_EQ(t1.values, t2.values);
  EXPECT_EQ(t1.width(), static_cast<std::size_t>(cfg.embedding_width));

  // Training must move the exported table away from the init model's table.
  Rng rng(Rng::derive(cfg.rng_seed, "init"));
  auto init = init_model(cfg, rng);
  auto t0 = export_embeddings(init, g, scfg);
  double dist = 0.0;
  for (std::size_t i = 0; i < t1.values.size(); ++i) {
    const double d = t1.values.flat()[i] - t0.values.flat()[i];
    dist += d * d;
  }
  EXPECT_GT(std::sqrt(dist), 0.0);
}

TEST(Slice, WidthsAndRoundTrip) {
  EmbeddingTable table;
  table.ids = {"a", "b"};
  table.partitions = {
      {"trends", 0, 2, {"trends"}},
      {"maps_busyness", 2, 4, {"maps", "busyness"}},
      {"weather_aq", 4, 6, {"weather_aq"}},
  };
  table.values = Matrix(2, 6);
  for (std::size_t i = 0; i < table.values.size(); ++i)
    table.values.flat()[i] = static_cast<double>(i);

  auto trends = slice_modality(table, "trends");
  EXPECT_EQ(trends.width(), 2u);
  EXPECT_DOUBLE_EQ(trends.values.at(1, 0), 6.0);

  // Concatenating all slices in order reproduces the original table.
  Matrix rebuilt(2, 6);
  std::size_t offset = 0;
  for (const auto& p : table.partitions) {
    auto slice = slice_modality(table, p.group);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < slice.width(); ++j)
        rebuilt.at(i, offset + j) = slice.values.at(i, j);
    offset += slice.width();
  }
  EXPECT_EQ(rebuilt, table.values);
  EXPECT_THROW(slice_modality(table, "nope"), LookupError);
}

TEST(Slice, PaperPresetTrendsWidth) {
  EmbeddingTable table;
  table.ids = {"a"};
  table.partitions = {
      {"trends", 0, 128, {"trends"}},
      {"maps_busyness", 128, 256, {"maps", "busyness"}},
      {"weather_aq", 256, 330, {"weather_aq"}},
  };
  table.values = Matrix(1, 330);
  EXPECT_EQ(slice_modality(table, "trends").width(), 128u);  // dimensions 0-127
}

TEST(ConcatExternal, WidthsAddAndRowsAlign) {
  EmbeddingTable a;
  a.ids = {"x", "y"};
  a.partitions = {{"trends", 0, 2, {"trends"}}};
  a.values = Matrix(2, 2);
  a.values.at(0, 0) = 1;
  a.values.at(1, 1) = 2;
  EmbeddingTable ext;
  ext.ids = {"y", "x"};  // different order is fine; ids join
  ext.values = Matrix(2, 1);
  ext.values.at(0, 0) = 9;   // y
  ext.values.at(1, 0) = 8;   // x
  auto out = concat_external(a, ext);
  EXPECT_EQ(out.width(), 3u);
  EXPECT_DOUBLE_EQ(out.values.at(0, 2), 8.0);  // row x
  EXPECT_DOUBLE_EQ(out.values.at(1, 2), 9.0);  // row y

  EmbeddingTable zero;
  zero.ids = a.ids;
  zero.values = Matrix(2, 0);
  EXPECT_EQ(concat_external(a, zero).values, a.values);

  EmbeddingTable missing;
  missing.ids = {"x"};
  missing.values = Matrix(1, 1);
  EXPECT_THROW(concat_external(a, missing), JoinError);
}

TEST(Checkpoint, BitExactRoundTrip) {
  const auto cfg = tiny_config();
  Rng rng(19);
  auto m = init_model(cfg, rng);
  const auto path = std::filesystem::temp_directory_path() / "pdfm_ckpt.json";
  save_checkpoint(m, path);
  auto back = load_checkpoint(path);
  EXPECT_EQ(back.encoder.weight, m.encoder.weight);
  EXPECT_EQ(back.encoder.bias, m.encoder.bias);
  for (int s = 0; s < kEdgeSetCount; ++s)
    EXPECT_EQ(back.neighbor[s].weight, m.neighbor[s].weight);
  EXPECT_EQ(back.self_transform.weight, m.self_transform.weight);
  EXPECT_EQ(back.embedding.weight, m.embedding.weight);
  ASSERT_EQ(back.decoders.size(), m.decoders.size());
  for (std::size_t d = 0; d < m.decoders.size(); ++d)
    EXPECT_EQ(back.decoders[d].weight, m.decoders[d].weight);
  EXPECT_EQ(back.decoder_sources, m.decoder_sources);
  std::filesystem::remove(path);
}

TEST(EmbeddingCsv, RoundTrip) {
  EmbeddingTable t;
  t.ids = {"a", "b"};
  t.values = Matrix(2, 3);
  double v = 0.1;
  for (double& e : t.values.flat()) e = (v *= -1.7);
  const auto path = std::filesystem::temp_directory_path() / "pdfm_emb.csv";
  write_embeddings_csv(t, path);
  auto back = read_embeddings_csv(path);
  EXPECT_EQ(back.ids, t.ids);
  EXPECT_EQ(back.values, t.values);
  std::filesystem::remove(path);
}
