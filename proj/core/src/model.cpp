#include "pdfm/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"

namespace pdfm::model {

using nlohmann::json;

std::vector<std::string> PdfmConfig::ordered_sources() const {
  std::vector<std::string> out;
  for (const auto& p : partitions)
    for (const auto& s : p.sources) out.push_back(s);
  return out;
}

int PdfmConfig::input_width() const {
  int w = 0;
  for (const auto& [source, width] : source_widths) w += width;
  return w;
}

void PdfmConfig::validate() const {
  if (hidden_width < 1) throw ConfigError("pdfm.hidden_width must be >= 1");
  if (embedding_width < 1) throw ConfigError("pdfm.embedding_width must be >= 1");
  if (message_passing_rounds != 1)
    throw ConfigError("pdfm.message_passing_rounds is fixed at 1");
  if (huber_delta <= 0.0) throw ConfigError("pdfm.huber_delta must be positive");
  if (lr_max < 0.0) throw ConfigError("pdfm.lr_max must be >= 0");
  if (epochs < 0) throw ConfigError("pdfm.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("pdfm.batch_size must be >= 1");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0)
    throw ConfigError("pdfm.validation_fraction must be in [0, 1)");
  if (partitions.empty()) throw ConfigError("pdfm.partitions must not be empty");
  std::size_t cursor = 0;
  std::set<std::string> seen_sources;
  for (const auto& p : partitions) {
    if (p.lo != cursor)
      throw ConfigError("pdfm.partitions must be ordered, disjoint and gap-free; group '" +
                        p.group + "' starts at " + std::to_string(p.lo) + ", expected " +
                        std::to_string(cursor));
    if (p.hi <= p.lo) throw ConfigError("pdfm.partitions." + p.group + " is empty");
    cursor = p.hi;
    if (p.sources.empty())
      throw ConfigError("pdfm.partitions." + p.group + " decodes no source");
    for (const auto& s : p.sources) {
      if (!source_widths.count(s))
        throw ConfigError("pdfm.partitions." + p.group + " references unknown source '" + s + "'");
      if (!seen_sources.insert(s).second)
        throw ConfigError("source '" + s + "' appears in two partitions");
    }
  }
  if (cursor != static_cast<std::size_t>(embedding_width))
    throw ConfigError("pdfm.partitions must exactly cover [0, " +
                      std::to_string(embedding_width) + "), got [0, " +
                      std::to_string(cursor) + ")");
  for (const auto& [s, w] : source_widths) {
    if (w < 1) throw ConfigError("pdfm.source_widths." + s + " must be >= 1");
    if (!seen_sources.count(s))
      throw ConfigError("source '" + s + "' is not assigned to any partition");
  }
}

PdfmConfig PdfmConfig::paper_preset(std::map<std::string, int> source_widths) {
  PdfmConfig cfg;
  cfg.source_widths = std::move(source_widths);
  cfg.hidden_width = 256;
  cfg.embedding_width = 330;
  cfg.partitions = {
      {"trends", 0, 128, {"trends"}},
      {"maps_busyness", 128, 256, {"maps", "busyness"}},
      {"weather_aq", 256, 330, {"weather_aq"}},
  };
  return cfg;
}

PdfmConfig PdfmConfig::desk_preset(std::map<std::string, int> source_widths) {
  PdfmConfig cfg;
  cfg.source_widths = std::move(source_widths);
  cfg.hidden_width = 128;
  cfg.embedding_width = 48;
  cfg.partitions = {
      {"trends", 0, 16, {"trends"}},
      {"maps_busyness", 16, 32, {"maps", "busyness"}},
      {"weather_aq", 32, 48, {"weather_aq"}},
  };
  return cfg;
}

const nn::DenseLayer& PdfmModel::neighbor_layer(graph::EdgeSetName set) const {
  return neighbor[cfg.share_edge_set_weights ? 0 : static_cast<int>(set)];
}

nn::DenseLayer& PdfmModel::neighbor_layer(graph::EdgeSetName set) {
  return neighbor[cfg.share_edge_set_weights ? 0 : static_cast<int>(set)];
}

const Partition& PdfmModel::partition_of(const std::string& source) const {
  for (const auto& p : cfg.partitions)
    for (const auto& s : p.sources)
      if (s == source) return p;
  throw LookupError("source '" + source + "' is not in the partition map");
}

PdfmModel init_model(const PdfmConfig& cfg, Rng& rng) {
  cfg.validate();
  PdfmModel m;
  m.cfg = cfg;
  const int F = cfg.input_width();
  const int H = cfg.hidden_width;
  m.encoder = nn::make_dense(H, F, nn::Activation::gelu, rng);
  for (int s = 0; s < graph::kEdgeSetCount; ++s)
    m.neighbor[s] = nn::make_dense(H, H, nn::Activation::relu, rng);
  m.self_transform = nn::make_dense(H, H, nn::Activation::identity, rng);
  m.embedding = nn::make_dense(cfg.embedding_width, H, nn::Activation::identity, rng);
  for (const auto& p : cfg.partitions) {
    for (const auto& source : p.sources) {
      m.decoders.push_back(nn::make_dense(cfg.source_widths.at(source), p.hi - p.lo,
                                          nn::Activation::identity, rng));
      m.decoder_sources.push_back(source);
    }
  }
  return m;
}

Matrix encode_inputs(const PdfmModel& model, const Matrix& rows) {
  return nn::dense_forward(model.encoder, rows);
}

namespace {

std::vector<double> pool_and_self(const PdfmModel& model, const SeedContext& ctx,
                                  const Matrix& h0) {
  const int H = model.cfg.hidden_width;
  Matrix seed_row(1, H);
  std::copy(h0.row(0).begin(), h0.row(0).end(), seed_row.row(0).begin());
  Matrix h1m = nn::dense_forward(model.self_transform, seed_row);
  std::vector<double> h1(h1m.row(0).begin(), h1m.row(0).end());
  for (auto set : graph::kAllEdgeSets) {
    const auto& rows = ctx.neighbor_rows[static_cast<int>(set)];
    if (rows.empty()) continue;
    Matrix nbr(rows.size(), H);
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy(h0.row(rows[i]).begin(), h0.row(rows[i]).end(), nbr.row(i).begin());
    Matrix transformed = nn::dense_forward(model.neighbor_layer(set), nbr);
    const double scale =
        model.cfg.mean_pooling ? 1.0 / static_cast<double>(rows.size()) : 1.0;
    for (std::size_t i = 0; i < transformed.rows(); ++i)
      for (int j = 0; j < H; ++j) h1[j] += scale * transformed.at(i, j);
  }
  return h1;
}

}  // namespace

std::vector<double> sage_forward(const PdfmModel& model, const SeedContext& ctx,
                                 const Matrix& h0) {
  if (h0.rows() != ctx.graph_nodes.size())
    throw SchemaError("sage_forward: hidden state row count mismatch");
  return pool_and_self(model, ctx, h0);
}

std::vector<double> embed(const PdfmModel& model, const SeedContext& ctx) {
  const Matrix h0 = encode_inputs(model, ctx.inputs);
  const std::vector<double> h1 = sage_forward(model, ctx, h0);
  auto e = matvec(model.embedding.weight, h1);
  for (std::size_t j = 0; j < e.size(); ++j) e[j] += model.embedding.bias[j];
  return e;
}

std::map<std::string, std::vector<double>> reconstruct(const PdfmModel& model,
                                                       std::span<const double> e) {
  if (e.size() != static_cast<std::size_t>(model.cfg.embedding_width))
    throw SchemaError("reconstruct: embedding width mismatch");
  std::map<std::string, std::vector<double>> out;
  for (std::size_t d = 0; d < model.decoders.size(); ++d) {
    const auto& source = model.decoder_sources[d];
    const auto& part = model.partition_of(source);
    std::vector<double> slice(e.begin() + part.lo, e.begin() + part.hi);
    auto x = matvec(model.decoders[d].weight, slice);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += model.decoders[d].bias[j];
    out[source] = std::move(x);
  }
  return out;
}

SeedContext make_seed_context(const graph::RegionGraph& graph,
                              const sampling::Subgraph& subgraph,
                              const PdfmConfig& cfg) {
  SeedContext ctx;
  ctx.seed_node = subgraph.seed;
  ctx.graph_nodes.push_back(subgraph.seed);
  // Hop-1 expansion edges from the seed, grouped per edge set; one message
  // passing round reads nothing deeper.
  for (const auto& e : subgraph.edges) {
    if (e.src != subgraph.seed) continue;
    ctx.neighbor_rows[static_cast<int>(e.set)].push_back(ctx.graph_nodes.size());
    ctx.graph_nodes.push_back(e.dst);
  }
  const auto sources = cfg.ordered_sources();
  ctx.inputs = Matrix(ctx.graph_nodes.size(), cfg.input_width());
  for (std::size_t r = 0; r < ctx.graph_nodes.size(); ++r) {
    std::size_t offset = 0;
    for (const auto& source : sources) {
      const auto& blk = graph.block(source);
      const auto row = blk.values.row(ctx.graph_nodes[r]);
      if (row.size() != static_cast<std::size_t>(cfg.source_widths.at(source)))
        throw SchemaError("block '" + source + "' width does not match pdfm.source_widths");
      std::copy(row.begin(), row.end(), ctx.inputs.row(r).begin() + offset);
      offset += row.size();
    }
  }
  return ctx;
}

namespace {

PdfmGrads zero_grads(const PdfmModel& m) {
  PdfmGrads g;
  auto zero_like = [](const nn::DenseLayer& l) {
    nn::DenseGrads dg;
    dg.dweight = Matrix(l.weight.rows(), l.weight.cols());
    dg.dbias.assign(l.bias.size(), 0.0);
    return dg;
  };
  g.encoder = zero_like(m.encoder);
  for (int s = 0; s < graph::kEdgeSetCount; ++s) g.neighbor[s] = zero_like(m.neighbor[s]);
  g.self_transform = zero_like(m.self_transform);
  g.embedding = zero_like(m.embedding);
  for (const auto& d : m.decoders) g.decoders.push_back(zero_like(d));
  return g;
}

}  // namespace

double forward_loss(const PdfmModel& model, const SeedContext& ctx, PdfmGrads* grads) {
  if (grads) *grads = zero_grads(model);
  const int H = model.cfg.hidden_width;
  const int D = model.cfg.embedding_width;

  // Forward with caches.
  nn::DenseCache enc_cache;
  const Matrix h0 = nn::dense_forward(model.encoder, ctx.inputs, &enc_cache);

  Matrix seed_row(1, H);
  std::copy(h0.row(0).begin(), h0.row(0).end(), seed_row.row(0).begin());
  nn::DenseCache self_cache;
  Matrix self_out = nn::dense_forward(model.self_transform, seed_row, &self_cache);
  std::vector<double> h1(self_out.row(0).begin(), self_out.row(0).end());

  std::array<nn::DenseCache, graph::kEdgeSetCount> nbr_caches;
  std::array<Matrix, graph::kEdgeSetCount> nbr_out;
  for (auto set : graph::kAllEdgeSets) {
    const int si = static_cast<int>(set);
    const auto& rows = ctx.neighbor_rows[si];
    if (rows.empty()) continue;
    Matrix nbr(rows.size(), H);
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy(h0.row(rows[i]).begin(), h0.row(rows[i]).end(), nbr.row(i).begin());
    nbr_out[si] = nn::dense_forward(model.neighbor_layer(set), nbr, &nbr_caches[si]);
    const double scale =
        model.cfg.mean_pooling ? 1.0 / static_cast<double>(rows.size()) : 1.0;
    for (std::size_t i = 0; i < nbr_out[si].rows(); ++i)
      for (int j = 0; j < H; ++j) h1[j] += scale * nbr_out[si].at(i, j);
  }

  Matrix h1m(1, H);
  std::copy(h1.begin(), h1.end(), h1m.row(0).begin());
  nn::DenseCache emb_cache;
  Matrix em = nn::dense_forward(model.embedding, h1m, &emb_cache);

  // Per-source decode + Huber against the seed's own standardized features.
  // Decoder order matches the input concatenation order (both follow the
  // partition map), so `offset` walks the target row directly.
  double loss = 0.0;
  std::vector<double> demb(D, 0.0);
  std::vector<nn::DenseGrads> dec_grads(model.decoders.size());
  std::size_t offset = 0;
  for (std::size_t d = 0; d < model.decoders.size(); ++d) {
    const auto& source = model.decoder_sources[d];
    const auto& part = model.partition_of(source);
    const int width = model.cfg.source_widths.at(source);
    Matrix slice(1, part.hi - part.lo);
    for (std::size_t j = part.lo; j < part.hi; ++j) slice.at(0, j - part.lo) = em.at(0, j);
    nn::DenseCache dec_cache;
    Matrix xhat = nn::dense_forward(model.decoders[d], slice, &dec_cache);
    const auto target = ctx.inputs.row(0).subspan(offset, width);
    auto hub = nn::huber_loss(xhat.row(0), target, model.cfg.huber_delta);
    loss += hub.loss;
    if (grads) {
      Matrix dxhat(1, width);
      std::copy(hub.grad.begin(), hub.grad.end(), dxhat.row(0).begin());
      Matrix dslice;
      dec_grads[d] = nn::dense_backward(model.decoders[d], dec_cache, dxhat, &dslice);
      for (std::size_t j = part.lo; j < part.hi; ++j) demb[j] += dslice.at(0, j - part.lo);
    }
    offset += width;
  }
  if (!grads) return loss;

  // Backward through embedding, self, neighbor transforms and encoder.
  Matrix demb_m(1, D);
  std::copy(demb.begin(), demb.end(), demb_m.row(0).begin());
  Matrix dh1;
  grads->embedding = nn::dense_backward(model.embedding, emb_cache, demb_m, &dh1);

  Matrix dh0(h0.rows(), H);  // zero-initialized
  {
    Matrix dseed;
    grads->self_transform =
        nn::dense_backward(model.self_transform, self_cache, dh1, &dseed);
    for (int j = 0; j < H; ++j) dh0.at(0, j) += dseed.at(0, j);
  }
  for (auto set : graph::kAllEdgeSets) {
    const int si = static_cast<int>(set);
    const auto& rows = ctx.neighbor_rows[si];
    if (rows.empty()) continue;
    const double scale =
        model.cfg.mean_pooling ? 1.0 / static_cast<double>(rows.size()) : 1.0;
    Matrix dpool(rows.size(), H);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < H; ++j) dpool.at(i, j) = scale * dh1.at(0, j);
    Matrix dnbr;
    auto layer_grads = nn::dense_backward(model.neighbor_layer(set), nbr_caches[si],
                                          dpool, &dnbr);
    const int target = model.cfg.share_edge_set_weights ? 0 : si;
    add_scaled(grads->neighbor[target].dweight, layer_grads.dweight);
    for (std::size_t j = 0; j < layer_grads.dbias.size(); ++j)
      grads->neighbor[target].dbias[j] += layer_grads.dbias[j];
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < H; ++j) dh0.at(rows[i], j) += dnbr.at(i, j);
  }
  grads->encoder = nn::dense_backward(model.encoder, enc_cache, dh0, nullptr);
  grads->decoders = std::move(dec_grads);
  return loss;
}

namespace {

struct ParamSlot {
  std::span<double> values;
  const std::span<const double> grads;
};

// Fixed parameter ordering shared by the optimizer loop.
template <typename ModelT, typename GradsT, typename Fn>
void for_each_tensor(ModelT& m, GradsT& g, Fn&& fn) {
  fn(m.encoder.weight.flat(), g.encoder.dweight.flat(), "encoder.w");
  fn(std::span<double>(m.encoder.bias), std::span<const double>(g.encoder.dbias), "encoder.b");
  const int nsets = m.cfg.share_edge_set_weights ? 1 : graph::kEdgeSetCount;
  for (int s = 0; s < nsets; ++s) {
    fn(m.neighbor[s].weight.flat(), g.neighbor[s].dweight.flat(), "neighbor.w");
    fn(std::span<double>(m.neighbor[s].bias), std::span<const double>(g.neighbor[s].dbias),
       "neighbor.b");
  }
  fn(m.self_transform.weight.flat(), g.self_transform.dweight.flat(), "self.w");
  fn(std::span<double>(m.self_transform.bias), std::span<const double>(g.self_transform.dbias),
     "self.b");
  fn(m.embedding.weight.flat(), g.embedding.dweight.flat(), "embedding.w");
  fn(std::span<double>(m.embedding.bias), std::span<const double>(g.embedding.dbias),
     "embedding.b");
  for (std::size_t d = 0; d < m.decoders.size(); ++d) {
    fn(m.decoders[d].weight.flat(), g.decoders[d].dweight.flat(), "decoder.w");
    fn(std::span<double>(m.decoders[d].bias), std::span<const double>(g.decoders[d].dbias),
       "decoder.b");
  }
}

void accumulate(PdfmGrads& into, const PdfmGrads& from) {
  auto add = [](nn::DenseGrads& a, const nn::DenseGrads& b) {
    if (b.dweight.empty()) return;
    if (a.dweight.empty()) {
      a = b;
      return;
    }
    add_scaled(a.dweight, b.dweight);
    for (std::size_t i = 0; i < b.dbias.size(); ++i) a.dbias[i] += b.dbias[i];
  };
  add(into.encoder, from.encoder);
  for (int s = 0; s < graph::kEdgeSetCount; ++s) add(into.neighbor[s], from.neighbor[s]);
  add(into.self_transform, from.self_transform);
  add(into.embedding, from.embedding);
  for (std::size_t d = 0; d < from.decoders.size(); ++d) add(into.decoders[d], from.decoders[d]);
}

void scale_grads(PdfmGrads& g, double s) {
  auto scale = [s](nn::DenseGrads& dg) {
    for (double& v : dg.dweight.flat()) v *= s;
    for (double& v : dg.dbias) v *= s;
  };
  scale(g.encoder);
  for (auto& n : g.neighbor) scale(n);
  scale(g.self_transform);
  scale(g.embedding);
  for (auto& d : g.decoders) scale(d);
}

}  // namespace

TrainResult train_pdfm(const graph::RegionGraph& graph, const PdfmConfig& cfg,
                       const sampling::SamplerConfig& sampler_cfg) {
  cfg.validate();
  sampler_cfg.validate();
  for (const auto& [source, width] : cfg.source_widths) graph.block(source);  // presence check

  Rng init_rng(Rng::derive(cfg.rng_seed, "init"));
  TrainResult result;
  result.model = init_model(cfg, init_rng);

  // Uniform seeded 80/20 split over all seeds.
  auto seeds = sampling::enumerate_seeds(graph);
  {
    Rng split_rng(Rng::derive(cfg.rng_seed, "split"));
    shuffle(seeds, split_rng);
  }
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(cfg.validation_fraction * static_cast<double>(seeds.size())));
  if (cfg.validation_fraction > 0.0 && n_val == 0 && seeds.size() > 1) n_val = 1;
  result.val_seeds.assign(seeds.begin(), seeds.begin() + n_val);
  result.train_seeds.assign(seeds.begin() + n_val, seeds.end());
  std::sort(result.val_seeds.begin(), result.val_seeds.end());
  std::sort(result.train_seeds.begin(), result.train_seeds.end());

  // Subgraphs are sampled once per seed; the sampler stream makes them
  // independent of traversal order.
  std::map<std::string, SeedContext> contexts;
  for (const auto& id : seeds) {
    auto sub = sampling::sample_subgraph(graph, id, sampler_cfg);
    contexts.emplace(id, make_seed_context(graph, sub, cfg));
  }

  if (cfg.epochs == 0 || result.train_seeds.empty()) return result;

  const long batches_per_epoch =
      (static_cast<long>(result.train_seeds.size()) + cfg.batch_size - 1) / cfg.batch_size;
  nn::CosineSchedule schedule{cfg.lr_max, 0.0, cfg.epochs * batches_per_epoch};

  std::map<std::string, nn::AdamState> adam;
  long global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = result.train_seeds;
    Rng epoch_rng(Rng::derive(cfg.rng_seed, "epoch:" + std::to_string(epoch)));
    shuffle(order, epoch_rng);

    double epoch_loss = 0.0;
    double last_lr = 0.0;
    for (long b = 0; b < batches_per_epoch; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi =
          std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      PdfmGrads batch_grads = zero_grads(result.model);
      double batch_loss = 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        PdfmGrads g;
        batch_loss += forward_loss(result.model, contexts.at(order[i]), &g);
        accumulate(batch_grads, g);
      }
      const double inv = 1.0 / static_cast<double>(hi - lo);
      batch_loss *= inv;
      scale_grads(batch_grads, inv);
      if (!std::isfinite(batch_loss))
        throw TrainingError("pdfm training diverged (non-finite loss) at step " +
                            std::to_string(global_step));
      const double lr = nn::cosine_lr(global_step, schedule);
      last_lr = lr;
      int slot = 0;
      for_each_tensor(result.model, batch_grads,
                      [&](std::span<double> p, std::span<const double> g, const char* tag) {
                        nn::adam_step(p, g, adam[std::string(tag) + std::to_string(slot++)], lr);
                      });
      epoch_loss += batch_loss;
      ++global_step;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(batches_per_epoch);
    stats.lr = last_lr;
    double val_loss = 0.0;
    for (const auto& id : result.val_seeds)
      val_loss += forward_loss(result.model, contexts.at(id), nullptr);
    stats.val_loss =
        result.val_seeds.empty() ? 0.0 : val_loss / static_cast<double>(result.val_seeds.size());
    result.history.push_back(stats);
  }
  return result;
}

std::vector<double> EmbeddingTable::row_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return {values.row(i).begin(), values.row(i).end()};
  throw LookupError("embedding table has no row for id: " + id);
}

EmbeddingTable export_embeddings(const PdfmModel& model, const graph::RegionGraph& graph,
                                 const sampling::SamplerConfig& sampler_cfg) {
  EmbeddingTable table;
  table.partitions = model.cfg.partitions;
  const auto seeds = sampling::enumerate_seeds(graph);
  table.values = Matrix(seeds.size(), model.cfg.embedding_width);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    table.ids.push_back(seeds[i]);
    auto sub = sampling::sample_subgraph(graph, seeds[i], sampler_cfg);
    auto ctx = make_seed_context(graph, sub, model.cfg);
    const Matrix h0 = encode_inputs(model, ctx.inputs);
    const auto h1 = sage_forward(model, ctx, h0);
    auto e = matvec(model.embedding.weight, h1);
    for (std::size_t j = 0; j < e.size(); ++j)
      table.values.at(i, j) = e[j] + model.embedding.bias[j];
  }
  return table;
}

EmbeddingTable slice_modality(const EmbeddingTable& table, const std::string& group) {
  for (const auto& p : table.partitions) {
    if (p.group != group) continue;
    EmbeddingTable out;
    out.ids = table.ids;
    out.fingerprint = table.fingerprint.empty() ? "" : table.fingerprint + ":" + group;
    out.partitions = {{p.group, 0, p.hi - p.lo, p.sources}};
    out.values = Matrix(table.ids.size(), p.hi - p.lo);
    for (std::size_t i = 0; i < table.ids.size(); ++i)
      for (std::size_t j = p.lo; j < p.hi; ++j)
        out.values.at(i, j - p.lo) = table.values.at(i, j);
    return out;
  }
  throw LookupError("unknown modality group: " + group);
}

EmbeddingTable concat_external(const EmbeddingTable& table, const EmbeddingTable& external) {
  std::map<std::string, std::size_t> ext_row;
  for (std::size_t i = 0; i < external.ids.size(); ++i) ext_row[external.ids[i]] = i;
  std::vector<std::string> missing;
  for (const auto& id : table.ids)
    if (!ext_row.count(id)) missing.push_back(id);
  if (!missing.empty() || external.ids.size() != table.ids.size()) {
    std::string msg = "concat_external: id sets differ";
    if (!missing.empty()) {
      msg += "; missing from external:";
      for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 8); ++i)
        msg += " " + missing[i];
      if (missing.size() > 8) msg += " ...";
    }
    throw JoinError(msg);
  }
  EmbeddingTable out;
  out.ids = table.ids;
  out.fingerprint = table.fingerprint;
  out.partitions = table.partitions;
  const std::size_t d = table.values.cols();
  const std::size_t ew = external.values.cols();
  if (ew > 0)
    out.partitions.push_back({"external", d, d + ew, {"external"}});
  out.values = Matrix(table.ids.size(), d + ew);
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out.values.at(i, j) = table.values.at(i, j);
    const auto er = external.values.row(ext_row.at(table.ids[i]));
    for (std::size_t j = 0; j < ew; ++j) out.values.at(i, d + j) = er[j];
  }
  return out;
}

namespace {

json layer_to_json(const nn::DenseLayer& l) {
  json j;
  j["out"] = l.weight.rows();
  j["in"] = l.weight.cols();
  j["act"] = nn::to_string(l.act);
  j["w"] = std::vector<double>(l.weight.flat().begin(), l.weight.flat().end());
  j["b"] = l.bias;
  return j;
}

nn::DenseLayer layer_from_json(const json& j) {
  nn::DenseLayer l;
  const std::size_t out = j.at("out").get<std::size_t>();
  const std::size_t in = j.at("in").get<std::size_t>();
  l.act = nn::activation_from_string(j.at("act").get<std::string>());
  auto w = j.at("w").get<std::vector<double>>();
  if (w.size() != out * in) throw SchemaError("checkpoint weight size mismatch");
  l.weight = Matrix(out, in);
  std::copy(w.begin(), w.end(), l.weight.flat().begin());
  l.bias = j.at("b").get<std::vector<double>>();
  if (l.bias.size() != out) throw SchemaError("checkpoint bias size mismatch");
  return l;
}

}  // namespace

void save_checkpoint(const PdfmModel& model, const std::filesystem::path& path) {
  json j;
  j["format_version"] = 1;
  json cfg;
  cfg["source_widths"] = model.cfg.source_widths;
  cfg["hidden_width"] = model.cfg.hidden_width;
  cfg["embedding_width"] = model.cfg.embedding_width;
  json parts = json::array();
  for (const auto& p : model.cfg.partitions)
    parts.push_back({{"group", p.group}, {"lo", p.lo}, {"hi", p.hi}, {"sources", p.sources}});
  cfg["partitions"] = std::move(parts);
  cfg["huber_delta"] = model.cfg.huber_delta;
  cfg["share_edge_set_weights"] = model.cfg.share_edge_set_weights;
  cfg["mean_pooling"] = model.cfg.mean_pooling;
  j["config"] = std::move(cfg);
  j["encoder"] = layer_to_json(model.encoder);
  json nbrs = json::array();
  for (const auto& n : model.neighbor) nbrs.push_back(layer_to_json(n));
  j["neighbor"] = std::move(nbrs);
  j["self_transform"] = layer_to_json(model.self_transform);
  j["embedding"] = layer_to_json(model.embedding);
  json decs = json::array();
  for (std::size_t d = 0; d < model.decoders.size(); ++d)
    decs.push_back(
        {{"source", model.decoder_sources[d]}, {"layer", layer_to_json(model.decoders[d])}});
  j["decoders"] = std::move(decs);
  write_text_file(path, j.dump() + "\n");
}

PdfmModel load_checkpoint(const std::filesystem::path& path) {
  json j = json::parse(read_text_file(path));
  if (j.at("format_version").get<int>() != 1)
    throw SchemaError("unsupported checkpoint version");
  PdfmModel m;
  const auto& cfg = j.at("config");
  m.cfg.source_widths = cfg.at("source_widths").get<std::map<std::string, int>>();
  m.cfg.hidden_width = cfg.at("hidden_width").get<int>();
  m.cfg.embedding_width = cfg.at("embedding_width").get<int>();
  for (const auto& p : cfg.at("partitions"))
    m.cfg.partitions.push_back({p.at("group").get<std::string>(), p.at("lo").get<std::size_t>(),
                                p.at("hi").get<std::size_t>(),
                                p.at("sources").get<std::vector<std::string>>()});
  m.cfg.huber_delta = cfg.at("huber_delta").get<double>();
  m.cfg.share_edge_set_weights = cfg.at("share_edge_set_weights").get<bool>();
  m.cfg.mean_pooling = cfg.at("mean_pooling").get<bool>();
  m.encoder = layer_from_json(j.at("encoder"));
  int s = 0;
  for (const auto& n : j.at("neighbor")) m.neighbor[s++] = layer_from_json(n);
  m.self_transform = layer_from_json(j.at("self_transform"));
  m.embedding = layer_from_json(j.at("embedding"));
  for (const auto& d : j.at("decoders")) {
    m.decoder_sources.push_back(d.at("source").get<std::string>());
    m.decoders.push_back(layer_from_json(d.at("layer")));
  }
  return m;
}

void write_embeddings_csv(const EmbeddingTable& table, const std::filesystem::path& path) {
  CsvTable t;
  t.header.push_back("region_id");
  for (std::size_t j = 0; j < table.values.cols(); ++j)
    t.header.push_back("e_" + std::to_string(j));
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    std::vector<std::string> row{table.ids[i]};
    for (double v : table.values.row(i)) row.push_back(format_double(v));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

EmbeddingTable read_embeddings_csv(const std::filesystem::path& path) {
  auto t = read_csv(path);
  EmbeddingTable table;
  table.values = Matrix(t.rows.size(), t.header.size() - 1);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    table.ids.push_back(t.rows[i][0]);
    for (std::size_t j = 1; j < t.header.size(); ++j)
      table.values.at(i, j - 1) = parse_double(t.rows[i][j]);
  }
  return table;
}

}  // namespace pdfm::model
