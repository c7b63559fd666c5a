#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pdfm/features.hpp"
#include "pdfm/graph.hpp"
#include "pdfm/nn.hpp"
#include "pdfm/sampling.hpp"

namespace pdfm::model {

/// One embedding slice and the feature sources reconstructed from it.
struct Partition {
  std::string group;
  std::size_t lo = 0;
  std::size_t hi = 0;  // half-open
  std::vector<std::string> sources;
};

struct PdfmConfig {
  std::map<std::string, int> source_widths;  // per-source standardized input width
  int hidden_width = 256;                    // H
  int embedding_width = 330;                 // D
  std::vector<Partition> partitions;         // ordered, disjoint, cover [0, D)
  int message_passing_rounds = 1;            // architecture uses exactly one
  double huber_delta = 1.0;
  double lr_max = 1e-3;
  int epochs = 30;
  int batch_size = 32;
  double validation_fraction = 0.2;
  std::uint64_t rng_seed = 0;
  bool share_edge_set_weights = false;  // one neighbor transform for all edge sets
  bool mean_pooling = false;            // mean instead of sum over neighbor states

  /// Sources in partition order; defines the input concatenation order.
  std::vector<std::string> ordered_sources() const;
  int input_width() const;
  void validate() const;

  /// D=330 with slices 128/128/74 (trends, maps+busyness, weather & AQ).
  static PdfmConfig paper_preset(std::map<std::string, int> source_widths);
  /// D=48 with equal 16-wide slices, H=128; desk-scale testing shape.
  static PdfmConfig desk_preset(std::map<std::string, int> source_widths);
};

struct PdfmModel {
  PdfmConfig cfg;
  nn::DenseLayer encoder;                                    // F -> H, GeLU
  std::array<nn::DenseLayer, graph::kEdgeSetCount> neighbor; // H -> H, ReLU
  nn::DenseLayer self_transform;                             // H -> H, identity
  nn::DenseLayer embedding;                                  // H -> D, identity
  std::vector<nn::DenseLayer> decoders;                      // slice width -> source width
  std::vector<std::string> decoder_sources;                  // aligned with decoders

  const nn::DenseLayer& neighbor_layer(graph::EdgeSetName set) const;
  nn::DenseLayer& neighbor_layer(graph::EdgeSetName set);
  const Partition& partition_of(const std::string& source) const;
};

/// Everything needed to evaluate the model on one seed: row 0 holds the
/// seed's standardized concatenated features, later rows its sampled hop-1
/// in-neighbors, grouped per edge set.
struct SeedContext {
  std::uint32_t seed_node = 0;
  std::vector<std::uint32_t> graph_nodes;  // aligned with input rows
  std::array<std::vector<std::size_t>, graph::kEdgeSetCount> neighbor_rows;
  Matrix inputs;  // graph_nodes.size() x F
};

PdfmModel init_model(const PdfmConfig& cfg, Rng& rng);

/// h0 = GeLU(W_enc x + b) per row.
Matrix encode_inputs(const PdfmModel& model, const Matrix& rows);

/// One round of message passing for the seed (row 0 of h0):
/// h1 = W_self h0(seed) + b_self + sum_e pool_e(ReLU(W_e h0(u) + b_e)).
std::vector<double> sage_forward(const PdfmModel& model, const SeedContext& ctx,
                                 const Matrix& h0);

/// e(v) = W_emb h1(v) + b_emb, running the full encoder + message-passing stack.
std::vector<double> embed(const PdfmModel& model, const SeedContext& ctx);

/// Per-source reconstruction from the embedding; decoder m reads only the
/// columns of its partition.
std::map<std::string, std::vector<double>> reconstruct(const PdfmModel& model,
                                                       std::span<const double> e);

/// Builds the model input for one sampled subgraph from the graph's
/// standardized blocks (concatenated in partition order).
SeedContext make_seed_context(const graph::RegionGraph& graph,
                              const sampling::Subgraph& subgraph,
                              const PdfmConfig& cfg);

/// Summed self-supervised Huber reconstruction loss over all sources, with
/// gradients for every layer when `grads` is non-null.
struct PdfmGrads {
  nn::DenseGrads encoder;
  std::array<nn::DenseGrads, graph::kEdgeSetCount> neighbor;
  nn::DenseGrads self_transform;
  nn::DenseGrads embedding;
  std::vector<nn::DenseGrads> decoders;
};

double forward_loss(const PdfmModel& model, const SeedContext& ctx, PdfmGrads* grads);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  PdfmModel model;
  std::vector<EpochStats> history;
  std::vector<std::string> train_seeds;
  std::vector<std::string> val_seeds;
};

/// Self-supervised training: 80/20 seed split, mini-batched subgraphs,
/// Adam with cosine-decayed learning rate. Deterministic under cfg.rng_seed.
TrainResult train_pdfm(const graph::RegionGraph& graph, const PdfmConfig& cfg,
                       const sampling::SamplerConfig& sampler_cfg);

struct EmbeddingTable {
  std::vector<std::string> ids;
  Matrix values;
  std::string fingerprint;
  std::vector<Partition> partitions;

  std::size_t width() const { return values.cols(); }
  std::vector<double> row_of(const std::string& id) const;
};

/// One embedding per graph node via its sampled subgraph.
EmbeddingTable export_embeddings(const PdfmModel& model, const graph::RegionGraph& graph,
                                 const sampling::SamplerConfig& sampler_cfg);

/// Columns restricted to one modality group's partition.
EmbeddingTable slice_modality(const EmbeddingTable& table, const std::string& group);

/// Row-wise [pdfm || external] concatenation over an identical node-id set.
EmbeddingTable concat_external(const EmbeddingTable& table, const EmbeddingTable& external);

void save_checkpoint(const PdfmModel& model, const std::filesystem::path& path);
PdfmModel load_checkpoint(const std::filesystem::path& path);

void write_embeddings_csv(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable read_embeddings_csv(const std::filesystem::path& path);

}  // namespace pdfm::model
