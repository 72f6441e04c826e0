#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "casegraph/model/params.hpp"
#include "casegraph/numerics/random.hpp"
#include "casegraph/numerics/tape.hpp"
#include "casegraph/retrieval/retrieval.hpp"
#include "casegraph/store/embeddings.hpp"
#include "casegraph/store/graph.hpp"

namespace casegraph::model {

using numerics::Var;

enum class Mode { Train, Eval };

// Dropout is active only in Train mode, which requires an rng.
struct ForwardContext {
  Mode mode = Mode::Eval;
  numerics::Rng* rng = nullptr;
};

// Resolves parameter names to tape leaves, once per name. A mutable
// ModelParams yields gradient-accumulating leaves; a const one yields views.
class ParamBinding {
 public:
  ParamBinding(numerics::Tape& tape, ModelParams& params);
  ParamBinding(numerics::Tape& tape, const ModelParams& params);

  Var operator()(const std::string& name);
  numerics::Tape& tape() noexcept { return tape_; }
  const ModelConfig& config() const noexcept { return params_.config(); }

 private:
  numerics::Tape& tape_;
  const ModelParams& params_;
  ModelParams* mutable_ = nullptr;
  std::map<std::string, Var> bound_;
};

// Node features for subgraph nodes: image rows from the image matrix,
// disease and symptom rows from the text matrix.
struct FeatureSource {
  const store::KnowledgeGraph* graph = nullptr;
  const store::EmbeddingMatrix* image = nullptr;
  const store::EmbeddingMatrix* text = nullptr;
};

// One or more query subgraphs laid out as a single disjoint graph. Node ids
// are global; each query's nodes form a contiguous block.
struct BatchGraph {
  std::vector<store::NodeId> nodes;
  std::vector<std::size_t> node_offset;  // first node of each query
  // Directed message edges (target, source) including one self-loop per
  // node, sorted by target then source.
  std::vector<std::size_t> targets;
  std::vector<std::size_t> sources;
  // Retained images of every query in rank order.
  std::vector<std::size_t> image_nodes;
  std::vector<std::size_t> image_query;
  std::vector<double> image_sims;

  std::size_t node_count() const noexcept { return nodes.size(); }
  std::size_t query_count() const noexcept { return node_offset.size(); }
};

BatchGraph build_batch_graph(std::span<const retrieval::CaseSubgraph* const> subgraphs);

// Knowledge weights: sim_i over their sum. Sims must be positive.
std::vector<double> knowledge_weights(std::span<const double> sims);

struct GatLayerTrace {
  // alpha[h][e] for edge e of BatchGraph, before dropout
  std::vector<std::vector<double>> alpha;
};

struct CrossModalTrace {
  // single-key attention weights per head; 1 exactly by construction
  std::vector<double> kg_weights;
  std::vector<double> img_weights;
};

struct ForwardTrace {
  std::vector<numerics::Tensor> node_states;  // layer 0..L, rows in BatchGraph order
  std::vector<GatLayerTrace> gat;
  std::vector<std::size_t> edge_targets;
  std::vector<std::size_t> edge_sources;
  std::vector<double> aggregate_weights;      // normalized knowledge weights per retained image
  std::vector<CrossModalTrace> cross_modal;
  numerics::Tensor v_query;  // after the last cross-modal block
  numerics::Tensor z_kg;
  numerics::Tensor fused;
  numerics::Tensor logits;
};

// Mean over heads of the final-layer attention that each symptom node sends
// into retained image nodes, keyed by node position. Empty when there are no
// GAT layers.
std::vector<std::pair<std::size_t, double>> symptom_attention_mass(const ForwardTrace& trace,
                                                                   const BatchGraph& graph);

// Projected query features, one row per query.
Var project_queries(ParamBinding& p, std::span<const std::span<const double>> embeddings);

// Layer-0 states for every node of the batch graph.
Var init_node_states(ParamBinding& p, const BatchGraph& graph, const FeatureSource& features);

Var gat_layer(ParamBinding& p, std::size_t layer, Var states, const BatchGraph& graph,
              const ForwardContext& ctx, GatLayerTrace* trace = nullptr);

// Row q is the similarity-weighted aggregate of query q's retained image states.
Var aggregate_knowledge(Var states, const BatchGraph& graph, std::vector<double>* weights = nullptr);

// Single-token multi-head attention; `prefix` names the q/k/v/out tensors.
Var cross_attention(ParamBinding& p, const std::string& prefix, Var query, Var key_value,
                    std::size_t heads, const ForwardContext& ctx, std::vector<double>* weights = nullptr);

// Returns (v', z'). Rows are independent queries.
std::pair<Var, Var> cross_modal_block(ParamBinding& p, std::size_t block, Var v, Var z,
                                      const ForwardContext& ctx, CrossModalTrace* trace = nullptr);

// concat(v, z, |v - z|, v * z)
Var fuse_features(Var v, Var z);
std::vector<double> fuse_features(std::span<const double> v, std::span<const double> z);

Var classify(ParamBinding& p, Var fused, const ForwardContext& ctx);

struct QueryInput {
  std::span<const double> embedding;
  const retrieval::CaseSubgraph* subgraph = nullptr;
};

// Logits, one row per query. Tracing requires a single query.
Var forward(ParamBinding& p, std::span<const QueryInput> queries, const FeatureSource& features,
            const ForwardContext& ctx, ForwardTrace* trace = nullptr);

// Eval-mode logits for frozen parameters.
std::vector<std::vector<double>> infer_logits(const ModelParams& params,
                                              std::span<const QueryInput> queries,
                                              const FeatureSource& features,
                                              ForwardTrace* trace = nullptr);

}  // namespace casegraph::model
