#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "casegraph/cdr/cdr.hpp"
#include "casegraph/experiment/config.hpp"
#include "casegraph/experiment/metrics.hpp"
#include "casegraph/model/kpi.hpp"
#include "casegraph/model/params.hpp"
#include "casegraph/retrieval/retrieval.hpp"
#include "casegraph/store/embeddings.hpp"
#include "casegraph/store/graph.hpp"
#include "casegraph/store/manifest.hpp"

namespace casegraph::experiment {

struct Query {
  std::string id;
  std::size_t row = 0;    // image embedding row
  std::size_t label = 0;
  std::optional<std::size_t> kg_image;  // set when the image is itself a KG node
};

// Records chosen for the KG: split "train", representative selection, then
// the ablation node drop when the mode requests one.
struct KgSelection {
  store::DatasetManifest manifest;
  std::vector<std::string> warnings;
};

KgSelection select_kg_records(const store::DatasetManifest& manifest, const store::EmbeddingMatrix& image_embeddings,
                              const ExperimentConfig& config);

// Removes round(fraction * count) image records and lexicon symptoms, drawn
// with the "ablation-drop" substream. The last image of a class is kept.
store::DatasetManifest drop_nodes(const store::DatasetManifest& manifest, double fraction, std::uint64_t seed);

// Dataset, graph, index and per-case subgraph cache for one run. Queries keep
// their retrieval outcomes, which depend only on embeddings.
class Workspace {
 public:
  Workspace(store::DatasetManifest manifest, store::EmbeddingMatrix image_embeddings,
            store::EmbeddingMatrix text_embeddings, store::KnowledgeGraph graph,
            const retrieval::RetrievalConfig& retrieval, std::optional<retrieval::SubgraphCache> cache = std::nullopt);
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const store::DatasetManifest& manifest() const noexcept { return manifest_; }
  const store::EmbeddingMatrix& image_embeddings() const noexcept { return image_; }
  const store::EmbeddingMatrix& text_embeddings() const noexcept { return text_; }
  const store::KnowledgeGraph& graph() const noexcept { return graph_; }
  const retrieval::ExactIndex& index() const noexcept { return index_; }
  const retrieval::SubgraphCache& cache() const noexcept { return cache_; }
  const retrieval::RetrievalConfig& retrieval_config() const noexcept { return retrieval_; }
  std::vector<std::string> class_names() const;
  model::FeatureSource features() const { return {&graph_, &image_, &text_}; }

  // Queries of one split in record order. Throws a config error when empty.
  std::vector<Query> queries(const std::string& split) const;

  // Retrieval for a query; KG members exclude themselves when leave_one_out.
  retrieval::RetrievalOutcome retrieve(const Query& query, bool leave_one_out) const;

 private:
  store::DatasetManifest manifest_;
  store::EmbeddingMatrix image_;
  store::EmbeddingMatrix text_;
  store::KnowledgeGraph graph_;
  retrieval::RetrievalConfig retrieval_;
  retrieval::ExactIndex index_;
  retrieval::SubgraphCache cache_;
  std::map<std::string, std::size_t> kg_image_by_case_;
};

// Model dims and class count filled from the workspace where left at zero.
model::ModelConfig resolve_model_config(model::ModelConfig config, const Workspace& workspace);

struct QueryResult {
  retrieval::RetrievalOutcome outcome;
  std::vector<double> logits;
  std::vector<double> p_q;
};

// Eval-mode first pass over queries, in chunks of `batch`, fanned out over
// `jobs` threads. Results are independent of `jobs`.
std::vector<QueryResult> first_pass(const model::ModelParams& params, const Workspace& workspace,
                                    std::span<const Query> queries, bool leave_one_out, std::size_t batch,
                                    std::size_t jobs);

// Full inference for one query embedding: retrieval, first pass over the
// query's subgraph, then the case-based second pass. `self_image` marks the
// query as a KG member. Outcome and first-pass trace are returned on request.
cdr::PredictionBundle predict_query(const model::ModelParams& params, const Workspace& workspace,
                                    std::span<const double> embedding, const std::string& query_id,
                                    std::optional<std::size_t> self_image, const ExperimentConfig& config,
                                    retrieval::RetrievalOutcome* outcome = nullptr,
                                    model::ForwardTrace* trace = nullptr);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_oa = 0.0;
};

struct TrainResult {
  model::ModelParams best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_oa = 0.0;
};

// Leave-one-out first-pass training on split "train", early stopping on
// first-pass OA over split "val".
TrainResult train(const Workspace& workspace, const ExperimentConfig& config);

// "epoch lr train_loss val_oa" per line, preceded by a header line.
std::string history_text(const std::vector<EpochRecord>& history);

struct QueryPrediction {
  std::string id;
  std::size_t label = 0;
  std::size_t predicted = 0;
  std::vector<double> p_q;
  std::vector<double> p_final;
};

struct EvalReport {
  std::string split;
  double oa = 0.0;
  double macro_auc = 0.0;
  std::vector<std::optional<double>> per_class_auc;
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::string> warnings;
  std::vector<std::string> class_names;
  std::vector<QueryPrediction> predictions;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
};

// Full inference (first pass, then CDR unless lambda is 0) on one split.
EvalReport evaluate(const model::ModelParams& params, const Workspace& workspace, const std::string& split,
                    const ExperimentConfig& config);

nlohmann::json eval_report_to_json(const EvalReport& report);

// Builds the workspace an ablation mode prescribes, trains and evaluates on
// split "test".
struct AblationOutcome {
  EvalReport report;
  TrainResult training;
};

AblationOutcome run_ablation(const store::DatasetManifest& manifest, const store::EmbeddingMatrix& image_embeddings,
                             const store::EmbeddingMatrix& text_embeddings, const ExperimentConfig& config);

std::unique_ptr<Workspace> build_workspace(const store::DatasetManifest& manifest,
                                           const store::EmbeddingMatrix& image_embeddings,
                                           const store::EmbeddingMatrix& text_embeddings,
                                           const ExperimentConfig& config, std::vector<std::string>* warnings = nullptr);

enum class SweepParameter { Lambda, GatLayers };

std::string to_string(SweepParameter parameter);
SweepParameter sweep_parameter_from_string(const std::string& name);

struct SweepRow {
  double value = 0.0;
  EvalReport report;
  double seconds = 0.0;  // wall time; excluded from determinism checks
};

// Lambda: one training run, one evaluation per grid value. GAT depth: one
// training run per value.
std::vector<SweepRow> sweep(SweepParameter parameter, std::span<const double> grid,
                            const store::DatasetManifest& manifest, const store::EmbeddingMatrix& image_embeddings,
                            const store::EmbeddingMatrix& text_embeddings, const ExperimentConfig& config);

// Columns: parameter,value,oa,macro_auc,seconds
std::string sweep_csv(SweepParameter parameter, std::span<const SweepRow> rows);
nlohmann::json sweep_to_json(SweepParameter parameter, std::span<const SweepRow> rows, const ExperimentConfig& config);

}  // namespace casegraph::experiment
