#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "casegraph/store/embeddings.hpp"
#include "casegraph/store/graph.hpp"

namespace casegraph::retrieval {

struct RetrievalConfig {
  std::size_t k = 10;          // candidate pool
  double u_th = 0.3;           // log similarity-ratio cut threshold
  std::size_t min_keep = 1;
  double sim_floor = 1e-8;     // similarities are clamped to [sim_floor, 1]
  bool include_self = true;    // keep the exact self-match for KG-member queries

  void validate() const;
  bool operator==(const RetrievalConfig&) const = default;
};

struct ScoredImage {
  std::size_t image = 0;  // image node index in the graph
  double similarity = 0.0;

  bool operator==(const ScoredImage&) const = default;
};

// Ranked candidates, similarities nonincreasing.
struct RetrievalResult {
  std::vector<ScoredImage> items;

  bool empty() const noexcept { return items.empty(); }
  std::size_t size() const noexcept { return items.size(); }
  bool operator==(const RetrievalResult&) const = default;
};

// Exact cosine search over the graph's image nodes. Rows are held
// L2-normalized so cosine is an inner product.
class ExactIndex {
 public:
  ExactIndex() = default;
  ExactIndex(const store::KnowledgeGraph& graph, const store::EmbeddingMatrix& image_embeddings);

  std::size_t size() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> row(std::size_t image) const;

  // The k highest cosine similarities, ties broken by ascending node index.
  RetrievalResult search_topk(std::span<const double> query, std::size_t k,
                              std::optional<std::size_t> exclude = std::nullopt) const;

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> rows_;
};

struct TruncationTrace {
  std::vector<double> clamped;     // clamped input similarities
  std::vector<double> log_ratios;  // u_i = log(S_i / S_{i+1})
  std::size_t cut = 0;             // retained count
};

// Keeps the first i items where i is the smallest position whose log ratio
// exceeds u_th (all items when none does), bounded to [min_keep, available].
RetrievalResult adaptive_truncate(const RetrievalResult& ranked, const RetrievalConfig& config,
                                  TruncationTrace* trace = nullptr);

// Query-specific star subgraph: retained images plus their one-hop disease
// and symptom neighbors.
struct CaseSubgraph {
  std::string query_id;
  std::vector<ScoredImage> retained;
  std::vector<store::NodeId> nodes;  // retained images first, then neighbors in NodeId order
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (image position, neighbor position)

  std::optional<std::size_t> position(store::NodeId id) const;
  bool operator==(const CaseSubgraph&) const = default;
};

CaseSubgraph extract_subgraph(const store::KnowledgeGraph& graph, const RetrievalResult& retained,
                              std::string query_id = {});

// Every non-image node touches a retained image; every retained image is present.
bool satisfies_star_property(const CaseSubgraph& subgraph);

struct RetrievalOutcome {
  RetrievalResult candidates;
  TruncationTrace trace;
  RetrievalResult retained;
  CaseSubgraph subgraph;
};

RetrievalOutcome retrieve(const store::KnowledgeGraph& graph, const ExactIndex& index,
                          std::span<const double> query, const RetrievalConfig& config,
                          std::optional<std::size_t> self_image = std::nullopt,
                          std::string query_id = {});

// Retained lists for every KG image, computed once with the image itself as
// query. The second refinement pass consumes these.
struct SubgraphCache {
  RetrievalConfig config;
  std::size_t graph_images = 0;
  std::vector<RetrievalResult> retained;

  const RetrievalResult& at(std::size_t image) const;
  bool operator==(const SubgraphCache&) const = default;
};

SubgraphCache build_subgraph_cache(const store::KnowledgeGraph& graph, const ExactIndex& index,
                                   const RetrievalConfig& config);
nlohmann::json cache_to_json(const SubgraphCache& cache);
SubgraphCache cache_from_json(const nlohmann::json& doc);
void save_subgraph_cache(const SubgraphCache& cache, const std::filesystem::path& path);
SubgraphCache load_subgraph_cache(const std::filesystem::path& path);

}  // namespace casegraph::retrieval
