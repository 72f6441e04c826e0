#include "casegraph/retrieval/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "casegraph/error.hpp"

namespace casegraph::retrieval {

using nlohmann::json;
using store::NodeId;
using store::NodeKind;

void RetrievalConfig::validate() const {
  if (k == 0) fail(ErrorKind::Config, "retrieval k must be positive");
  if (!(u_th > 0.0)) fail(ErrorKind::Config, "retrieval u_th must be positive");
  if (min_keep == 0) fail(ErrorKind::Config, "retrieval min_keep must be positive");
  if (min_keep > k) fail(ErrorKind::Config, "retrieval min_keep must not exceed k");
  if (!(sim_floor > 0.0)) fail(ErrorKind::Config, "retrieval sim_floor must be positive");
}

ExactIndex::ExactIndex(const store::KnowledgeGraph& graph,
                       const store::EmbeddingMatrix& image_embeddings)
    : count_(graph.images().size()), dim_(image_embeddings.dim()) {
  rows_.reserve(count_ * dim_);
  for (const auto& img : graph.images()) {
    const auto row = image_embeddings.row(img.embedding_row);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    const double norm = std::sqrt(sq);
    for (double v : row) rows_.push_back(norm > 0.0 ? v / norm : 0.0);
  }
}

std::span<const double> ExactIndex::row(std::size_t image) const {
  if (image >= count_) fail(ErrorKind::Lookup, "index has no image " + std::to_string(image));
  return std::span<const double>(rows_).subspan(image * dim_, dim_);
}

RetrievalResult ExactIndex::search_topk(std::span<const double> query, std::size_t k,
                                        std::optional<std::size_t> exclude) const {
  if (count_ == 0) fail(ErrorKind::Retrieval, "search over an empty index");
  if (k == 0) fail(ErrorKind::Config, "search_topk requires k >= 1");
  if (query.size() != dim_) {
    fail(ErrorKind::Shape, "query dim " + std::to_string(query.size()) +
                               " does not match index dim " + std::to_string(dim_));
  }
  double sq = 0.0;
  for (double v : query) sq += v * v;
  const double qnorm = std::sqrt(sq);
  std::vector<ScoredImage> scored;
  scored.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i) {
    if (exclude && *exclude == i) continue;
    double s = 0.0;
    if (qnorm > 0.0) {
      const double* r = rows_.data() + i * dim_;
      for (std::size_t d = 0; d < dim_; ++d) s += r[d] * query[d];
      s /= qnorm;
    }
    scored.push_back({i, s});
  }
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    [](const ScoredImage& a, const ScoredImage& b) {
                      if (a.similarity != b.similarity) return a.similarity > b.similarity;
                      return a.image < b.image;
                    });
  scored.resize(take);
  return RetrievalResult{std::move(scored)};
}

RetrievalResult adaptive_truncate(const RetrievalResult& ranked, const RetrievalConfig& config,
                                  TruncationTrace* trace) {
  config.validate();
  if (ranked.empty()) fail(ErrorKind::Usage, "adaptive_truncate of an empty ranking");
  std::vector<ScoredImage> items = ranked.items;
  for (auto& item : items) item.similarity = std::clamp(item.similarity, config.sim_floor, 1.0);
  for (std::size_t i = 1; i < items.size(); ++i) {
    if (items[i].similarity > items[i - 1].similarity) {
      fail(ErrorKind::Usage, "adaptive_truncate input is not sorted by similarity");
    }
  }
  const std::size_t available = std::min(items.size(), config.k);
  std::vector<double> ratios;
  std::size_t cut = available;
  for (std::size_t i = 0; i + 1 < available; ++i) {
    const double u = std::log(items[i].similarity / items[i + 1].similarity);
    ratios.push_back(u);
    if (u > config.u_th && cut == available) cut = i + 1;
  }
  const std::size_t keep = std::min(std::max(cut, config.min_keep), available);
  if (trace != nullptr) {
    trace->clamped.clear();
    for (std::size_t i = 0; i < available; ++i) trace->clamped.push_back(items[i].similarity);
    trace->log_ratios = std::move(ratios);
    trace->cut = keep;
  }
  items.resize(keep);
  return RetrievalResult{std::move(items)};
}

std::optional<std::size_t> CaseSubgraph::position(NodeId id) const {
  const auto it = std::find(nodes.begin(), nodes.end(), id);
  if (it == nodes.end()) return std::nullopt;
  return static_cast<std::size_t>(it - nodes.begin());
}

CaseSubgraph extract_subgraph(const store::KnowledgeGraph& graph, const RetrievalResult& retained,
                              std::string query_id) {
  if (retained.empty()) fail(ErrorKind::Usage, "extract_subgraph requires at least one retained image");
  CaseSubgraph sub;
  sub.query_id = std::move(query_id);
  std::set<std::size_t> seen_images;
  for (const auto& item : retained.items) {
    if (!graph.contains({NodeKind::Image, item.image})) {
      fail(ErrorKind::Lookup, "retained image node " + std::to_string(item.image) + " not in graph");
    }
    if (!seen_images.insert(item.image).second) {
      fail(ErrorKind::Usage, "retained image node " + std::to_string(item.image) + " listed twice");
    }
    sub.retained.push_back(item);
    sub.nodes.push_back({NodeKind::Image, item.image});
  }
  std::set<NodeId> neighbors;
  for (const auto& item : retained.items) {
    for (const NodeId& n : graph.neighbors({NodeKind::Image, item.image})) neighbors.insert(n);
  }
  for (const NodeId& n : neighbors) sub.nodes.push_back(n);
  for (std::size_t i = 0; i < sub.retained.size(); ++i) {
    for (const NodeId& n : graph.neighbors({NodeKind::Image, sub.retained[i].image})) {
      sub.edges.emplace_back(i, *sub.position(n));
    }
  }
  return sub;
}

bool satisfies_star_property(const CaseSubgraph& sub) {
  std::vector<bool> touched(sub.nodes.size(), false);
  for (const auto& [a, b] : sub.edges) {
    if (a >= sub.nodes.size() || b >= sub.nodes.size()) return false;
    if (sub.nodes[a].kind != NodeKind::Image) return false;
    if (sub.nodes[b].kind == NodeKind::Image) return false;
    touched[b] = true;
  }
  for (const auto& item : sub.retained) {
    if (!sub.position({NodeKind::Image, item.image})) return false;
  }
  for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
    if (sub.nodes[i].kind != NodeKind::Image && !touched[i]) return false;
  }
  std::set<NodeId> unique(sub.nodes.begin(), sub.nodes.end());
  return unique.size() == sub.nodes.size();
}

RetrievalOutcome retrieve(const store::KnowledgeGraph& graph, const ExactIndex& index,
                          std::span<const double> query, const RetrievalConfig& config,
                          std::optional<std::size_t> self_image, std::string query_id) {
  config.validate();
  RetrievalOutcome out;
  std::optional<std::size_t> exclude;
  if (self_image && !config.include_self) exclude = self_image;
  out.candidates = index.search_topk(query, config.k, exclude);
  if (out.candidates.empty()) fail(ErrorKind::Retrieval, "no candidates left after self-exclusion");
  out.retained = adaptive_truncate(out.candidates, config, &out.trace);
  out.subgraph = extract_subgraph(graph, out.retained, std::move(query_id));
  return out;
}

const RetrievalResult& SubgraphCache::at(std::size_t image) const {
  if (image >= retained.size()) {
    fail(ErrorKind::Cache, "no cached subgraph for image node " + std::to_string(image) +
                               "; rebuild with `casegraph cache-subgraphs`");
  }
  return retained[image];
}

SubgraphCache build_subgraph_cache(const store::KnowledgeGraph& graph, const ExactIndex& index,
                                   const RetrievalConfig& config) {
  SubgraphCache cache;
  cache.config = config;
  cache.graph_images = graph.images().size();
  for (std::size_t i = 0; i < graph.images().size(); ++i) {
    const auto outcome = retrieve(graph, index, index.row(i), config, i);
    cache.retained.push_back(outcome.retained);
  }
  return cache;
}

json cache_to_json(const SubgraphCache& cache) {
  json doc;
  doc["format"] = "casegraph-subgraph-cache";
  doc["version"] = 1;
  doc["retrieval"] = {{"k", cache.config.k},
                      {"u_th", cache.config.u_th},
                      {"min_keep", cache.config.min_keep},
                      {"sim_floor", cache.config.sim_floor},
                      {"include_self", cache.config.include_self}};
  doc["graph_images"] = cache.graph_images;
  json entries = json::array();
  for (std::size_t i = 0; i < cache.retained.size(); ++i) {
    json items = json::array();
    for (const auto& item : cache.retained[i].items) items.push_back({item.image, item.similarity});
    entries.push_back({{"image", i}, {"retained", items}});
  }
  doc["subgraphs"] = entries;
  return doc;
}

SubgraphCache cache_from_json(const json& doc) {
  SubgraphCache cache;
  try {
    if (doc.value("format", std::string{}) != "casegraph-subgraph-cache") {
      fail(ErrorKind::Parse, "not a casegraph-subgraph-cache document");
    }
    const auto& r = doc.at("retrieval");
    cache.config.k = r.at("k").get<std::size_t>();
    cache.config.u_th = r.at("u_th").get<double>();
    cache.config.min_keep = r.at("min_keep").get<std::size_t>();
    cache.config.sim_floor = r.at("sim_floor").get<double>();
    cache.config.include_self = r.at("include_self").get<bool>();
    cache.graph_images = doc.at("graph_images").get<std::size_t>();
    for (const auto& entry : doc.at("subgraphs")) {
      if (entry.at("image").get<std::size_t>() != cache.retained.size()) {
        fail(ErrorKind::Validation, "subgraph cache entries are out of order");
      }
      RetrievalResult result;
      for (const auto& item : entry.at("retained")) {
        result.items.push_back({item.at(0).get<std::size_t>(), item.at(1).get<double>()});
      }
      cache.retained.push_back(std::move(result));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed subgraph cache: ") + e.what());
  }
  return cache;
}

void save_subgraph_cache(const SubgraphCache& cache, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << cache_to_json(cache).dump(1) << '\n';
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

SubgraphCache load_subgraph_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Cache, "cannot open subgraph cache " + path.string() +
                                      "; rebuild with `casegraph cache-subgraphs`");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return cache_from_json(doc);
}

}  // namespace casegraph::retrieval
