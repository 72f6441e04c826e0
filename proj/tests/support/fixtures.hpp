#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "casegraph/error.hpp"
#include "casegraph/model/params.hpp"
#include "casegraph/retrieval/retrieval.hpp"
#include "casegraph/store/embeddings.hpp"
#include "casegraph/store/graph.hpp"
#include "casegraph/store/manifest.hpp"

namespace fixtures {

// Kind of the casegraph::Error raised by f, or nullopt if it returned.
template <class F>
std::optional<casegraph::ErrorKind> thrown_kind(F&& f) {
  try {
    f();
  } catch (const casegraph::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

// A handful of KG nodes with random embeddings and one query subgraph of at
// most `max_nodes` nodes.
struct TinyWorld {
  casegraph::store::KnowledgeGraph graph;
  casegraph::store::EmbeddingMatrix image;
  casegraph::store::EmbeddingMatrix text;
  casegraph::retrieval::CaseSubgraph sub;
  std::vector<double> query;
};

TinyWorld tiny_world(std::mt19937_64& rng, std::size_t image_dim, std::size_t text_dim, std::size_t classes,
                     std::size_t max_nodes);

// Replaces every tensor entry with U(-scale, scale), LayerNorm gains with
// 1 + U(-scale, scale).
void randomize(casegraph::model::ModelParams& params, std::mt19937_64& rng, double scale);

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0);

// One class, two images with two symptoms each, a three-symptom lexicon.
casegraph::store::DatasetManifest six_entity_manifest();

// 2 classes, 40 images, 18 symptoms: 60 entities and 271 edges.
casegraph::store::DatasetManifest sixty_entity_manifest();

// Up to 4 classes, 6 symptoms and 12 images with random symptom sets.
casegraph::store::DatasetManifest random_manifest(std::mt19937_64& rng);

// Strictly positive entries summing to 1.
std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n);

}  // namespace fixtures
