#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "casegraph/store/embeddings.hpp"
#include "casegraph/store/graph.hpp"

namespace casegraph::store {

struct ClassRecord {
  std::string name;
  std::optional<std::size_t> text_row;

  bool operator==(const ClassRecord&) const = default;
};

struct SymptomRecord {
  std::string id;
  std::string text;
  std::size_t row = 0;

  bool operator==(const SymptomRecord&) const = default;
};

struct ImageRecord {
  std::string id;
  std::string class_name;
  std::vector<std::string> symptoms;
  std::size_t row = 0;
  std::string split = "train";

  bool operator==(const ImageRecord&) const = default;
};

// Dataset description. Embedding paths are resolved relative to the
// manifest's own directory.
struct DatasetManifest {
  std::vector<ClassRecord> classes;
  std::vector<SymptomRecord> symptoms;
  std::vector<ImageRecord> images;
  std::optional<std::size_t> declared_entities;
  std::optional<std::size_t> declared_edges;
  std::optional<std::size_t> image_dim;
  std::optional<std::size_t> text_dim;
  std::string image_embeddings;
  std::string text_embeddings;

  bool operator==(const DatasetManifest&) const = default;

  std::optional<std::size_t> class_index(const std::string& name) const;
};

// Throws ErrorKind::Manifest on duplicate ids, dangling references, or an
// empty class/image set.
void validate_manifest(const DatasetManifest& manifest);

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& doc);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

// Records whose split equals `split`; lexicon and classes are kept intact.
DatasetManifest filter_split(const DatasetManifest& manifest, const std::string& split);

// One disease node per class, one image node per record, one symptom node
// per lexicon entry. Checks declared counts when present.
KnowledgeGraph build_graph(const DatasetManifest& manifest);

enum class SelectionStrategy { Medoid, Random };

struct Selection {
  DatasetManifest manifest;
  std::vector<std::string> warnings;
};

// Keeps at most `per_class_budget` images per class, preserving record order.
// Medoid keeps the images with the highest cosine similarity to their class
// centroid of unit vectors (equivalently, highest mean similarity to the
// class members).
Selection select_representatives(const DatasetManifest& manifest,
                                 const EmbeddingMatrix& image_embeddings,
                                 std::size_t per_class_budget, SelectionStrategy strategy,
                                 std::uint64_t seed = 0);

// Checks every embedding reference in the graph against the matrices and the
// manifest's declared dimensions. Throws ErrorKind::Validation.
void link_embeddings(const KnowledgeGraph& graph, const EmbeddingMatrix& image_embeddings,
                     const EmbeddingMatrix& text_embeddings,
                     std::optional<std::size_t> expected_image_dim = std::nullopt,
                     std::optional<std::size_t> expected_text_dim = std::nullopt);

}  // namespace casegraph::store
