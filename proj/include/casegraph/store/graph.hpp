#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace casegraph::store {

enum class NodeKind : std::uint8_t { Disease = 0, Image = 1, Symptom = 2 };

std::string to_string(NodeKind kind);
NodeKind node_kind_from_string(const std::string& text);

struct NodeId {
  NodeKind kind = NodeKind::Image;
  std::size_t index = 0;

  auto operator<=>(const NodeId&) const = default;
};

std::string to_string(NodeId id);

struct DiseaseNode {
  std::string name;
  std::optional<std::size_t> text_row;  // row in the text embedding matrix

  bool operator==(const DiseaseNode&) const = default;
};

struct ImageNode {
  std::string case_id;
  std::size_t embedding_row = 0;  // row in the image embedding matrix

  bool operator==(const ImageNode&) const = default;
};

struct SymptomNode {
  std::string id;
  std::string text;
  std::size_t embedding_row = 0;  // row in the text embedding matrix

  bool operator==(const SymptomNode&) const = default;
};

// (image index, disease index) and (image index, symptom index)
using Edge = std::pair<std::size_t, std::size_t>;

// Three-layer disease / image / symptom graph. Immutable after construction;
// the constructor enforces every structural invariant and throws
// ErrorKind::Validation naming the offending node.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(std::vector<DiseaseNode> diseases, std::vector<ImageNode> images,
                 std::vector<SymptomNode> symptoms, std::vector<Edge> image_disease,
                 std::vector<Edge> image_symptom);

  const std::vector<DiseaseNode>& diseases() const noexcept { return diseases_; }
  const std::vector<ImageNode>& images() const noexcept { return images_; }
  const std::vector<SymptomNode>& symptoms() const noexcept { return symptoms_; }
  const std::vector<Edge>& image_disease_edges() const noexcept { return image_disease_; }
  const std::vector<Edge>& image_symptom_edges() const noexcept { return image_symptom_; }

  std::size_t entity_count() const noexcept {
    return diseases_.size() + images_.size() + symptoms_.size();
  }
  std::size_t edge_count() const noexcept { return image_disease_.size() + image_symptom_.size(); }

  bool contains(NodeId id) const noexcept;
  std::size_t disease_of(std::size_t image) const;
  const std::vector<std::size_t>& symptoms_of(std::size_t image) const;

  // Sorted, deduplicated one-hop adjacency. Throws ErrorKind::Lookup for
  // unknown nodes.
  std::vector<NodeId> neighbors(NodeId id) const;

  bool operator==(const KnowledgeGraph& other) const;

 private:
  std::vector<DiseaseNode> diseases_;
  std::vector<ImageNode> images_;
  std::vector<SymptomNode> symptoms_;
  std::vector<Edge> image_disease_;
  std::vector<Edge> image_symptom_;

  std::vector<std::size_t> image_to_disease_;
  std::vector<std::vector<std::size_t>> image_to_symptoms_;
  std::vector<std::vector<std::size_t>> disease_to_images_;
  std::vector<std::vector<std::size_t>> symptom_to_images_;
};

}  // namespace casegraph::store
