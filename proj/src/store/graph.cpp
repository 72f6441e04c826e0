#include "casegraph/store/graph.hpp"

#include <algorithm>

#include "casegraph/error.hpp"

namespace casegraph::store {

std::string to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Disease: return "disease";
    case NodeKind::Image: return "image";
    case NodeKind::Symptom: return "symptom";
  }
  return "unknown";
}

NodeKind node_kind_from_string(const std::string& text) {
  if (text == "disease") return NodeKind::Disease;
  if (text == "image") return NodeKind::Image;
  if (text == "symptom") return NodeKind::Symptom;
  fail(ErrorKind::Parse, "unknown node kind '" + text + "'");
}

std::string to_string(NodeId id) { return to_string(id.kind) + ":" + std::to_string(id.index); }

namespace {

std::string describe_image(const std::vector<ImageNode>& images, std::size_t i) {
  return "image node " + std::to_string(i) + " (case '" + images[i].case_id + "')";
}

}  // namespace

KnowledgeGraph::KnowledgeGraph(std::vector<DiseaseNode> diseases, std::vector<ImageNode> images,
                               std::vector<SymptomNode> symptoms, std::vector<Edge> image_disease,
                               std::vector<Edge> image_symptom)
    : diseases_(std::move(diseases)),
      images_(std::move(images)),
      symptoms_(std::move(symptoms)),
      image_disease_(std::move(image_disease)),
      image_symptom_(std::move(image_symptom)) {
  std::sort(image_disease_.begin(), image_disease_.end());
  std::sort(image_symptom_.begin(), image_symptom_.end());
  if (std::adjacent_find(image_symptom_.begin(), image_symptom_.end()) != image_symptom_.end()) {
    const auto dup = *std::adjacent_find(image_symptom_.begin(), image_symptom_.end());
    fail(ErrorKind::Validation, describe_image(images_, dup.first) +
                                    " has a duplicate edge to symptom node " +
                                    std::to_string(dup.second));
  }

  const std::size_t unset = static_cast<std::size_t>(-1);
  image_to_disease_.assign(images_.size(), unset);
  image_to_symptoms_.assign(images_.size(), {});
  disease_to_images_.assign(diseases_.size(), {});
  symptom_to_images_.assign(symptoms_.size(), {});

  for (const auto& [img, dis] : image_disease_) {
    if (img >= images_.size()) {
      fail(ErrorKind::Validation, "image-disease edge references missing image node " +
                                      std::to_string(img));
    }
    if (dis >= diseases_.size()) {
      fail(ErrorKind::Validation, describe_image(images_, img) +
                                      " links to missing disease node " + std::to_string(dis));
    }
    if (image_to_disease_[img] != unset) {
      fail(ErrorKind::Validation, describe_image(images_, img) + " has more than one disease edge");
    }
    image_to_disease_[img] = dis;
    disease_to_images_[dis].push_back(img);
  }
  for (const auto& [img, sym] : image_symptom_) {
    if (img >= images_.size()) {
      fail(ErrorKind::Validation, "image-symptom edge references missing image node " +
                                      std::to_string(img));
    }
    if (sym >= symptoms_.size()) {
      fail(ErrorKind::Validation, describe_image(images_, img) +
                                      " links to missing symptom node " + std::to_string(sym));
    }
    image_to_symptoms_[img].push_back(sym);
    symptom_to_images_[sym].push_back(img);
  }
  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (image_to_disease_[i] == unset) {
      fail(ErrorKind::Validation, describe_image(images_, i) + " has no disease edge");
    }
  }
}

bool KnowledgeGraph::contains(NodeId id) const noexcept {
  switch (id.kind) {
    case NodeKind::Disease: return id.index < diseases_.size();
    case NodeKind::Image: return id.index < images_.size();
    case NodeKind::Symptom: return id.index < symptoms_.size();
  }
  return false;
}

std::size_t KnowledgeGraph::disease_of(std::size_t image) const {
  if (image >= images_.size()) fail(ErrorKind::Lookup, "unknown image node " + std::to_string(image));
  return image_to_disease_[image];
}

const std::vector<std::size_t>& KnowledgeGraph::symptoms_of(std::size_t image) const {
  if (image >= images_.size()) fail(ErrorKind::Lookup, "unknown image node " + std::to_string(image));
  return image_to_symptoms_[image];
}

std::vector<NodeId> KnowledgeGraph::neighbors(NodeId id) const {
  if (!contains(id)) fail(ErrorKind::Lookup, "unknown node " + to_string(id));
  std::vector<NodeId> out;
  switch (id.kind) {
    case NodeKind::Image:
      out.push_back({NodeKind::Disease, image_to_disease_[id.index]});
      for (std::size_t s : image_to_symptoms_[id.index]) out.push_back({NodeKind::Symptom, s});
      break;
    case NodeKind::Disease:
      for (std::size_t i : disease_to_images_[id.index]) out.push_back({NodeKind::Image, i});
      break;
    case NodeKind::Symptom:
      for (std::size_t i : symptom_to_images_[id.index]) out.push_back({NodeKind::Image, i});
      break;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool KnowledgeGraph::operator==(const KnowledgeGraph& other) const {
  return diseases_ == other.diseases_ && images_ == other.images_ &&
         symptoms_ == other.symptoms_ && image_disease_ == other.image_disease_ &&
         image_symptom_ == other.image_symptom_;
}

}  // namespace casegraph::store
