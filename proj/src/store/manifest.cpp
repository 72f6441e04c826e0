#include "casegraph/store/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "casegraph/error.hpp"
#include "casegraph/numerics/random.hpp"

namespace casegraph::store {

using nlohmann::json;

std::optional<std::size_t> DatasetManifest::class_index(const std::string& name) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].name == name) return i;
  }
  return std::nullopt;
}

void validate_manifest(const DatasetManifest& m) {
  if (m.classes.empty()) fail(ErrorKind::Manifest, "manifest declares no classes");
  if (m.images.empty()) fail(ErrorKind::Manifest, "manifest declares no image records");
  std::set<std::string> class_names;
  for (const auto& c : m.classes) {
    if (!class_names.insert(c.name).second) {
      fail(ErrorKind::Manifest, "duplicate class name '" + c.name + "'");
    }
  }
  std::set<std::string> symptom_ids;
  for (const auto& s : m.symptoms) {
    if (!symptom_ids.insert(s.id).second) {
      fail(ErrorKind::Manifest, "duplicate symptom id '" + s.id + "'");
    }
  }
  std::set<std::string> image_ids;
  for (const auto& img : m.images) {
    if (!image_ids.insert(img.id).second) {
      fail(ErrorKind::Manifest, "duplicate image id '" + img.id + "'");
    }
    if (!class_names.count(img.class_name)) {
      fail(ErrorKind::Manifest, "image '" + img.id + "' references unknown class '" +
                                    img.class_name + "'");
    }
    std::set<std::string> seen;
    for (const auto& s : img.symptoms) {
      if (!symptom_ids.count(s)) {
        fail(ErrorKind::Manifest, "image '" + img.id + "' references unknown symptom '" + s + "'");
      }
      if (!seen.insert(s).second) {
        fail(ErrorKind::Manifest, "image '" + img.id + "' lists symptom '" + s + "' twice");
      }
    }
  }
}

json manifest_to_json(const DatasetManifest& m) {
  json doc;
  doc["format"] = "casegraph-manifest";
  doc["version"] = 1;
  json classes = json::array();
  for (const auto& c : m.classes) {
    json entry{{"name", c.name}};
    if (c.text_row) entry["text_row"] = *c.text_row;
    classes.push_back(entry);
  }
  doc["classes"] = classes;
  json symptoms = json::array();
  for (const auto& s : m.symptoms) symptoms.push_back({{"id", s.id}, {"text", s.text}, {"row", s.row}});
  doc["symptoms"] = symptoms;
  json images = json::array();
  for (const auto& img : m.images) {
    images.push_back({{"id", img.id},
                      {"class", img.class_name},
                      {"symptoms", img.symptoms},
                      {"row", img.row},
                      {"split", img.split}});
  }
  doc["images"] = images;
  if (!m.image_embeddings.empty()) doc["image_embeddings"] = m.image_embeddings;
  if (!m.text_embeddings.empty()) doc["text_embeddings"] = m.text_embeddings;
  if (m.image_dim) doc["image_dim"] = *m.image_dim;
  if (m.text_dim) doc["text_dim"] = *m.text_dim;
  if (m.declared_entities) doc["declared_entities"] = *m.declared_entities;
  if (m.declared_edges) doc["declared_edges"] = *m.declared_edges;
  return doc;
}

DatasetManifest manifest_from_json(const json& doc) {
  DatasetManifest m;
  try {
    if (!doc.is_object()) fail(ErrorKind::Manifest, "manifest root must be an object");
    for (const auto& c : doc.value("classes", json::array())) {
      ClassRecord record;
      if (c.is_string()) {
        record.name = c.get<std::string>();
      } else {
        record.name = c.at("name").get<std::string>();
        if (c.contains("text_row")) record.text_row = c.at("text_row").get<std::size_t>();
      }
      m.classes.push_back(std::move(record));
    }
    for (const auto& s : doc.value("symptoms", json::array())) {
      m.symptoms.push_back({s.at("id").get<std::string>(), s.value("text", std::string{}),
                            s.at("row").get<std::size_t>()});
    }
    for (const auto& img : doc.value("images", json::array())) {
      ImageRecord record;
      record.id = img.at("id").get<std::string>();
      record.class_name = img.at("class").get<std::string>();
      record.symptoms = img.value("symptoms", std::vector<std::string>{});
      record.row = img.at("row").get<std::size_t>();
      record.split = img.value("split", std::string("train"));
      m.images.push_back(std::move(record));
    }
    m.image_embeddings = doc.value("image_embeddings", std::string{});
    m.text_embeddings = doc.value("text_embeddings", std::string{});
    if (doc.contains("image_dim")) m.image_dim = doc.at("image_dim").get<std::size_t>();
    if (doc.contains("text_dim")) m.text_dim = doc.at("text_dim").get<std::size_t>();
    if (doc.contains("declared_entities")) m.declared_entities = doc.at("declared_entities").get<std::size_t>();
    if (doc.contains("declared_edges")) m.declared_edges = doc.at("declared_edges").get<std::size_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Manifest, std::string("malformed manifest: ") + e.what());
  }
  validate_manifest(m);
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return manifest_from_json(doc);
}

DatasetManifest filter_split(const DatasetManifest& manifest, const std::string& split) {
  DatasetManifest out = manifest;
  out.images.clear();
  for (const auto& img : manifest.images) {
    if (img.split == split) out.images.push_back(img);
  }
  return out;
}

KnowledgeGraph build_graph(const DatasetManifest& m) {
  validate_manifest(m);
  std::vector<DiseaseNode> diseases;
  for (const auto& c : m.classes) diseases.push_back({c.name, c.text_row});
  std::vector<SymptomNode> symptoms;
  std::map<std::string, std::size_t> symptom_index;
  for (const auto& s : m.symptoms) {
    symptom_index[s.id] = symptoms.size();
    symptoms.push_back({s.id, s.text, s.row});
  }
  std::vector<ImageNode> images;
  std::vector<Edge> image_disease;
  std::vector<Edge> image_symptom;
  for (const auto& img : m.images) {
    const std::size_t index = images.size();
    images.push_back({img.id, img.row});
    image_disease.emplace_back(index, *m.class_index(img.class_name));
    for (const auto& s : img.symptoms) image_symptom.emplace_back(index, symptom_index.at(s));
  }
  KnowledgeGraph graph(std::move(diseases), std::move(images), std::move(symptoms),
                       std::move(image_disease), std::move(image_symptom));
  if (m.declared_entities && *m.declared_entities != graph.entity_count()) {
    fail(ErrorKind::Validation, "declared_entities=" + std::to_string(*m.declared_entities) +
                                    " but constructed graph has " +
                                    std::to_string(graph.entity_count()) + " entities");
  }
  if (m.declared_edges && *m.declared_edges != graph.edge_count()) {
    fail(ErrorKind::Validation, "declared_edges=" + std::to_string(*m.declared_edges) +
                                    " but constructed graph has " +
                                    std::to_string(graph.edge_count()) + " edges");
  }
  return graph;
}

Selection select_representatives(const DatasetManifest& manifest,
                                 const EmbeddingMatrix& image_embeddings,
                                 std::size_t per_class_budget, SelectionStrategy strategy,
                                 std::uint64_t seed) {
  if (per_class_budget == 0) fail(ErrorKind::Config, "per-class budget must be at least 1");
  validate_manifest(manifest);
  Selection result;
  std::vector<std::vector<std::size_t>> members(manifest.classes.size());
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    members[*manifest.class_index(manifest.images[i].class_name)].push_back(i);
  }
  std::vector<bool> keep(manifest.images.size(), false);
  numerics::Rng rng(seed, "representatives");
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& idx = members[c];
    if (idx.size() <= per_class_budget) {
      if (idx.size() < per_class_budget) {
        result.warnings.push_back("class '" + manifest.classes[c].name + "' has " +
                                  std::to_string(idx.size()) + " images, fewer than budget " +
                                  std::to_string(per_class_budget) + "; keeping all");
      }
      for (std::size_t i : idx) keep[i] = true;
      continue;
    }
    if (strategy == SelectionStrategy::Random) {
      rng.shuffle(idx);
      for (std::size_t j = 0; j < per_class_budget; ++j) keep[idx[j]] = true;
      continue;
    }
    const std::size_t dim = image_embeddings.dim();
    std::vector<std::vector<double>> unit;
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i : idx) {
      const auto row = image_embeddings.row(manifest.images[i].row);
      double sq = 0.0;
      for (double v : row) sq += v * v;
      const double norm = std::sqrt(sq);
      std::vector<double> u(row.begin(), row.end());
      if (norm > 0.0) for (double& v : u) v /= norm;
      for (std::size_t d = 0; d < dim; ++d) centroid[d] += u[d];
      unit.push_back(std::move(u));
    }
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += unit[j][d] * centroid[d];
      scored.emplace_back(-s, idx[j]);
    }
    std::sort(scored.begin(), scored.end());
    for (std::size_t j = 0; j < per_class_budget; ++j) keep[scored[j].second] = true;
  }
  result.manifest = manifest;
  result.manifest.images.clear();
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    if (keep[i]) result.manifest.images.push_back(manifest.images[i]);
  }
  if (result.manifest.images.size() != manifest.images.size()) {
    // declarations describe the unfiltered manifest
    result.manifest.declared_entities.reset();
    result.manifest.declared_edges.reset();
  }
  return result;
}

void link_embeddings(const KnowledgeGraph& graph, const EmbeddingMatrix& image_embeddings,
                     const EmbeddingMatrix& text_embeddings,
                     std::optional<std::size_t> expected_image_dim,
                     std::optional<std::size_t> expected_text_dim) {
  if (expected_image_dim && *expected_image_dim != image_embeddings.dim()) {
    fail(ErrorKind::Validation, "image embedding dim " + std::to_string(image_embeddings.dim()) +
                                    " does not match expected " + std::to_string(*expected_image_dim));
  }
  if (expected_text_dim && *expected_text_dim != text_embeddings.dim()) {
    fail(ErrorKind::Validation, "text embedding dim " + std::to_string(text_embeddings.dim()) +
                                    " does not match expected " + std::to_string(*expected_text_dim));
  }
  for (std::size_t i = 0; i < graph.images().size(); ++i) {
    if (graph.images()[i].embedding_row >= image_embeddings.rows()) {
      fail(ErrorKind::Validation, "image node " + std::to_string(i) + " (case '" +
                                      graph.images()[i].case_id + "') references missing row " +
                                      std::to_string(graph.images()[i].embedding_row));
    }
  }
  for (std::size_t i = 0; i < graph.symptoms().size(); ++i) {
    if (graph.symptoms()[i].embedding_row >= text_embeddings.rows()) {
      fail(ErrorKind::Validation, "symptom node " + std::to_string(i) + " ('" +
                                      graph.symptoms()[i].id + "') references missing row " +
                                      std::to_string(graph.symptoms()[i].embedding_row));
    }
  }
  for (std::size_t i = 0; i < graph.diseases().size(); ++i) {
    const auto& row = graph.diseases()[i].text_row;
    if (row && *row >= text_embeddings.rows()) {
      fail(ErrorKind::Validation, "disease node " + std::to_string(i) + " ('" +
                                      graph.diseases()[i].name + "') references missing row " +
                                      std::to_string(*row));
    }
  }
}

}  // namespace casegraph::store
