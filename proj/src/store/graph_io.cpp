#include "casegraph/store/graph_io.hpp"

#include <fstream>
#include <sstream>

#include "casegraph/error.hpp"

namespace casegraph::store {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "casegraph-kg";
constexpr int kVersion = 1;

}  // namespace

json graph_to_json(const KnowledgeGraph& g) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  json diseases = json::array();
  for (std::size_t i = 0; i < g.diseases().size(); ++i) {
    json d{{"index", i}, {"name", g.diseases()[i].name}};
    d["text_row"] = g.diseases()[i].text_row ? json(*g.diseases()[i].text_row) : json(nullptr);
    diseases.push_back(d);
  }
  json images = json::array();
  for (std::size_t i = 0; i < g.images().size(); ++i) {
    images.push_back({{"index", i}, {"case_id", g.images()[i].case_id},
                      {"row", g.images()[i].embedding_row}});
  }
  json symptoms = json::array();
  for (std::size_t i = 0; i < g.symptoms().size(); ++i) {
    symptoms.push_back({{"index", i}, {"id", g.symptoms()[i].id}, {"text", g.symptoms()[i].text},
                        {"row", g.symptoms()[i].embedding_row}});
  }
  json image_disease = json::array();
  for (const auto& [img, dis] : g.image_disease_edges()) image_disease.push_back({img, dis});
  json image_symptom = json::array();
  for (const auto& [img, sym] : g.image_symptom_edges()) image_symptom.push_back({img, sym});
  doc["diseases"] = diseases;
  doc["images"] = images;
  doc["symptoms"] = symptoms;
  doc["edges"] = {{"image_disease", image_disease}, {"image_symptom", image_symptom}};
  doc["counts"] = {{"entities", g.entity_count()}, {"edges", g.edge_count()}};
  return doc;
}

KnowledgeGraph graph_from_json(const json& doc) {
  std::vector<DiseaseNode> diseases;
  std::vector<ImageNode> images;
  std::vector<SymptomNode> symptoms;
  std::vector<Edge> image_disease;
  std::vector<Edge> image_symptom;
  try {
    if (!doc.is_object() || doc.value("format", std::string{}) != kFormat) {
      fail(ErrorKind::Parse, "not a casegraph-kg document");
    }
    if (doc.at("version").get<int>() != kVersion) {
      fail(ErrorKind::Parse, "unsupported kg version " + doc.at("version").dump());
    }
    auto expect_index = [](const json& node, std::size_t position, const char* kind) {
      const auto index = node.at("index").get<std::size_t>();
      if (index != position) {
        fail(ErrorKind::Validation, std::string(kind) + " node at position " +
                                        std::to_string(position) + " carries index " +
                                        std::to_string(index));
      }
    };
    for (const auto& d : doc.at("diseases")) {
      expect_index(d, diseases.size(), "disease");
      DiseaseNode node{d.at("name").get<std::string>(), std::nullopt};
      if (d.contains("text_row") && !d.at("text_row").is_null()) {
        node.text_row = d.at("text_row").get<std::size_t>();
      }
      diseases.push_back(std::move(node));
    }
    for (const auto& i : doc.at("images")) {
      expect_index(i, images.size(), "image");
      images.push_back({i.at("case_id").get<std::string>(), i.at("row").get<std::size_t>()});
    }
    for (const auto& s : doc.at("symptoms")) {
      expect_index(s, symptoms.size(), "symptom");
      symptoms.push_back({s.at("id").get<std::string>(), s.value("text", std::string{}),
                          s.at("row").get<std::size_t>()});
    }
    const auto& edges = doc.at("edges");
    for (const auto& e : edges.at("image_disease")) {
      image_disease.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    }
    for (const auto& e : edges.at("image_symptom")) {
      image_symptom.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed kg document: ") + e.what());
  }
  KnowledgeGraph graph(std::move(diseases), std::move(images), std::move(symptoms),
                       std::move(image_disease), std::move(image_symptom));
  if (doc.contains("counts")) {
    const auto& counts = doc.at("counts");
    if (counts.value("entities", graph.entity_count()) != graph.entity_count() ||
        counts.value("edges", graph.edge_count()) != graph.edge_count()) {
      fail(ErrorKind::Validation, "kg counts block disagrees with stored nodes and edges");
    }
  }
  return graph;
}

std::string serialize_graph(const KnowledgeGraph& graph) { return graph_to_json(graph).dump(2) + "\n"; }

KnowledgeGraph parse_graph(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, "kg parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return graph_from_json(doc);
}

void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << serialize_graph(graph);
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

KnowledgeGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open kg file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_graph(buffer.str());
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace casegraph::store
