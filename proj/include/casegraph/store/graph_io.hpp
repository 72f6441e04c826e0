#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "casegraph/store/graph.hpp"

namespace casegraph::store {

// KG file: UTF-8 JSON, see docs/formats.md. Loading re-validates every graph
// invariant; malformed text raises ErrorKind::Parse with the byte offset.
nlohmann::json graph_to_json(const KnowledgeGraph& graph);
KnowledgeGraph graph_from_json(const nlohmann::json& doc);

std::string serialize_graph(const KnowledgeGraph& graph);
KnowledgeGraph parse_graph(const std::string& text);

void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path);
KnowledgeGraph load_graph(const std::filesystem::path& path);

}  // namespace casegraph::store
