#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace casegraph {

// Pretty-printed with a trailing newline; doubles round-trip exactly.
void write_json(const nlohmann::json& document, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace casegraph
