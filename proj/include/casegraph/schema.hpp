#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace casegraph {

// Validates against the JSON Schema keywords the shipped schemas use: type,
// properties, required, additionalProperties (boolean), items, minItems,
// maxItems, minimum, maximum, enum, const and local "#/$defs/..." refs.
// Returns one message per violation, each prefixed with a JSON pointer.
std::vector<std::string> schema_violations(const nlohmann::json& document, const nlohmann::json& schema);

// Throws a validation error listing the first violations.
void validate_document(const nlohmann::json& document, const nlohmann::json& schema, std::string_view what);

// Shipped schemas, by file stem: "evidence_report", "prediction",
// "eval_report", "train_summary", "sweep", "ablation", "synth".
const nlohmann::json& shipped_schema(std::string_view name);

}  // namespace casegraph
