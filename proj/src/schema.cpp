#include "casegraph/schema.hpp"

#include <cmath>
#include <map>

#include "casegraph/error.hpp"

namespace casegraph {

using nlohmann::json;

namespace {

struct Entry {
  const char* name;
  const char* text;
};

// generated from schemas/*.schema.json at configure time
constexpr Entry kShipped[] = {
#include "casegraph/shipped_schemas.inc"
};

bool has_type(const json& doc, const std::string& type) {
  if (type == "object") return doc.is_object();
  if (type == "array") return doc.is_array();
  if (type == "string") return doc.is_string();
  if (type == "boolean") return doc.is_boolean();
  if (type == "null") return doc.is_null();
  if (type == "number") return doc.is_number();
  if (type == "integer") {
    if (doc.is_number_integer()) return true;
    return doc.is_number_float() && std::floor(doc.get<double>()) == doc.get<double>();
  }
  return false;
}

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void check(const json& doc, const json& schema, const std::string& at) {
    if (schema.is_boolean()) {
      if (!schema.get<bool>()) report(at, "no value is allowed here");
      return;
    }
    if (schema.contains("$ref")) {
      check(doc, resolve(schema.at("$ref").get<std::string>()), at);
      return;
    }
    if (schema.contains("type")) {
      const json& t = schema.at("type");
      bool ok = false;
      if (t.is_string()) {
        ok = has_type(doc, t.get<std::string>());
      } else {
        for (const auto& each : t) ok = ok || has_type(doc, each.get<std::string>());
      }
      if (!ok) {
        report(at, "expected type " + t.dump() + ", got " + doc.type_name());
        return;
      }
    }
    if (schema.contains("const") && doc != schema.at("const")) {
      report(at, "expected constant " + schema.at("const").dump());
    }
    if (schema.contains("enum")) {
      bool found = false;
      for (const auto& option : schema.at("enum")) found = found || option == doc;
      if (!found) report(at, "value " + doc.dump() + " is not one of " + schema.at("enum").dump());
    }
    if (doc.is_number()) {
      const double v = doc.get<double>();
      if (schema.contains("minimum") && v < schema.at("minimum").get<double>()) {
        report(at, "value " + doc.dump() + " is below minimum " + schema.at("minimum").dump());
      }
      if (schema.contains("maximum") && v > schema.at("maximum").get<double>()) {
        report(at, "value " + doc.dump() + " is above maximum " + schema.at("maximum").dump());
      }
    }
    if (doc.is_array()) {
      if (schema.contains("minItems") && doc.size() < schema.at("minItems").get<std::size_t>()) {
        report(at, "array has fewer than " + schema.at("minItems").dump() + " items");
      }
      if (schema.contains("maxItems") && doc.size() > schema.at("maxItems").get<std::size_t>()) {
        report(at, "array has more than " + schema.at("maxItems").dump() + " items");
      }
      if (schema.contains("items")) {
        for (std::size_t i = 0; i < doc.size(); ++i) check(doc[i], schema.at("items"), at + "/" + std::to_string(i));
      }
    }
    if (doc.is_object()) {
      if (schema.contains("required")) {
        for (const auto& key : schema.at("required")) {
          if (!doc.contains(key.get<std::string>())) report(at, "missing required property " + key.dump());
        }
      }
      const json empty = json::object();
      const json& props = schema.contains("properties") ? schema.at("properties") : empty;
      for (const auto& [key, value] : doc.items()) {
        if (props.contains(key)) {
          check(value, props.at(key), at + "/" + key);
        } else if (schema.contains("additionalProperties")) {
          check(value, schema.at("additionalProperties"), at + "/" + key);
        }
      }
    }
  }

  std::vector<std::string> take() { return std::move(messages_); }

 private:
  const json& resolve(const std::string& ref) {
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) fail(ErrorKind::Validation, "unsupported schema reference " + ref);
    const std::string name = ref.substr(prefix.size());
    if (!root_.contains("$defs") || !root_.at("$defs").contains(name)) {
      fail(ErrorKind::Validation, "unresolved schema reference " + ref);
    }
    return root_.at("$defs").at(name);
  }

  void report(const std::string& at, const std::string& message) {
    messages_.push_back((at.empty() ? "/" : at) + ": " + message);
  }

  const json& root_;
  std::vector<std::string> messages_;
};

}  // namespace

std::vector<std::string> schema_violations(const json& document, const json& schema) {
  Validator v(schema);
  v.check(document, schema, "");
  return v.take();
}

void validate_document(const json& document, const json& schema, std::string_view what) {
  const auto problems = schema_violations(document, schema);
  if (problems.empty()) return;
  std::string message = std::string(what) + " does not match its schema:";
  for (std::size_t i = 0; i < problems.size() && i < 5; ++i) message += "\n  " + problems[i];
  if (problems.size() > 5) message += "\n  (" + std::to_string(problems.size() - 5) + " more)";
  fail(ErrorKind::Validation, message);
}

const json& shipped_schema(std::string_view name) {
  static const std::map<std::string, json, std::less<>> parsed = [] {
    std::map<std::string, json, std::less<>> m;
    for (const auto& entry : kShipped) m.emplace(entry.name, json::parse(entry.text));
    return m;
  }();
  const auto it = parsed.find(name);
  if (it == parsed.end()) fail(ErrorKind::Lookup, "no shipped schema named '" + std::string(name) + "'");
  return it->second;
}

}  // namespace casegraph
