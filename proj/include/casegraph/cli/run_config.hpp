#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "casegraph/experiment/config.hpp"

namespace casegraph::cli {

struct RunPaths {
  std::string manifest;
  std::string image_embeddings;  // empty: taken from the manifest
  std::string text_embeddings;   // empty: taken from the manifest
  std::string kg;
  std::string cache;
  std::string checkpoint;
  std::string output_dir = "out";

  bool operator==(const RunPaths&) const = default;
};

struct RunConfig {
  RunPaths paths;
  experiment::ExperimentConfig experiment;

  bool operator==(const RunConfig&) const = default;
};

// One configuration key. Names are unique across sections, so each key also
// serves as a command-line flag (`--` plus the name with '_' as '-').
struct ConfigKey {
  std::string section;
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;  // throws ErrorKind::Parse on a bad value
};

const std::vector<ConfigKey>& config_keys();
std::string flag_name(const ConfigKey& key);

// Grammar, one statement per line:
//   [section]
//   key = value        values may be double-quoted
//   # comment  or  ; comment
// Whitespace around tokens is ignored. Unknown sections and keys are errors.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

// Sets one key by name; ErrorKind::Validation naming the key when unknown.
void set_key(RunConfig& config, const std::string& name, const std::string& value);

// Every key in grammar form with doubles at 17 significant digits, so that
// parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

// Range checks of the experiment settings (ErrorKind::Config).
void validate_config(const RunConfig& config);

}  // namespace casegraph::cli
