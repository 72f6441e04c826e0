#include "casegraph/cli/run_config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <set>

#include "casegraph/error.hpp"
#include "casegraph/io.hpp"
#include "casegraph/model/params.hpp"

namespace casegraph::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc{} || ptr != end) fail(ErrorKind::Parse, "expected a nonnegative integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc{} || ptr != end) fail(ErrorKind::Parse, "expected a nonnegative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  if (v.empty()) fail(ErrorKind::Parse, "expected a number, got an empty value");
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || errno == ERANGE) fail(ErrorKind::Parse, "expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorKind::Parse, "expected true or false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// Strips a trailing comment outside quotes and unquotes the value.
std::string parse_value(const std::string& raw) {
  std::string v = trim(raw);
  if (!v.empty() && v.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < v.size() && v[i] != '"'; ++i) {
      if (v[i] == '\\' && i + 1 < v.size()) ++i;
      out += v[i];
    }
    if (i >= v.size()) fail(ErrorKind::Parse, "unterminated quoted value");
    const std::string rest = trim(v.substr(i + 1));
    if (!rest.empty() && rest.front() != '#' && rest.front() != ';') {
      fail(ErrorKind::Parse, "unexpected text after quoted value");
    }
    return out;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if ((v[i] == '#' || v[i] == ';') && (i == 0 || v[i - 1] == ' ' || v[i - 1] == '\t')) return trim(v.substr(0, i));
  }
  return v;
}

using experiment::ExperimentConfig;

template <class Field>
ConfigKey size_key(std::string section, std::string name, Field field) {
  return {std::move(section), std::move(name), [field](const RunConfig& c) { return std::to_string(field(c)); },
          [field](RunConfig& c, const std::string& v) { field(c) = parse_size(v); }};
}

template <class Field>
ConfigKey double_key(std::string section, std::string name, Field field) {
  return {std::move(section), std::move(name), [field](const RunConfig& c) { return fmt_double(field(c)); },
          [field](RunConfig& c, const std::string& v) { field(c) = parse_double(v); }};
}

template <class Field>
ConfigKey bool_key(std::string section, std::string name, Field field) {
  return {std::move(section), std::move(name),
          [field](const RunConfig& c) { return std::string(field(c) ? "true" : "false"); },
          [field](RunConfig& c, const std::string& v) { field(c) = parse_bool(v); }};
}

template <class Field>
ConfigKey path_key(std::string name, Field field) {
  return {"paths", std::move(name), [field](const RunConfig& c) { return quote(field(c)); },
          [field](RunConfig& c, const std::string& v) { field(c) = v; }};
}

std::vector<ConfigKey> make_keys() {
  std::vector<ConfigKey> k;
  k.push_back(path_key("manifest", [](auto& c) -> auto& { return c.paths.manifest; }));
  k.push_back(path_key("image_embeddings", [](auto& c) -> auto& { return c.paths.image_embeddings; }));
  k.push_back(path_key("text_embeddings", [](auto& c) -> auto& { return c.paths.text_embeddings; }));
  k.push_back(path_key("kg", [](auto& c) -> auto& { return c.paths.kg; }));
  k.push_back(path_key("cache", [](auto& c) -> auto& { return c.paths.cache; }));
  k.push_back(path_key("checkpoint", [](auto& c) -> auto& { return c.paths.checkpoint; }));
  k.push_back(path_key("output_dir", [](auto& c) -> auto& { return c.paths.output_dir; }));

  k.push_back(size_key("model", "hidden_dim", [](auto& c) -> auto& { return c.experiment.model.hidden_dim; }));
  k.push_back(size_key("model", "gat_layers", [](auto& c) -> auto& { return c.experiment.model.gat_layers; }));
  k.push_back(size_key("model", "gat_heads", [](auto& c) -> auto& { return c.experiment.model.gat_heads; }));
  k.push_back(size_key("model", "xmodal_layers", [](auto& c) -> auto& { return c.experiment.model.xmodal_layers; }));
  k.push_back(size_key("model", "xmodal_heads", [](auto& c) -> auto& { return c.experiment.model.xmodal_heads; }));
  k.push_back(size_key("model", "num_classes", [](auto& c) -> auto& { return c.experiment.model.num_classes; }));
  k.push_back(size_key("model", "image_in_dim", [](auto& c) -> auto& { return c.experiment.model.image_in_dim; }));
  k.push_back(size_key("model", "text_in_dim", [](auto& c) -> auto& { return c.experiment.model.text_in_dim; }));
  k.push_back(double_key("model", "attn_dropout", [](auto& c) -> auto& { return c.experiment.model.attn_dropout; }));
  k.push_back(double_key("model", "mlp_dropout", [](auto& c) -> auto& { return c.experiment.model.mlp_dropout; }));
  k.push_back(double_key("model", "leaky_slope", [](auto& c) -> auto& { return c.experiment.model.leaky_slope; }));
  k.push_back(double_key("model", "layer_norm_eps", [](auto& c) -> auto& { return c.experiment.model.layer_norm_eps; }));
  k.push_back({"model", "node_activation",
               [](const RunConfig& c) { return model::activation_name(c.experiment.model.node_activation); },
               [](RunConfig& c, const std::string& v) {
                 try {
                   c.experiment.model.node_activation = model::activation_from_name(v);
                 } catch (const Error& e) {
                   fail(ErrorKind::Parse, e.what());
                 }
               }});
  k.push_back(bool_key("model", "knowledge_propagation",
                       [](auto& c) -> auto& { return c.experiment.model.knowledge_propagation; }));

  k.push_back(size_key("retrieval", "k", [](auto& c) -> auto& { return c.experiment.retrieval.k; }));
  k.push_back(double_key("retrieval", "u_th", [](auto& c) -> auto& { return c.experiment.retrieval.u_th; }));
  k.push_back(size_key("retrieval", "min_keep", [](auto& c) -> auto& { return c.experiment.retrieval.min_keep; }));
  k.push_back(double_key("retrieval", "sim_floor", [](auto& c) -> auto& { return c.experiment.retrieval.sim_floor; }));
  k.push_back(bool_key("retrieval", "include_self", [](auto& c) -> auto& { return c.experiment.retrieval.include_self; }));

  k.push_back(double_key("cdr", "alpha", [](auto& c) -> auto& { return c.experiment.cdr.alpha; }));
  k.push_back(double_key("cdr", "beta", [](auto& c) -> auto& { return c.experiment.cdr.beta; }));
  k.push_back(double_key("cdr", "lambda", [](auto& c) -> auto& { return c.experiment.cdr.lambda; }));

  k.push_back(size_key("train", "batch_size", [](auto& c) -> auto& { return c.experiment.train.batch_size; }));
  k.push_back(size_key("train", "max_epochs", [](auto& c) -> auto& { return c.experiment.train.max_epochs; }));
  k.push_back(double_key("train", "lr", [](auto& c) -> auto& { return c.experiment.train.lr; }));
  k.push_back(double_key("train", "weight_decay", [](auto& c) -> auto& { return c.experiment.train.weight_decay; }));
  k.push_back(size_key("train", "step_size", [](auto& c) -> auto& { return c.experiment.train.step_size; }));
  k.push_back(double_key("train", "gamma", [](auto& c) -> auto& { return c.experiment.train.gamma; }));
  k.push_back(size_key("train", "patience", [](auto& c) -> auto& { return c.experiment.train.patience; }));
  k.push_back(double_key("train", "clip_norm", [](auto& c) -> auto& { return c.experiment.train.clip_norm; }));
  k.push_back(size_key("train", "eval_batch", [](auto& c) -> auto& { return c.experiment.train.eval_batch; }));

  k.push_back({"experiment", "seed", [](const RunConfig& c) { return std::to_string(c.experiment.seed); },
               [](RunConfig& c, const std::string& v) { c.experiment.seed = parse_u64(v); }});
  k.push_back(size_key("experiment", "kg_budget", [](auto& c) -> auto& { return c.experiment.kg_budget; }));
  k.push_back({"experiment", "selection",
               [](const RunConfig& c) {
                 return std::string(c.experiment.selection == store::SelectionStrategy::Medoid ? "medoid" : "random");
               },
               [](RunConfig& c, const std::string& v) {
                 if (v == "medoid") {
                   c.experiment.selection = store::SelectionStrategy::Medoid;
                 } else if (v == "random") {
                   c.experiment.selection = store::SelectionStrategy::Random;
                 } else {
                   fail(ErrorKind::Parse, "expected medoid or random, got '" + v + "'");
                 }
               }});
  k.push_back({"experiment", "ablation", [](const RunConfig& c) { return experiment::to_string(c.experiment.ablation.kind); },
               [](RunConfig& c, const std::string& v) {
                 try {
                   c.experiment.ablation.kind = experiment::ablation_from_string(v);
                 } catch (const Error& e) {
                   fail(ErrorKind::Parse, e.what());
                 }
               }});
  k.push_back(double_key("experiment", "drop_fraction",
                         [](auto& c) -> auto& { return c.experiment.ablation.drop_fraction; }));
  k.push_back(size_key("experiment", "jobs", [](auto& c) -> auto& { return c.experiment.jobs; }));
  return k;
}

const ConfigKey* find_key(const std::string& name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

std::string flag_name(const ConfigKey& key) {
  std::string out = key.name;
  for (char& c : out) {
    if (c == '_') c = '-';
  }
  return out;
}

void set_key(RunConfig& config, const std::string& name, const std::string& value) {
  const ConfigKey* key = find_key(name);
  if (key == nullptr) fail(ErrorKind::Validation, "unknown config key '" + name + "'");
  try {
    key->set(config, value);
  } catch (const Error& e) {
    fail(e.kind(), "key '" + name + "': " + e.what());
  }
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig config;
  std::set<std::string> sections;
  for (const auto& k : config_keys()) sections.insert(k.section);
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string raw = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      const auto close = line.find(']');
      const std::string rest = close == std::string::npos ? std::string{} : trim(line.substr(close + 1));
      if (close == std::string::npos || (!rest.empty() && rest.front() != '#' && rest.front() != ';')) {
        fail(ErrorKind::Parse, where + "malformed section header");
      }
      section = trim(line.substr(1, close - 1));
      if (!sections.count(section)) fail(ErrorKind::Validation, where + "unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Parse, where + "expected 'key = value'");
    const std::string name = trim(line.substr(0, eq));
    if (name.empty()) fail(ErrorKind::Parse, where + "missing key before '='");
    const ConfigKey* key = find_key(name);
    if (key == nullptr) fail(ErrorKind::Validation, where + "unknown config key '" + name + "'");
    if (!section.empty() && key->section != section) {
      fail(ErrorKind::Validation, where + "key '" + name + "' belongs to section [" + key->section + "], not [" +
                                      section + "]");
    }
    try {
      key->set(config, parse_value(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.kind(), where + "key '" + name + "': " + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_text(path), path.string()); }

std::string emit_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      if (!out.empty()) out += "\n";
      out += "[" + k.section + "]\n";
      section = k.section;
    }
    out += k.name + " = " + k.get(config) + "\n";
  }
  return out;
}

void validate_config(const RunConfig& config) { config.experiment.validate(); }

}  // namespace casegraph::cli
