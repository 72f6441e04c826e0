#include "casegraph/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "casegraph/cdr/report.hpp"
#include "casegraph/cli/run_config.hpp"
#include "casegraph/experiment/pipeline.hpp"
#include "casegraph/experiment/synthetic.hpp"
#include "casegraph/io.hpp"
#include "casegraph/schema.hpp"
#include "casegraph/store/graph_io.hpp"
#include "casegraph/version.hpp"

namespace casegraph::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using experiment::ExperimentConfig;
using experiment::Workspace;

struct Invocation {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;  // command-line order
  std::string split = "test";
  std::string query;
  std::string query_embedding;
  std::size_t query_row = 0;
  std::string modes = "full,no_cdr,no_kpi_cdr,no_kg_kpi_cdr";
  std::string parameter = "lambda";
  std::string grid;
  experiment::SyntheticConfig synth;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + fmt("%.6f", values[i]);
  return out + "]";
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

RunConfig resolve_run(const Invocation& inv) {
  RunConfig run;
  if (!inv.config_path.empty()) {
    if (!fs::exists(inv.config_path)) fail(ErrorKind::Validation, "config file does not exist: " + inv.config_path);
    run = load_config(inv.config_path);
  }
  for (const auto& [name, value] : inv.overrides) set_key(run, name, value);
  validate_config(run);
  const std::pair<const char*, const std::string*> inputs[] = {
      {"manifest", &run.paths.manifest}, {"image_embeddings", &run.paths.image_embeddings},
      {"text_embeddings", &run.paths.text_embeddings}, {"kg", &run.paths.kg},
      {"cache", &run.paths.cache}, {"checkpoint", &run.paths.checkpoint}};
  for (const auto& [key, path] : inputs) {
    if (!path->empty() && !fs::exists(*path)) {
      fail(ErrorKind::Validation, std::string("input path for '") + key + "' does not exist: " + *path);
    }
  }
  if (run.paths.output_dir.empty()) fail(ErrorKind::Validation, "output_dir must not be empty");
  return run;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) fail(ErrorKind::Usage, std::string("--") + flag + " is required for this command");
}

fs::path output_dir(const RunConfig& run) {
  const fs::path dir = run.paths.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create output dir " + dir.string() + ": " + ec.message());
  return dir;
}

json provenance(const json& config, std::uint64_t seed) {
  return json{{"code_version", std::string(kCodeVersion)}, {"seed", seed}, {"config", config}};
}

void write_run_manifest(const RunConfig& run, const fs::path& dir) {
  write_text("# casegraph run manifest; reload with --config\n# code_version = " + std::string(kCodeVersion) + "\n\n" +
                 emit_config(run),
             dir / "run_manifest.ini");
}

void write_validated(const json& doc, const std::string& schema, const fs::path& path) {
  validate_document(doc, shipped_schema(schema), schema);
  write_json(doc, path);
}

struct Dataset {
  store::DatasetManifest manifest;
  store::EmbeddingMatrix image;
  store::EmbeddingMatrix text;
};

std::optional<fs::path> embedding_path(const RunConfig& run, const std::string& override_path,
                                       const std::string& manifest_field) {
  if (!override_path.empty()) return fs::path(override_path);
  if (manifest_field.empty()) return std::nullopt;
  fs::path p = manifest_field;
  if (p.is_relative()) p = fs::path(run.paths.manifest).parent_path() / p;
  return p;
}

fs::path require_embeddings(const RunConfig& run, const std::string& override_path, const std::string& field,
                            const char* what) {
  const auto p = embedding_path(run, override_path, field);
  if (!p) {
    fail(ErrorKind::Validation, std::string("manifest names no ") + what + " embeddings; pass --" + what +
                                    "-embeddings");
  }
  if (!fs::exists(*p)) fail(ErrorKind::Validation, std::string(what) + " embeddings file does not exist: " + p->string());
  return *p;
}

Dataset load_dataset(const RunConfig& run) {
  require(run.paths.manifest, "manifest");
  Dataset d;
  d.manifest = store::load_manifest(run.paths.manifest);
  store::validate_manifest(d.manifest);
  d.image = store::load_normalized_embeddings(
      require_embeddings(run, run.paths.image_embeddings, d.manifest.image_embeddings, "image"));
  d.text = store::load_normalized_embeddings(
      require_embeddings(run, run.paths.text_embeddings, d.manifest.text_embeddings, "text"));
  return d;
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& out) {
  for (const auto& w : warnings) out << "warning: " << w << "\n";
}

std::unique_ptr<Workspace> open_workspace(const RunConfig& run, const Dataset& d, const ExperimentConfig& e,
                                          std::ostream& out) {
  store::KnowledgeGraph graph;
  if (!run.paths.kg.empty()) {
    graph = store::load_graph(run.paths.kg);
  } else {
    auto selection = experiment::select_kg_records(d.manifest, d.image, e);
    print_warnings(selection.warnings, out);
    graph = store::build_graph(selection.manifest);
  }
  std::optional<retrieval::SubgraphCache> cache;
  if (!run.paths.cache.empty()) cache = retrieval::load_subgraph_cache(run.paths.cache);
  return std::make_unique<Workspace>(d.manifest, d.image, d.text, std::move(graph), e.retrieval, std::move(cache));
}

std::string checkpoint_echo(const ExperimentConfig& e) { return json{{"experiment", experiment::experiment_to_json(e)}}.dump(); }

// Inference settings: cdr, retrieval and batching from the run; the KG
// recipe (ablation, budget, selection, seed) and the model from the
// checkpoint, so the graph matches the one trained on.
ExperimentConfig inference_config(const RunConfig& run, const model::Checkpoint& ckpt) {
  ExperimentConfig e = run.experiment;
  try {
    const json echo = json::parse(ckpt.run_echo).at("experiment");
    const auto& ablation = echo.at("ablation");
    e.ablation.kind = experiment::ablation_from_string(ablation.at("mode").get<std::string>());
    e.ablation.drop_fraction = ablation.at("drop_fraction").get<double>();
    e.kg_budget = echo.at("kg").at("budget").get<std::size_t>();
    e.selection = echo.at("kg").at("selection").get<std::string>() == "random" ? store::SelectionStrategy::Random
                                                                               : store::SelectionStrategy::Medoid;
    e.seed = echo.at("seed").get<std::uint64_t>();
  } catch (const json::exception& ex) {
    fail(ErrorKind::Format, std::string("checkpoint carries no usable experiment echo: ") + ex.what());
  }
  e = experiment::effective_config(e);
  e.model = ckpt.params.config();
  return e;
}

// ---- subcommands ----

int cmd_synth(const Invocation& inv, const RunConfig& run, std::ostream& out) {
  experiment::SyntheticConfig cfg = inv.synth;
  cfg.seed = run.experiment.seed;
  const auto ds = experiment::generate_synthetic(cfg);
  const fs::path dir = output_dir(run);
  experiment::write_synthetic(ds, dir);
  const json config{{"classes", cfg.classes},       {"per_class", cfg.per_class},     {"dim", cfg.dim},
                    {"text_dim", cfg.text_dim},     {"symptoms", cfg.symptoms},       {"separation", cfg.separation},
                    {"noise", cfg.noise},           {"symptom_on", cfg.symptom_on},   {"symptom_off", cfg.symptom_off}};
  json doc{{"schema", "casegraph.synth"}, {"schema_version", 1}};
  doc.update(provenance(config, cfg.seed));
  doc["images"] = ds.manifest.images.size();
  write_validated(doc, "synth", dir / "synth.json");
  write_run_manifest(run, dir);
  out << "images=" << ds.manifest.images.size() << " classes=" << ds.manifest.classes.size() << " dir=" << dir.string()
      << "\n";
  return kExitOk;
}

int cmd_build_kg(const Invocation&, const RunConfig& run, std::ostream& out) {
  require(run.paths.manifest, "manifest");
  const auto manifest = store::load_manifest(run.paths.manifest);
  store::validate_manifest(manifest);
  const ExperimentConfig e = experiment::effective_config(run.experiment);
  store::KnowledgeGraph graph;
  // Without image embeddings there is nothing to select by: every record
  // becomes a node.
  if (embedding_path(run, run.paths.image_embeddings, manifest.image_embeddings)) {
    const auto d = load_dataset(run);
    auto selection = experiment::select_kg_records(d.manifest, d.image, e);
    print_warnings(selection.warnings, out);
    graph = store::build_graph(selection.manifest);
    store::link_embeddings(graph, d.image, d.text, manifest.image_dim, manifest.text_dim);
  } else {
    graph = store::build_graph(manifest);
  }
  const fs::path dir = output_dir(run);
  json doc = store::graph_to_json(graph);
  doc["provenance"] = provenance(experiment::experiment_to_json(e), e.seed);
  write_json(doc, dir / "kg.json");
  write_run_manifest(run, dir);
  out << "entities=" << graph.entity_count() << " edges=" << graph.edge_count() << "\n";
  return kExitOk;
}

int cmd_cache(const Invocation&, const RunConfig& run, std::ostream& out) {
  const auto d = load_dataset(run);
  const ExperimentConfig e = experiment::effective_config(run.experiment);
  const auto ws = open_workspace(run, d, e, out);
  const fs::path dir = output_dir(run);
  json doc = retrieval::cache_to_json(ws->cache());
  doc["provenance"] = provenance(experiment::experiment_to_json(e), e.seed);
  write_json(doc, dir / "subgraph_cache.json");
  write_run_manifest(run, dir);
  out << "subgraphs=" << ws->cache().retained.size() << "\n";
  return kExitOk;
}

int cmd_train(const Invocation&, const RunConfig& run, std::ostream& out) {
  const auto d = load_dataset(run);
  ExperimentConfig e = experiment::effective_config(run.experiment);
  const auto ws = open_workspace(run, d, e, out);
  e.model = experiment::resolve_model_config(e.model, *ws);
  const auto result = experiment::train(*ws, e);
  const fs::path dir = output_dir(run);
  const json config = experiment::experiment_to_json(e);
  model::save_checkpoint(result.best, checkpoint_echo(e), dir / "checkpoint.bin");
  write_text("# code_version = " + std::string(kCodeVersion) + "\n# seed = " + std::to_string(e.seed) +
                 "\n# config = " + config.dump() + "\n" + experiment::history_text(result.history),
             dir / "history.txt");
  json epochs = json::array();
  for (const auto& h : result.history) {
    epochs.push_back({{"epoch", h.epoch}, {"lr", h.lr}, {"train_loss", h.train_loss}, {"val_oa", h.val_oa}});
  }
  json doc{{"schema", "casegraph.train_summary"}, {"schema_version", 1}};
  doc.update(provenance(config, e.seed));
  doc["best_epoch"] = result.best_epoch;
  doc["best_val_oa"] = result.best_val_oa;
  doc["epochs"] = epochs;
  write_validated(doc, "train_summary", dir / "train_summary.json");
  write_run_manifest(run, dir);
  out << "epochs=" << result.history.size() << " best_epoch=" << result.best_epoch
      << " val_oa=" << fmt("%.4f", result.best_val_oa) << " checkpoint=" << (dir / "checkpoint.bin").string() << "\n";
  return kExitOk;
}

int cmd_evaluate(const Invocation& inv, const RunConfig& run, std::ostream& out) {
  require(run.paths.checkpoint, "checkpoint");
  const auto ckpt = model::load_checkpoint(run.paths.checkpoint);
  const auto d = load_dataset(run);
  const ExperimentConfig e = inference_config(run, ckpt);
  const auto ws = open_workspace(run, d, e, out);
  const auto report = experiment::evaluate(ckpt.params, *ws, inv.split, e);
  const fs::path dir = output_dir(run);
  write_validated(experiment::eval_report_to_json(report), "eval_report", dir / "eval_report.json");
  write_run_manifest(run, dir);
  print_warnings(report.warnings, out);
  out << "split=" << report.split << " n=" << report.predictions.size() << " oa=" << fmt("%.4f", report.oa)
      << " macro_auc=" << fmt("%.4f", report.macro_auc) << "\n";
  return kExitOk;
}

struct QueryRef {
  std::string id;
  std::vector<double> embedding;
  std::optional<std::size_t> label;
  std::optional<std::size_t> self_image;
};

QueryRef query_ref(const Invocation& inv, const Workspace& ws) {
  if (!inv.query.empty() && !inv.query_embedding.empty()) {
    fail(ErrorKind::Usage, "pass either --query or --query-embedding, not both");
  }
  QueryRef q;
  if (!inv.query.empty()) {
    const auto& images = ws.manifest().images;
    const auto it = std::find_if(images.begin(), images.end(), [&](const auto& r) { return r.id == inv.query; });
    if (it == images.end()) fail(ErrorKind::Lookup, "no manifest record with id '" + inv.query + "'");
    q.id = it->id;
    const auto row = ws.image_embeddings().row(it->row);
    q.embedding.assign(row.begin(), row.end());
    q.label = ws.manifest().class_index(it->class_name);
    for (std::size_t i = 0; i < ws.graph().images().size(); ++i) {
      if (ws.graph().images()[i].case_id == q.id) q.self_image = i;
    }
    return q;
  }
  if (inv.query_embedding.empty()) fail(ErrorKind::Usage, "pass --query <record id> or --query-embedding <file>");
  if (!fs::exists(inv.query_embedding)) {
    fail(ErrorKind::Validation, "query embedding file does not exist: " + inv.query_embedding);
  }
  const auto m = store::load_normalized_embeddings(inv.query_embedding);
  if (inv.query_row >= m.rows()) {
    fail(ErrorKind::Lookup, "query row " + std::to_string(inv.query_row) + " outside a file of " +
                                std::to_string(m.rows()) + " rows");
  }
  q.id = "row-" + std::to_string(inv.query_row);
  const auto row = m.row(inv.query_row);
  q.embedding.assign(row.begin(), row.end());
  return q;
}

int run_prediction(const Invocation& inv, const RunConfig& run, std::ostream& out, bool explain) {
  require(run.paths.checkpoint, "checkpoint");
  const auto ckpt = model::load_checkpoint(run.paths.checkpoint);
  const auto d = load_dataset(run);
  const ExperimentConfig e = inference_config(run, ckpt);
  const auto ws = open_workspace(run, d, e, out);
  const QueryRef q = query_ref(inv, *ws);
  retrieval::RetrievalOutcome outcome;
  model::ForwardTrace trace;
  const auto bundle = experiment::predict_query(ckpt.params, *ws, q.embedding, q.id, q.self_image, e, &outcome,
                                                explain ? &trace : nullptr);
  const auto names = ws->class_names();
  const json config = experiment::experiment_to_json(e);
  const fs::path dir = output_dir(run);
  write_validated(cdr::bundle_to_json(bundle, names, q.id, e.seed, config), "prediction", dir / "prediction.json");
  if (explain) {
    cdr::ReportContext ctx;
    ctx.query_id = q.id;
    ctx.true_label = q.label;
    ctx.class_names = names;
    ctx.graph = &ws->graph();
    ctx.retrieval = &outcome;
    ctx.trace = &trace;
    ctx.u_th = e.retrieval.u_th;
    ctx.seed = e.seed;
    ctx.config = config;
    const json report = cdr::emit_evidence_report(bundle, ctx);
    write_validated(report, "evidence_report", dir / "evidence_report.json");
    write_text(cdr::render_report_html(report), dir / "evidence_report.html");
  }
  write_run_manifest(run, dir);
  out << "query=" << q.id << " label=" << names.at(bundle.label) << " cases=" << bundle.cases.size()
      << " p_final=" << join_doubles(bundle.p_final) << "\n";
  return kExitOk;
}

int cmd_ablate(const Invocation& inv, const RunConfig& run, std::ostream& out) {
  std::vector<experiment::AblationKind> kinds;
  for (const auto& m : split_list(inv.modes)) kinds.push_back(experiment::ablation_from_string(m));
  if (kinds.empty()) fail(ErrorKind::Usage, "--modes names no ablation mode");
  const auto d = load_dataset(run);
  json rows = json::array();
  std::string csv = "mode,oa,macro_auc\n";
  for (const auto kind : kinds) {
    ExperimentConfig c = run.experiment;
    c.ablation.kind = kind;
    const auto outcome = experiment::run_ablation(d.manifest, d.image, d.text, c);
    const std::string mode = experiment::to_string(kind);
    rows.push_back({{"mode", mode},
                    {"oa", outcome.report.oa},
                    {"macro_auc", outcome.report.macro_auc},
                    {"best_epoch", outcome.training.best_epoch},
                    {"report", experiment::eval_report_to_json(outcome.report)}});
    csv += mode + "," + fmt("%.17g", outcome.report.oa) + "," + fmt("%.17g", outcome.report.macro_auc) + "\n";
    out << "mode=" << mode << " oa=" << fmt("%.4f", outcome.report.oa)
        << " macro_auc=" << fmt("%.4f", outcome.report.macro_auc) << "\n";
  }
  const fs::path dir = output_dir(run);
  json doc{{"schema", "casegraph.ablation"}, {"schema_version", 1}};
  doc.update(provenance(experiment::experiment_to_json(run.experiment), run.experiment.seed));
  doc["rows"] = rows;
  write_validated(doc, "ablation", dir / "ablation.json");
  write_text(csv, dir / "ablation.csv");
  write_run_manifest(run, dir);
  return kExitOk;
}

std::vector<double> parse_grid(const Invocation& inv, experiment::SweepParameter parameter) {
  if (inv.grid.empty()) {
    if (parameter == experiment::SweepParameter::GatLayers) return {0, 1, 2, 3};
    std::vector<double> g;
    for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
    return g;
  }
  std::vector<double> out;
  for (const auto& item : split_list(inv.grid)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorKind::Usage, "--grid value '" + item + "' is not a number");
    }
  }
  return out;
}

int cmd_sweep(const Invocation& inv, const RunConfig& run, std::ostream& out) {
  const auto parameter = experiment::sweep_parameter_from_string(inv.parameter);
  const auto grid = parse_grid(inv, parameter);
  const auto d = load_dataset(run);
  const auto rows = experiment::sweep(parameter, grid, d.manifest, d.image, d.text, run.experiment);
  const fs::path dir = output_dir(run);
  write_text(experiment::sweep_csv(parameter, rows), dir / "sweep.csv");
  write_validated(experiment::sweep_to_json(parameter, rows, run.experiment), "sweep", dir / "sweep.json");
  write_run_manifest(run, dir);
  for (const auto& r : rows) {
    out << inv.parameter << "=" << fmt("%g", r.value) << " oa=" << fmt("%.4f", r.report.oa)
        << " macro_auc=" << fmt("%.4f", r.report.macro_auc) << "\n";
  }
  return kExitOk;
}

using Handler = int (*)(const Invocation&, const RunConfig&, std::ostream&);

int cmd_predict(const Invocation& inv, const RunConfig& run, std::ostream& out) {
  return run_prediction(inv, run, out, false);
}
int cmd_explain(const Invocation& inv, const RunConfig& run, std::ostream& out) {
  return run_prediction(inv, run, out, true);
}

void add_config_flags(CLI::App* sub, Invocation& inv) {
  sub->add_option("--config", inv.config_path, "run configuration file (see docs/cli.md for the grammar)");
  for (const auto& key : config_keys()) {
    const std::string name = key.name;
    sub->add_option_function<std::string>(
        "--" + flag_name(key), [&inv, name](const std::string& v) { inv.overrides.emplace_back(name, v); },
        "[" + key.section + "] " + key.name);
  }
}

}  // namespace

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage: return kExitUsage;
    case ErrorKind::Validation:
    case ErrorKind::Config:
    case ErrorKind::Manifest:
    case ErrorKind::Parse: return kExitValidation;
    default: return kExitRuntime;
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Case-aware knowledge graph classification with retrieval and decision refinement", "casegraph"};
  app.require_subcommand(1, 1);
  Invocation inv;
  struct Command {
    const char* name;
    const char* description;
    Handler handler;
  };
  const Command commands[] = {
      {"synth", "write a synthetic dataset (manifest and embeddings)", cmd_synth},
      {"build-kg", "build the knowledge graph file from a manifest", cmd_build_kg},
      {"cache-subgraphs", "precompute per-case retrieval for the refinement pass", cmd_cache},
      {"train", "train a model and write a checkpoint", cmd_train},
      {"evaluate", "OA and macro-AUC report on one split", cmd_evaluate},
      {"predict", "prediction bundle for one query", cmd_predict},
      {"explain", "prediction bundle plus evidence report", cmd_explain},
      {"ablate", "train and test each ablation mode", cmd_ablate},
      {"sweep", "lambda or GAT depth sweep", cmd_sweep},
  };
  std::map<std::string, Handler> handlers;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.description);
    add_config_flags(sub, inv);
    handlers[c.name] = c.handler;
    const std::string name = c.name;
    if (name == "evaluate") sub->add_option("--split", inv.split, "split to evaluate")->capture_default_str();
    if (name == "predict" || name == "explain") {
      sub->add_option("--query", inv.query, "manifest record id of the query image");
      sub->add_option("--query-embedding", inv.query_embedding, "embedding file holding the query");
      sub->add_option("--query-row", inv.query_row, "row of --query-embedding")->capture_default_str();
    }
    if (name == "ablate") sub->add_option("--modes", inv.modes, "comma-separated ablation modes")->capture_default_str();
    if (name == "sweep") {
      sub->add_option("--parameter", inv.parameter, "lambda or gat_layers")->capture_default_str();
      sub->add_option("--grid", inv.grid, "comma-separated values (default: 0..1 step 0.1, or 0..3)");
    }
    if (name == "synth") {
      auto& s = inv.synth;
      sub->add_option("--classes", s.classes)->capture_default_str();
      sub->add_option("--per-class", s.per_class)->capture_default_str();
      sub->add_option("--dim", s.dim, "image embedding dim")->capture_default_str();
      sub->add_option("--text-dim", s.text_dim)->capture_default_str();
      sub->add_option("--symptoms", s.symptoms, "lexicon size")->capture_default_str();
      sub->add_option("--separation", s.separation, "class center norm")->capture_default_str();
      sub->add_option("--noise", s.noise, "perturbation norm")->capture_default_str();
      sub->add_option("--symptom-on", s.symptom_on)->capture_default_str();
      sub->add_option("--symptom-off", s.symptom_off)->capture_default_str();
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error [usage error]: " << e.what() << "\n";
    return kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const RunConfig run = resolve_run(inv);
    return handlers.at(name)(inv, run, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error [internal]: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int dispatch(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace casegraph::cli
