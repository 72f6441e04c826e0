#include "casegraph/experiment/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "casegraph/error.hpp"
#include "casegraph/numerics/optim.hpp"
#include "casegraph/numerics/random.hpp"
#include "casegraph/numerics/tape.hpp"
#include "casegraph/version.hpp"

namespace casegraph::experiment {

using nlohmann::json;
using numerics::Var;

store::DatasetManifest drop_nodes(const store::DatasetManifest& manifest, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) fail(ErrorKind::Config, "drop_fraction must lie in [0, 1)");
  if (fraction == 0.0) return manifest;
  numerics::Rng rng(seed, "ablation-drop");
  store::DatasetManifest out = manifest;

  std::vector<std::size_t> order(manifest.images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  const auto image_quota = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size())));
  std::map<std::string, std::size_t> per_class;
  for (const auto& img : manifest.images) ++per_class[img.class_name];
  std::set<std::size_t> dropped_images;
  for (std::size_t i : order) {
    if (dropped_images.size() == image_quota) break;
    auto& remaining = per_class[manifest.images[i].class_name];
    if (remaining <= 1) continue;
    --remaining;
    dropped_images.insert(i);
  }

  std::vector<std::size_t> sym_order(manifest.symptoms.size());
  for (std::size_t i = 0; i < sym_order.size(); ++i) sym_order[i] = i;
  rng.shuffle(sym_order);
  const auto symptom_quota = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(sym_order.size())));
  std::set<std::string> dropped_symptoms;
  for (std::size_t k = 0; k < symptom_quota; ++k) dropped_symptoms.insert(manifest.symptoms[sym_order[k]].id);

  out.images.clear();
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    if (dropped_images.count(i)) continue;
    store::ImageRecord rec = manifest.images[i];
    std::erase_if(rec.symptoms, [&](const std::string& s) { return dropped_symptoms.count(s) != 0; });
    out.images.push_back(std::move(rec));
  }
  out.symptoms.clear();
  for (const auto& s : manifest.symptoms) {
    if (!dropped_symptoms.count(s.id)) out.symptoms.push_back(s);
  }
  out.declared_entities.reset();
  out.declared_edges.reset();
  return out;
}

KgSelection select_kg_records(const store::DatasetManifest& manifest, const store::EmbeddingMatrix& image_embeddings,
                              const ExperimentConfig& config) {
  store::DatasetManifest train = store::filter_split(manifest, "train");
  if (train.images.empty()) fail(ErrorKind::Config, "manifest has no records in split 'train'");
  if (train.images.size() != manifest.images.size()) {
    train.declared_entities.reset();
    train.declared_edges.reset();
  }
  auto selection = store::select_representatives(train, image_embeddings, config.kg_budget, config.selection,
                                                 config.seed);
  KgSelection out{std::move(selection.manifest), std::move(selection.warnings)};
  if (config.ablation.kind == AblationKind::NoKgKpiCdr) {
    out.manifest = drop_nodes(out.manifest, config.ablation.drop_fraction, config.seed);
  }
  return out;
}

Workspace::Workspace(store::DatasetManifest manifest, store::EmbeddingMatrix image_embeddings,
                     store::EmbeddingMatrix text_embeddings, store::KnowledgeGraph graph,
                     const retrieval::RetrievalConfig& retrieval, std::optional<retrieval::SubgraphCache> cache)
    : manifest_(std::move(manifest)),
      image_(std::move(image_embeddings)),
      text_(std::move(text_embeddings)),
      graph_(std::move(graph)),
      retrieval_(retrieval) {
  retrieval_.validate();
  store::validate_manifest(manifest_);
  store::link_embeddings(graph_, image_, text_, manifest_.image_dim, manifest_.text_dim);
  if (graph_.diseases().size() != manifest_.classes.size()) {
    fail(ErrorKind::Validation, "graph disease nodes do not match the manifest classes");
  }
  for (std::size_t c = 0; c < manifest_.classes.size(); ++c) {
    if (graph_.diseases()[c].name != manifest_.classes[c].name) {
      fail(ErrorKind::Validation, "graph disease " + std::to_string(c) + " is '" + graph_.diseases()[c].name +
                                      "', manifest class is '" + manifest_.classes[c].name + "'");
    }
  }
  index_ = retrieval::ExactIndex(graph_, image_);
  for (std::size_t i = 0; i < graph_.images().size(); ++i) kg_image_by_case_[graph_.images()[i].case_id] = i;
  if (cache) {
    if (!(cache->config == retrieval_) || cache->graph_images != graph_.images().size() ||
        cache->retained.size() != graph_.images().size()) {
      fail(ErrorKind::Cache, "subgraph cache does not match this graph and retrieval config; rebuild with "
                             "`casegraph cache-subgraphs`");
    }
    cache_ = std::move(*cache);
  } else {
    cache_ = retrieval::build_subgraph_cache(graph_, index_, retrieval_);
  }
}

std::vector<std::string> Workspace::class_names() const {
  std::vector<std::string> out;
  for (const auto& c : manifest_.classes) out.push_back(c.name);
  return out;
}

std::vector<Query> Workspace::queries(const std::string& split) const {
  std::vector<Query> out;
  for (const auto& rec : manifest_.images) {
    if (rec.split != split) continue;
    Query q;
    q.id = rec.id;
    q.row = rec.row;
    q.label = *manifest_.class_index(rec.class_name);
    const auto it = kg_image_by_case_.find(rec.id);
    if (it != kg_image_by_case_.end()) q.kg_image = it->second;
    out.push_back(std::move(q));
  }
  if (out.empty()) fail(ErrorKind::Config, "manifest has no records in split '" + split + "'");
  return out;
}

retrieval::RetrievalOutcome Workspace::retrieve(const Query& query, bool leave_one_out) const {
  retrieval::RetrievalConfig cfg = retrieval_;
  if (leave_one_out) cfg.include_self = false;
  return retrieval::retrieve(graph_, index_, image_.row(query.row), cfg, query.kg_image, query.id);
}

model::ModelConfig resolve_model_config(model::ModelConfig config, const Workspace& ws) {
  if (config.image_in_dim == 0) config.image_in_dim = ws.image_embeddings().dim();
  if (config.text_in_dim == 0) config.text_in_dim = ws.text_embeddings().dim();
  if (config.num_classes == 0) config.num_classes = ws.manifest().classes.size();
  if (config.num_classes != ws.manifest().classes.size()) {
    fail(ErrorKind::Config, "model num_classes " + std::to_string(config.num_classes) + " differs from the " +
                                std::to_string(ws.manifest().classes.size()) + " manifest classes");
  }
  config.validate();
  return config;
}

namespace {

template <typename Fn>
void parallel_chunks(std::size_t chunks, std::size_t jobs, Fn&& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t c = next++; c < chunks; c = next++) fn(c);
      } catch (...) {
        errors[w] = std::current_exception();
        next = chunks;
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<model::QueryInput> inputs_for(const Workspace& ws, std::span<const Query> queries,
                                          std::span<const QueryResult> results) {
  std::vector<model::QueryInput> in;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    in.push_back({ws.image_embeddings().row(queries[i].row), &results[i].outcome.subgraph});
  }
  return in;
}

}  // namespace

std::vector<QueryResult> first_pass(const model::ModelParams& params, const Workspace& ws,
                                    std::span<const Query> queries, bool leave_one_out, std::size_t batch,
                                    std::size_t jobs) {
  if (batch == 0) fail(ErrorKind::Config, "inference batch must be positive");
  std::vector<QueryResult> results(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) results[i].outcome = ws.retrieve(queries[i], leave_one_out);
  const std::size_t chunks = (queries.size() + batch - 1) / batch;
  const auto features = ws.features();
  parallel_chunks(chunks, jobs, [&](std::size_t c) {
    const std::size_t begin = c * batch, end = std::min(queries.size(), begin + batch);
    const auto in = inputs_for(ws, queries.subspan(begin, end - begin),
                               std::span<const QueryResult>(results).subspan(begin, end - begin));
    auto logits = model::infer_logits(params, in, features);
    for (std::size_t i = begin; i < end; ++i) {
      results[i].logits = std::move(logits[i - begin]);
      results[i].p_q = cdr::predict_distribution(results[i].logits);
    }
  });
  return results;
}

cdr::PredictionBundle predict_query(const model::ModelParams& params, const Workspace& ws,
                                    std::span<const double> embedding, const std::string& query_id,
                                    std::optional<std::size_t> self_image, const ExperimentConfig& config,
                                    retrieval::RetrievalOutcome* outcome, model::ForwardTrace* trace) {
  config.validate();
  if (embedding.size() != ws.image_embeddings().dim()) {
    fail(ErrorKind::Shape, "query embedding has dim " + std::to_string(embedding.size()) + ", index expects " +
                               std::to_string(ws.image_embeddings().dim()));
  }
  auto found = retrieval::retrieve(ws.graph(), ws.index(), embedding, ws.retrieval_config(), self_image, query_id);
  const model::QueryInput input{embedding, &found.subgraph};
  const auto logits = model::infer_logits(params, std::span(&input, 1), ws.features(), trace);
  const auto p_q = cdr::predict_distribution(logits.front());
  auto bundle = cdr::second_pass(p_q, found.retained, ws.cache(), ws.features(), params, config.cdr);
  if (outcome != nullptr) *outcome = std::move(found);
  return bundle;
}

TrainResult train(const Workspace& ws, const ExperimentConfig& config) {
  config.validate();
  const TrainConfig& tc = config.train;
  const model::ModelConfig mc = resolve_model_config(config.model, ws);
  const auto train_queries = ws.queries("train");
  const auto val_queries = ws.queries("val");

  std::vector<retrieval::RetrievalOutcome> outcomes;
  outcomes.reserve(train_queries.size());
  for (const auto& q : train_queries) outcomes.push_back(ws.retrieve(q, true));

  TrainResult result;
  model::ModelParams params(mc, config.seed);
  auto tensors = params.tensors();
  numerics::AdamW opt({tc.lr, tc.weight_decay}, tensors);
  const numerics::StepLr schedule{tc.lr, tc.step_size, tc.gamma};
  numerics::Rng dropout_rng(config.seed, "dropout");
  numerics::Rng shuffle_rng(config.seed, "shuffle");
  const auto features = ws.features();

  std::vector<std::size_t> order(train_queries.size());
  bool have_best = false;
  std::size_t stale = 0;
  const std::size_t tolerance = std::max<std::size_t>(tc.patience, 1);
  for (std::size_t epoch = 0; epoch < tc.max_epochs; ++epoch) {
    const double lr = schedule.lr_at(epoch);
    opt.set_lr(lr);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += tc.batch_size) {
      const std::size_t end = std::min(order.size(), begin + tc.batch_size);
      const std::size_t b = end - begin;
      std::vector<model::QueryInput> in;
      for (std::size_t k = begin; k < end; ++k) {
        in.push_back({ws.image_embeddings().row(train_queries[order[k]].row), &outcomes[order[k]].subgraph});
      }
      params.zero_grad();
      numerics::Tape tape;
      model::ParamBinding binding(tape, params);
      const model::ForwardContext ctx{model::Mode::Train, &dropout_rng};
      const Var logits = model::forward(binding, in, features, ctx);
      std::vector<Var> terms;
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t row[] = {k};
        terms.push_back(numerics::ops::cross_entropy(numerics::ops::gather_rows(logits, row),
                                                     train_queries[order[begin + k]].label));
      }
      const Var total = terms.size() == 1 ? terms[0] : numerics::ops::sum(numerics::ops::concat_cols(terms));
      const Var loss = numerics::ops::scale(total, 1.0 / static_cast<double>(b));
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch + 1 << ", batch starting " << begin << "; queries:";
        for (std::size_t k = begin; k < end; ++k) msg << ' ' << train_queries[order[k]].id;
        msg << "; first logits:";
        for (std::size_t c = 0; c < logits.cols(); ++c) msg << ' ' << logits.value()[c];
        fail(ErrorKind::Training, msg.str());
      }
      tape.backward(loss);
      numerics::clip_global_norm(tensors, tc.clip_norm);
      opt.step();
      loss_sum += value * static_cast<double>(b);
    }
    params.zero_grad();

    const auto val = first_pass(params, ws, val_queries, false, tc.eval_batch, config.jobs);
    std::vector<std::size_t> labels, preds;
    for (std::size_t i = 0; i < val.size(); ++i) {
      labels.push_back(val_queries[i].label);
      preds.push_back(cdr::argmax(val[i].p_q));
    }
    const double val_oa = overall_accuracy(labels, preds);
    result.history.push_back({epoch + 1, lr, loss_sum / static_cast<double>(order.size()), val_oa});
    if (!have_best || val_oa > result.best_val_oa) {
      have_best = true;
      result.best = params;
      result.best_epoch = epoch + 1;
      result.best_val_oa = val_oa;
      stale = 0;
    } else if (++stale >= tolerance) {
      break;
    }
  }
  for (auto* t : result.best.tensors()) t->grad.reset();
  return result;
}

std::string history_text(const std::vector<EpochRecord>& history) {
  std::string out = "epoch lr train_loss val_oa\n";
  char line[160];
  for (const auto& e : history) {
    std::snprintf(line, sizeof line, "%zu %.17g %.17g %.17g\n", e.epoch, e.lr, e.train_loss, e.val_oa);
    out += line;
  }
  return out;
}

EvalReport evaluate(const model::ModelParams& params, const Workspace& ws, const std::string& split,
                    const ExperimentConfig& config) {
  config.validate();
  const auto queries = ws.queries(split);
  const auto results = first_pass(params, ws, queries, false, config.train.eval_batch, config.jobs);
  const std::size_t classes = ws.manifest().classes.size();

  std::map<std::size_t, std::vector<double>> case_dist;
  if (config.cdr.lambda > 0.0) {
    for (const auto& r : results) {
      for (const auto& item : r.outcome.retained.items) case_dist.emplace(item.image, std::vector<double>{});
    }
    std::vector<std::size_t> images;
    for (const auto& [image, dist] : case_dist) images.push_back(image);
    const auto features = ws.features();
    std::vector<std::vector<double>> dists(images.size());
    parallel_chunks(images.size(), config.jobs, [&](std::size_t i) {
      dists[i] = cdr::case_distribution(images[i], ws.cache(), features, params);
    });
    for (std::size_t i = 0; i < images.size(); ++i) case_dist[images[i]] = std::move(dists[i]);
  }

  EvalReport report;
  report.split = split;
  report.class_names = ws.class_names();
  report.config = experiment_to_json(config);
  report.seed = config.seed;
  std::vector<std::size_t> labels, preds;
  std::vector<std::vector<double>> scores;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    QueryPrediction p;
    p.id = queries[i].id;
    p.label = queries[i].label;
    p.p_q = results[i].p_q;
    if (config.cdr.lambda > 0.0) {
      cdr::PredictionBundle bundle;
      bundle.config = config.cdr;
      bundle.p_q = p.p_q;
      std::vector<std::vector<double>> dists;
      for (const auto& item : results[i].outcome.retained.items) dists.push_back(case_dist.at(item.image));
      cdr::assemble_bundle(bundle, results[i].outcome.retained, ws.graph(), std::move(dists));
      p.p_final = bundle.p_final;
      p.predicted = bundle.label;
    } else {
      p.p_final = p.p_q;
      p.predicted = cdr::argmax(p.p_q);
    }
    labels.push_back(p.label);
    preds.push_back(p.predicted);
    scores.push_back(p.p_final);
    report.predictions.push_back(std::move(p));
  }
  report.oa = overall_accuracy(labels, preds);
  report.confusion = confusion_matrix(labels, preds, classes);
  if (labels.size() >= 2) {
    const auto auc = macro_auc(labels, scores, classes);
    report.macro_auc = auc.macro;
    report.per_class_auc = auc.per_class;
    report.warnings = auc.warnings;
  } else {
    report.per_class_auc.assign(classes, std::nullopt);
    report.warnings.push_back("macro-AUC needs at least two samples; reported as 0");
  }
  return report;
}

json eval_report_to_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& a : r.per_class_auc) per_class.push_back(a ? json(*a) : json(nullptr));
  json preds = json::array();
  for (const auto& p : r.predictions) {
    preds.push_back({{"id", p.id}, {"label", p.label}, {"predicted", p.predicted}, {"p_q", p.p_q},
                     {"p_final", p.p_final}});
  }
  return json{{"schema", "casegraph.eval_report"},
              {"schema_version", 1},
              {"code_version", std::string(kCodeVersion)},
              {"seed", r.seed},
              {"config", r.config},
              {"split", r.split},
              {"classes", r.class_names},
              {"oa", r.oa},
              {"macro_auc", r.macro_auc},
              {"per_class_auc", per_class},
              {"confusion", r.confusion},
              {"warnings", r.warnings},
              {"predictions", preds}};
}

std::unique_ptr<Workspace> build_workspace(const store::DatasetManifest& manifest,
                                           const store::EmbeddingMatrix& image_embeddings,
                                           const store::EmbeddingMatrix& text_embeddings,
                                           const ExperimentConfig& config, std::vector<std::string>* warnings) {
  auto selection = select_kg_records(manifest, image_embeddings, config);
  if (warnings != nullptr) *warnings = selection.warnings;
  auto graph = store::build_graph(selection.manifest);
  return std::make_unique<Workspace>(manifest, image_embeddings, text_embeddings, std::move(graph), config.retrieval);
}

AblationOutcome run_ablation(const store::DatasetManifest& manifest, const store::EmbeddingMatrix& image_embeddings,
                             const store::EmbeddingMatrix& text_embeddings, const ExperimentConfig& config) {
  const ExperimentConfig e = effective_config(config);
  e.validate();
  const auto ws = build_workspace(manifest, image_embeddings, text_embeddings, e);
  AblationOutcome out;
  out.training = train(*ws, e);
  out.report = evaluate(out.training.best, *ws, "test", e);
  return out;
}

std::string to_string(SweepParameter parameter) {
  return parameter == SweepParameter::Lambda ? "lambda" : "gat_layers";
}

SweepParameter sweep_parameter_from_string(const std::string& name) {
  if (name == "lambda") return SweepParameter::Lambda;
  if (name == "gat_layers") return SweepParameter::GatLayers;
  fail(ErrorKind::Config, "unknown sweep parameter '" + name + "' (expected lambda or gat_layers)");
}

std::vector<SweepRow> sweep(SweepParameter parameter, std::span<const double> grid,
                            const store::DatasetManifest& manifest, const store::EmbeddingMatrix& image_embeddings,
                            const store::EmbeddingMatrix& text_embeddings, const ExperimentConfig& config) {
  if (grid.empty()) fail(ErrorKind::Config, "sweep grid is empty");
  for (double v : grid) {
    if (parameter == SweepParameter::Lambda && !(v >= 0.0 && v <= 1.0)) {
      fail(ErrorKind::Config, "lambda grid values must lie in [0, 1]");
    }
    if (parameter == SweepParameter::GatLayers && (v < 0.0 || v != std::floor(v))) {
      fail(ErrorKind::Config, "gat_layers grid values must be nonnegative integers");
    }
  }
  using clock = std::chrono::steady_clock;
  std::vector<SweepRow> rows;
  const ExperimentConfig base = effective_config(config);
  if (parameter == SweepParameter::Lambda) {
    const auto ws = build_workspace(manifest, image_embeddings, text_embeddings, base);
    const auto trained = train(*ws, base);
    for (double v : grid) {
      const auto start = clock::now();
      ExperimentConfig c = base;
      c.cdr.lambda = v;
      SweepRow row;
      row.value = v;
      row.report = evaluate(trained.best, *ws, "test", c);
      row.seconds = std::chrono::duration<double>(clock::now() - start).count();
      rows.push_back(std::move(row));
    }
  } else {
    for (double v : grid) {
      const auto start = clock::now();
      ExperimentConfig c = base;
      c.model.gat_layers = static_cast<std::size_t>(v);
      const auto ws = build_workspace(manifest, image_embeddings, text_embeddings, c);
      const auto trained = train(*ws, c);
      SweepRow row;
      row.value = v;
      row.report = evaluate(trained.best, *ws, "test", c);
      row.seconds = std::chrono::duration<double>(clock::now() - start).count();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string sweep_csv(SweepParameter parameter, std::span<const SweepRow> rows) {
  std::string out = "parameter,value,oa,macro_auc,seconds\n";
  char line[200];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%.17g,%.17g,%.17g,%.3f\n", to_string(parameter).c_str(), r.value,
                  r.report.oa, r.report.macro_auc, r.seconds);
    out += line;
  }
  return out;
}

json sweep_to_json(SweepParameter parameter, std::span<const SweepRow> rows, const ExperimentConfig& config) {
  json table = json::array();
  for (const auto& r : rows) {
    table.push_back({{"value", r.value}, {"oa", r.report.oa}, {"macro_auc", r.report.macro_auc},
                     {"seconds", r.seconds}, {"report", eval_report_to_json(r.report)}});
  }
  return json{{"schema", "casegraph.sweep"},
              {"schema_version", 1},
              {"code_version", std::string(kCodeVersion)},
              {"seed", config.seed},
              {"config", experiment_to_json(config)},
              {"parameter", to_string(parameter)},
              {"rows", table}};
}

}  // namespace casegraph::experiment
