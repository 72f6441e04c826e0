#include "casegraph/model/kpi.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "casegraph/error.hpp"

namespace casegraph::model {

namespace ops = numerics::ops;
using numerics::Activation;
using numerics::Tensor;
using store::NodeId;
using store::NodeKind;

ParamBinding::ParamBinding(numerics::Tape& tape, ModelParams& params)
    : tape_(tape), params_(params), mutable_(&params) {}

ParamBinding::ParamBinding(numerics::Tape& tape, const ModelParams& params)
    : tape_(tape), params_(params) {}

Var ParamBinding::operator()(const std::string& name) {
  const auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Var v = mutable_ != nullptr ? tape_.param(mutable_->get(name)) : tape_.view(params_.get(name));
  bound_.emplace(name, v);
  return v;
}

BatchGraph build_batch_graph(std::span<const retrieval::CaseSubgraph* const> subgraphs) {
  if (subgraphs.empty()) fail(ErrorKind::Usage, "forward requires at least one query");
  BatchGraph g;
  for (std::size_t q = 0; q < subgraphs.size(); ++q) {
    const retrieval::CaseSubgraph& sub = *subgraphs[q];
    if (sub.retained.empty()) fail(ErrorKind::Usage, "query subgraph has no retained images");
    const std::size_t offset = g.nodes.size();
    g.node_offset.push_back(offset);
    g.nodes.insert(g.nodes.end(), sub.nodes.begin(), sub.nodes.end());
    std::vector<std::pair<std::size_t, std::size_t>> directed;
    directed.reserve(2 * sub.edges.size() + sub.nodes.size());
    for (std::size_t i = 0; i < sub.nodes.size(); ++i) directed.emplace_back(i, i);
    for (const auto& [a, b] : sub.edges) {
      if (a >= sub.nodes.size() || b >= sub.nodes.size()) {
        fail(ErrorKind::Shape, "subgraph edge references a missing node");
      }
      directed.emplace_back(a, b);
      directed.emplace_back(b, a);
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
    for (const auto& [t, s] : directed) {
      g.targets.push_back(offset + t);
      g.sources.push_back(offset + s);
    }
    for (const auto& item : sub.retained) {
      const auto pos = sub.position({NodeKind::Image, item.image});
      if (!pos) fail(ErrorKind::Lookup, "retained image missing from its subgraph");
      g.image_nodes.push_back(offset + *pos);
      g.image_query.push_back(q);
      g.image_sims.push_back(item.similarity);
    }
  }
  return g;
}

std::vector<double> knowledge_weights(std::span<const double> sims) {
  if (sims.empty()) fail(ErrorKind::Usage, "knowledge aggregation over an empty retained set");
  double total = 0.0;
  for (double s : sims) {
    if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorKind::Domain, "aggregation similarities must be positive");
    total += s;
  }
  std::vector<double> w(sims.size());
  for (std::size_t i = 0; i < sims.size(); ++i) w[i] = sims[i] / total;
  return w;
}

std::vector<std::pair<std::size_t, double>> symptom_attention_mass(const ForwardTrace& trace,
                                                                   const BatchGraph& graph) {
  std::vector<std::pair<std::size_t, double>> out;
  if (trace.gat.empty()) return out;
  const auto& alpha = trace.gat.back().alpha;
  std::vector<double> mass(graph.node_count(), 0.0);
  for (std::size_t e = 0; e < trace.edge_targets.size(); ++e) {
    const std::size_t t = trace.edge_targets[e], s = trace.edge_sources[e];
    if (graph.nodes[t].kind != NodeKind::Image || graph.nodes[s].kind != NodeKind::Symptom) continue;
    double m = 0.0;
    for (const auto& head : alpha) m += head[e];
    mass[s] += m / static_cast<double>(alpha.size());
  }
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    if (graph.nodes[i].kind == NodeKind::Symptom) out.emplace_back(i, mass[i]);
  }
  return out;
}

namespace {

Activation node_activation(const ModelConfig& c) {
  switch (c.node_activation) {
    case numerics::ActivationKind::Elu: return Activation::elu();
    case numerics::ActivationKind::Relu: return Activation::relu();
    case numerics::ActivationKind::LeakyRelu: return Activation::leaky_relu(c.leaky_slope);
  }
  return Activation::elu();
}

Var dropout(Var x, double rate, const ForwardContext& ctx) {
  if (ctx.mode != Mode::Train || rate == 0.0) return x;
  if (ctx.rng == nullptr) fail(ErrorKind::Usage, "train-mode forward requires a dropout rng");
  return ops::mask(x, numerics::dropout_mask(*ctx.rng, x.value().size(), rate));
}

Var linear(ParamBinding& p, const std::string& prefix, Var x) {
  return ops::linear(x, p(prefix + ".weight"), p(prefix + ".bias"));
}

Var norm(ParamBinding& p, const std::string& prefix, Var x) {
  return ops::layer_norm_rows(x, p(prefix + ".gamma"), p(prefix + ".beta"), p.config().layer_norm_eps);
}

// Copies embedding rows into a constant matrix, one row per requested index.
Tensor gather_embeddings(const store::EmbeddingMatrix& m, std::span<const std::size_t> rows,
                         std::size_t expected_dim, const char* what) {
  if (m.dim() != expected_dim) {
    fail(ErrorKind::Shape, std::string(what) + " embeddings have dim " + std::to_string(m.dim()) +
                               ", model expects " + std::to_string(expected_dim));
  }
  Tensor out({rows.size(), expected_dim});
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= m.rows()) {
      fail(ErrorKind::Data, std::string(what) + " embedding row " + std::to_string(rows[k]) + " is missing");
    }
    const auto r = m.row(rows[k]);
    std::copy(r.begin(), r.end(), out.data().begin() + static_cast<std::ptrdiff_t>(k * expected_dim));
  }
  return out;
}

// out[q] = sum of w[k] * rows[k] over k with owner[k] == q
Var weighted_pool(Var rows, std::span<const std::size_t> owner, std::span<const double> sims,
                  std::size_t queries, std::vector<double>* weights_out) {
  std::vector<double> w(sims.size());
  for (std::size_t q = 0; q < queries; ++q) {
    std::vector<std::size_t> members;
    std::vector<double> s;
    for (std::size_t k = 0; k < owner.size(); ++k) {
      if (owner[k] == q) {
        members.push_back(k);
        s.push_back(sims[k]);
      }
    }
    const auto wq = knowledge_weights(s);
    for (std::size_t i = 0; i < members.size(); ++i) w[members[i]] = wq[i];
  }
  if (weights_out != nullptr) *weights_out = w;
  numerics::Tape& t = *rows.tape;
  const Var wcol = t.constant(Tensor({w.size(), 1}, w));
  return ops::scatter_add_rows(ops::scale_rows(rows, wcol), owner, queries);
}

Var mlp(ParamBinding& p, const std::string& prefix, Var x, const ForwardContext& ctx) {
  const Var hidden = ops::activate(linear(p, prefix + ".fc1", x), Activation::relu());
  return dropout(linear(p, prefix + ".fc2", hidden), p.config().mlp_dropout, ctx);
}

}  // namespace

Var project_queries(ParamBinding& p, std::span<const std::span<const double>> embeddings) {
  const std::size_t in = p.config().image_in_dim;
  Tensor x({embeddings.size(), in});
  for (std::size_t q = 0; q < embeddings.size(); ++q) {
    if (embeddings[q].size() != in) {
      fail(ErrorKind::Shape, "query embedding has dim " + std::to_string(embeddings[q].size()) +
                                 ", model expects " + std::to_string(in));
    }
    std::copy(embeddings[q].begin(), embeddings[q].end(), x.data().begin() + static_cast<std::ptrdiff_t>(q * in));
  }
  return linear(p, "proj.image", p.tape().constant(std::move(x)));
}

Var init_node_states(ParamBinding& p, const BatchGraph& graph, const FeatureSource& features) {
  if (features.graph == nullptr || features.image == nullptr || features.text == nullptr) {
    fail(ErrorKind::Usage, "node initialization requires graph, image and text embeddings");
  }
  const store::KnowledgeGraph& kg = *features.graph;
  std::vector<std::size_t> image_rows, text_rows;
  std::vector<std::size_t> slot(graph.node_count());
  std::vector<bool> is_text(graph.node_count(), false);
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const NodeId& n = graph.nodes[i];
    if (!kg.contains(n)) fail(ErrorKind::Lookup, "subgraph node " + store::to_string(n) + " not in graph");
    switch (n.kind) {
      case NodeKind::Image:
        slot[i] = image_rows.size();
        image_rows.push_back(kg.images()[n.index].embedding_row);
        break;
      case NodeKind::Disease: {
        const auto& row = kg.diseases()[n.index].text_row;
        if (!row) fail(ErrorKind::Data, "disease node " + store::to_string(n) + " has no text embedding");
        slot[i] = text_rows.size();
        is_text[i] = true;
        text_rows.push_back(*row);
        break;
      }
      case NodeKind::Symptom:
        slot[i] = text_rows.size();
        is_text[i] = true;
        text_rows.push_back(kg.symptoms()[n.index].embedding_row);
        break;
    }
  }
  const ModelConfig& c = p.config();
  numerics::Tape& t = p.tape();
  std::vector<Var> blocks;
  if (!image_rows.empty()) {
    blocks.push_back(linear(p, "proj.image",
                            t.constant(gather_embeddings(*features.image, image_rows, c.image_in_dim, "image"))));
  }
  if (!text_rows.empty()) {
    blocks.push_back(linear(p, "proj.text",
                            t.constant(gather_embeddings(*features.text, text_rows, c.text_in_dim, "text"))));
  }
  const Var stacked = blocks.size() == 1 ? blocks[0] : ops::concat_rows(blocks);
  std::vector<std::size_t> order(graph.node_count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = is_text[i] ? image_rows.size() + slot[i] : slot[i];
  return ops::gather_rows(stacked, order);
}

Var gat_layer(ParamBinding& p, std::size_t layer, Var states, const BatchGraph& graph,
              const ForwardContext& ctx, GatLayerTrace* trace) {
  const ModelConfig& c = p.config();
  if (states.cols() != c.hidden_dim || states.rows() != graph.node_count()) {
    fail(ErrorKind::Shape, "gat_layer states do not match the batch graph");
  }
  const std::string prefix = "gat." + std::to_string(layer);
  const std::size_t n = graph.node_count();
  const std::size_t dh = c.hidden_dim / c.gat_heads;
  const Var wh = ops::matmul(states, p(prefix + ".weight"));
  const auto leaky = Activation::leaky_relu(c.leaky_slope);
  if (trace != nullptr) trace->alpha.clear();
  std::vector<Var> heads;
  for (std::size_t h = 0; h < c.gat_heads; ++h) {
    const std::string ph = prefix + ".head" + std::to_string(h);
    const Var whh = ops::slice_cols(wh, h * dh, (h + 1) * dh);
    const Var score_i = ops::matmul(whh, p(ph + ".att_i"));
    const Var score_j = ops::matmul(whh, p(ph + ".att_j"));
    const Var e = ops::activate(
        ops::add(ops::gather_rows(score_i, graph.targets), ops::gather_rows(score_j, graph.sources)), leaky);
    Var alpha = ops::segment_softmax(e, graph.targets, n);
    if (trace != nullptr) trace->alpha.push_back(alpha.value().values());
    alpha = dropout(alpha, c.attn_dropout, ctx);
    const Var messages = ops::scale_rows(ops::gather_rows(whh, graph.sources), alpha);
    heads.push_back(ops::scatter_add_rows(messages, graph.targets, n));
  }
  const Var joined = heads.size() == 1 ? heads[0] : ops::concat_cols(heads);
  return ops::activate(joined, node_activation(c));
}

Var aggregate_knowledge(Var states, const BatchGraph& graph, std::vector<double>* weights) {
  if (graph.image_nodes.empty()) fail(ErrorKind::Usage, "knowledge aggregation over an empty retained set");
  const Var rows = ops::gather_rows(states, graph.image_nodes);
  return weighted_pool(rows, graph.image_query, graph.image_sims, graph.query_count(), weights);
}

Var cross_attention(ParamBinding& p, const std::string& prefix, Var query, Var key_value,
                    std::size_t heads, const ForwardContext& ctx, std::vector<double>* weights) {
  const ModelConfig& c = p.config();
  if (query.cols() != c.hidden_dim || key_value.cols() != c.hidden_dim || query.rows() != key_value.rows()) {
    fail(ErrorKind::Shape, "cross-attention operands must both be d-dimensional rows");
  }
  const Var q = linear(p, prefix + ".query", query);
  const Var k = linear(p, prefix + ".key", key_value);
  const Var v = linear(p, prefix + ".value", key_value);
  const std::size_t dh = c.hidden_dim / heads;
  const Var ones = p.tape().constant(Tensor({dh, 1}, 1.0));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    const Var qh = ops::slice_cols(q, h * dh, (h + 1) * dh);
    const Var kh = ops::slice_cols(k, h * dh, (h + 1) * dh);
    const Var vh = ops::slice_cols(v, h * dh, (h + 1) * dh);
    // each row attends over its single key
    const Var logits = ops::scale(ops::matmul(ops::mul(qh, kh), ones), scale);
    Var w = ops::softmax_rows(logits);
    if (weights != nullptr) {
      for (double x : w.value().data()) weights->push_back(x);
    }
    w = dropout(w, c.attn_dropout, ctx);
    outs.push_back(ops::scale_rows(vh, w));
  }
  const Var joined = outs.size() == 1 ? outs[0] : ops::concat_cols(outs);
  return linear(p, prefix + ".out", joined);
}

std::pair<Var, Var> cross_modal_block(ParamBinding& p, std::size_t block, Var v, Var z,
                                      const ForwardContext& ctx, CrossModalTrace* trace) {
  const ModelConfig& c = p.config();
  const std::string pre = "xmodal." + std::to_string(block) + ".";
  const Var z1 = cross_attention(p, pre + "kg", z, v, c.xmodal_heads, ctx,
                                 trace != nullptr ? &trace->kg_weights : nullptr);
  const Var v1 = cross_attention(p, pre + "img", v, z1, c.xmodal_heads, ctx,
                                 trace != nullptr ? &trace->img_weights : nullptr);
  Var zn = norm(p, pre + "kg.norm1", ops::add(z, z1));
  Var vn = norm(p, pre + "img.norm1", ops::add(v, v1));
  zn = norm(p, pre + "kg.norm2", ops::add(zn, mlp(p, pre + "kg.mlp", zn, ctx)));
  vn = norm(p, pre + "img.norm2", ops::add(vn, mlp(p, pre + "img.mlp", vn, ctx)));
  return {vn, zn};
}

Var fuse_features(Var v, Var z) {
  const Var parts[] = {v, z, ops::abs(ops::sub(v, z)), ops::mul(v, z)};
  return ops::concat_cols(parts);
}

std::vector<double> fuse_features(std::span<const double> v, std::span<const double> z) {
  if (v.size() != z.size()) fail(ErrorKind::Shape, "fuse_features operands differ in length");
  std::vector<double> out;
  out.reserve(4 * v.size());
  out.insert(out.end(), v.begin(), v.end());
  out.insert(out.end(), z.begin(), z.end());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(std::abs(v[i] - z[i]));
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(v[i] * z[i]);
  return out;
}

Var classify(ParamBinding& p, Var fused, const ForwardContext& ctx) {
  if (fused.cols() != p.config().fused_dim()) {
    fail(ErrorKind::Shape, "classifier input has width " + std::to_string(fused.cols()) + ", expected " +
                               std::to_string(p.config().fused_dim()));
  }
  Var hidden = ops::activate(linear(p, "head.fc1", fused), Activation::relu());
  hidden = dropout(hidden, p.config().mlp_dropout, ctx);
  return linear(p, "head.fc2", hidden);
}

Var forward(ParamBinding& p, std::span<const QueryInput> queries, const FeatureSource& features,
            const ForwardContext& ctx, ForwardTrace* trace) {
  if (trace != nullptr && queries.size() != 1) fail(ErrorKind::Usage, "tracing requires a single query");
  const ModelConfig& c = p.config();
  std::vector<const retrieval::CaseSubgraph*> subs;
  std::vector<std::span<const double>> embeddings;
  for (const auto& q : queries) {
    if (q.subgraph == nullptr) fail(ErrorKind::Usage, "query has no subgraph");
    subs.push_back(q.subgraph);
    embeddings.push_back(q.embedding);
  }
  const BatchGraph graph = build_batch_graph(subs);
  Var v = project_queries(p, embeddings);
  Var z;
  std::vector<double>* weights = trace != nullptr ? &trace->aggregate_weights : nullptr;
  Var fused;
  if (c.knowledge_propagation) {
    Var states = init_node_states(p, graph, features);
    if (trace != nullptr) {
      trace->node_states.push_back(states.value());
      trace->edge_targets = graph.targets;
      trace->edge_sources = graph.sources;
    }
    for (std::size_t l = 0; l < c.gat_layers; ++l) {
      GatLayerTrace* lt = nullptr;
      if (trace != nullptr) lt = &trace->gat.emplace_back();
      states = gat_layer(p, l, states, graph, ctx, lt);
      if (trace != nullptr) trace->node_states.push_back(states.value());
    }
    z = aggregate_knowledge(states, graph, weights);
    for (std::size_t b = 0; b < c.xmodal_layers; ++b) {
      CrossModalTrace* bt = nullptr;
      if (trace != nullptr) bt = &trace->cross_modal.emplace_back();
      std::tie(v, z) = cross_modal_block(p, b, v, z, ctx, bt);
    }
    fused = fuse_features(v, z);
  } else {
    if (features.graph == nullptr || features.image == nullptr) {
      fail(ErrorKind::Usage, "forward requires graph and image embeddings");
    }
    std::vector<std::size_t> rows;
    for (std::size_t node : graph.image_nodes) rows.push_back(features.graph->images()[graph.nodes[node].index].embedding_row);
    const Var projected = linear(
        p, "proj.image", p.tape().constant(gather_embeddings(*features.image, rows, c.image_in_dim, "image")));
    z = weighted_pool(projected, graph.image_query, graph.image_sims, graph.query_count(), weights);
    const Var parts[] = {v, z};
    fused = ops::concat_cols(parts);
  }
  const Var logits = classify(p, fused, ctx);
  if (trace != nullptr) {
    trace->v_query = v.value();
    trace->z_kg = z.value();
    trace->fused = fused.value();
    trace->logits = logits.value();
  }
  return logits;
}

std::vector<std::vector<double>> infer_logits(const ModelParams& params, std::span<const QueryInput> queries,
                                              const FeatureSource& features, ForwardTrace* trace) {
  numerics::Tape tape;
  ParamBinding binding(tape, params);
  const Var logits = forward(binding, queries, features, ForwardContext{}, trace);
  const Tensor& lv = logits.value();
  std::vector<std::vector<double>> out(lv.rows());
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    out[r].assign(lv.data().begin() + static_cast<std::ptrdiff_t>(r * lv.cols()),
                  lv.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * lv.cols()));
  }
  return out;
}

}  // namespace casegraph::model
