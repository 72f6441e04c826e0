#include "casegraph/cdr/report.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "casegraph/error.hpp"
#include "casegraph/version.hpp"

namespace casegraph::cdr {

using nlohmann::json;
using store::NodeKind;

namespace {

std::string class_name(const std::vector<std::string>& names, std::size_t c) {
  return c < names.size() ? names[c] : "class " + std::to_string(c);
}

json prediction_block(const PredictionBundle& b, const std::vector<std::string>& names) {
  return json{{"p_q", b.p_q},
              {"p_sim", b.p_sim},
              {"p_final", b.p_final},
              {"label", b.label},
              {"label_name", class_name(names, b.label)},
              {"lambda", b.config.lambda},
              {"alpha", b.config.alpha},
              {"beta", b.config.beta}};
}

json cases_block(const PredictionBundle& b, const std::vector<std::string>& names,
                 const store::KnowledgeGraph* graph) {
  json cases = json::array();
  for (const auto& c : b.cases) {
    json entry{{"image", c.image},
               {"case_id", c.case_id},
               {"similarity", c.similarity},
               {"confidence", c.confidence},
               {"raw_weight", c.raw_weight},
               {"weight", c.weight},
               {"distribution", c.distribution}};
    if (graph != nullptr) {
      entry["class"] = class_name(names, graph->disease_of(c.image));
    } else {
      entry["class"] = nullptr;
    }
    cases.push_back(entry);
  }
  return cases;
}

std::string node_label(const store::KnowledgeGraph& g, store::NodeId n) {
  switch (n.kind) {
    case NodeKind::Disease: return g.diseases()[n.index].name;
    case NodeKind::Image: return g.images()[n.index].case_id;
    case NodeKind::Symptom: {
      const auto& s = g.symptoms()[n.index];
      return s.text.empty() ? s.id : s.id + ": " + s.text;
    }
  }
  return {};
}

std::string escape_html(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string dist_cells(const json& dist) {
  std::string out;
  for (const auto& v : dist) out += "<td>" + fixed(v.get<double>()) + "</td>";
  return out;
}

}  // namespace

json bundle_to_json(const PredictionBundle& bundle, const std::vector<std::string>& class_names,
                    const std::string& query_id, std::uint64_t seed, const json& config) {
  return json{{"schema", kPredictionSchema},
              {"schema_version", kPredictionSchemaVersion},
              {"code_version", std::string(kCodeVersion)},
              {"seed", seed},
              {"config", config},
              {"query", {{"id", query_id}}},
              {"classes", class_names},
              {"prediction", prediction_block(bundle, class_names)},
              {"cases", cases_block(bundle, class_names, nullptr)}};
}

json emit_evidence_report(const PredictionBundle& bundle, const ReportContext& ctx) {
  if (ctx.graph == nullptr || ctx.retrieval == nullptr) {
    fail(ErrorKind::Usage, "evidence report requires the graph and the query's retrieval outcome");
  }
  if (bundle.p_final.empty() || bundle.cases.empty()) fail(ErrorKind::Usage, "evidence report requires a complete bundle");
  const store::KnowledgeGraph& g = *ctx.graph;
  json doc;
  doc["schema"] = kEvidenceSchema;
  doc["schema_version"] = kEvidenceSchemaVersion;
  doc["code_version"] = std::string(kCodeVersion);
  doc["seed"] = ctx.seed;
  doc["config"] = ctx.config;
  json query{{"id", ctx.query_id}};
  query["true_label"] = ctx.true_label ? json(*ctx.true_label) : json(nullptr);
  query["true_label_name"] = ctx.true_label ? json(class_name(ctx.class_names, *ctx.true_label)) : json(nullptr);
  doc["query"] = query;
  doc["classes"] = ctx.class_names;
  doc["prediction"] = prediction_block(bundle, ctx.class_names);
  doc["cases"] = cases_block(bundle, ctx.class_names, &g);

  const auto& r = *ctx.retrieval;
  json candidates = json::array();
  for (const auto& item : r.candidates.items) {
    candidates.push_back({{"image", item.image}, {"case_id", g.images()[item.image].case_id},
                          {"similarity", item.similarity}});
  }
  doc["retrieval"] = {{"candidates", candidates},
                      {"clamped", r.trace.clamped},
                      {"log_ratios", r.trace.log_ratios},
                      {"retained", r.trace.cut},
                      {"u_th", ctx.u_th}};

  const retrieval::CaseSubgraph* subs[] = {&r.subgraph};
  const model::BatchGraph batch = model::build_batch_graph(subs);
  std::map<std::size_t, double> mass;
  if (ctx.trace != nullptr) {
    for (const auto& [pos, m] : model::symptom_attention_mass(*ctx.trace, batch)) mass[pos] = m;
  }
  json nodes = json::array();
  for (std::size_t i = 0; i < r.subgraph.nodes.size(); ++i) {
    const auto n = r.subgraph.nodes[i];
    json node{{"position", i}, {"kind", store::to_string(n.kind)}, {"index", n.index}, {"label", node_label(g, n)}};
    const auto it = mass.find(i);
    node["attention_mass"] = it != mass.end() ? json(it->second) : json(nullptr);
    nodes.push_back(node);
  }
  json edges = json::array();
  for (const auto& [a, b] : r.subgraph.edges) edges.push_back({a, b});
  doc["subgraph"] = {{"nodes", nodes}, {"edges", edges}};

  json xmodal = json::array();
  if (ctx.trace != nullptr) {
    for (std::size_t b = 0; b < ctx.trace->cross_modal.size(); ++b) {
      xmodal.push_back({{"block", b},
                        {"kg_weights", ctx.trace->cross_modal[b].kg_weights},
                        {"img_weights", ctx.trace->cross_modal[b].img_weights}});
    }
  }
  doc["cross_modal"] = xmodal;
  doc["notes"] = json::array(
      {"cross-modal attention runs over a single key token, so every attention weight is exactly 1"});
  return doc;
}

std::vector<double> recompute_final(const json& report) {
  const auto& p = report.at("prediction");
  const double lambda = p.at("lambda").get<double>();
  const auto pq = p.at("p_q").get<std::vector<double>>();
  const auto ps = p.at("p_sim").get<std::vector<double>>();
  if (pq.size() != ps.size()) fail(ErrorKind::Shape, "report distributions differ in length");
  std::vector<double> out(pq.size());
  for (std::size_t c = 0; c < pq.size(); ++c) out[c] = (1.0 - lambda) * pq[c] + lambda * ps[c];
  return out;
}

std::string render_report_html(const json& report) {
  const auto& classes = report.at("classes");
  const auto& pred = report.at("prediction");
  std::ostringstream h;
  h << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Evidence report "
    << escape_html(report.at("query").at("id").get<std::string>()) << "</title>\n"
    << "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse;margin:1em 0}"
       "td,th{border:1px solid #999;padding:3px 8px;text-align:right}th{background:#eee}"
       "td.l{text-align:left}</style></head><body>\n";
  h << "<h1>Query " << escape_html(report.at("query").at("id").get<std::string>()) << "</h1>\n";
  h << "<p>Predicted <b>" << escape_html(pred.at("label_name").get<std::string>()) << "</b>";
  const auto& truth = report.at("query").at("true_label_name");
  if (!truth.is_null()) h << " (annotated " << escape_html(truth.get<std::string>()) << ")";
  h << ". lambda=" << fixed(pred.at("lambda").get<double>(), 3) << " alpha=" << fixed(pred.at("alpha").get<double>(), 3)
    << " beta=" << fixed(pred.at("beta").get<double>(), 3) << "</p>\n";

  h << "<h2>Distribution</h2>\n<table><tr><th></th>";
  for (const auto& c : classes) h << "<th>" << escape_html(c.get<std::string>()) << "</th>";
  h << "</tr>\n";
  for (const char* key : {"p_q", "p_sim", "p_final"}) {
    h << "<tr><td class=\"l\">" << key << "</td>" << dist_cells(pred.at(key)) << "</tr>\n";
  }
  h << "</table>\n";

  h << "<h2>Retrieved cases</h2>\n<table><tr><th>case</th><th>class</th><th>similarity</th>"
       "<th>confidence</th><th>weight</th>";
  for (const auto& c : classes) h << "<th>P(" << escape_html(c.get<std::string>()) << ")</th>";
  h << "</tr>\n";
  for (const auto& c : report.at("cases")) {
    h << "<tr><td class=\"l\">" << escape_html(c.at("case_id").get<std::string>()) << "</td><td class=\"l\">"
      << (c.at("class").is_null() ? std::string("?") : escape_html(c.at("class").get<std::string>())) << "</td><td>"
      << fixed(c.at("similarity").get<double>()) << "</td><td>" << fixed(c.at("confidence").get<double>())
      << "</td><td>" << fixed(c.at("weight").get<double>()) << "</td>" << dist_cells(c.at("distribution"))
      << "</tr>\n";
  }
  h << "</table>\n";

  h << "<h2>Subgraph</h2>\n<table><tr><th>#</th><th>kind</th><th>label</th><th>attention mass</th></tr>\n";
  for (const auto& n : report.at("subgraph").at("nodes")) {
    h << "<tr><td>" << n.at("position").get<std::size_t>() << "</td><td class=\"l\">"
      << escape_html(n.at("kind").get<std::string>()) << "</td><td class=\"l\">"
      << escape_html(n.at("label").get<std::string>()) << "</td><td>"
      << (n.at("attention_mass").is_null() ? std::string() : fixed(n.at("attention_mass").get<double>()))
      << "</td></tr>\n";
  }
  h << "</table>\n<p>Edges (image position, neighbor position):";
  for (const auto& e : report.at("subgraph").at("edges")) h << " (" << e.at(0) << ", " << e.at(1) << ")";
  h << "</p>\n";
  for (const auto& note : report.at("notes")) h << "<p><i>" << escape_html(note.get<std::string>()) << "</i></p>\n";
  h << "<p><small>" << escape_html(report.at("code_version").get<std::string>()) << ", seed "
    << report.at("seed").dump() << "</small></p>\n</body></html>\n";
  return h.str();
}

}  // namespace casegraph::cdr
