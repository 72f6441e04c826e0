#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "casegraph/cdr/cdr.hpp"
#include "casegraph/model/kpi.hpp"
#include "casegraph/retrieval/retrieval.hpp"
#include "casegraph/store/graph.hpp"

namespace casegraph::cdr {

inline constexpr const char* kEvidenceSchema = "casegraph.evidence_report";
inline constexpr int kEvidenceSchemaVersion = 1;
inline constexpr const char* kPredictionSchema = "casegraph.prediction";
inline constexpr int kPredictionSchemaVersion = 1;

// Everything besides the bundle that an evidence report draws on.
struct ReportContext {
  std::string query_id;
  std::optional<std::size_t> true_label;
  std::vector<std::string> class_names;
  const store::KnowledgeGraph* graph = nullptr;
  const retrieval::RetrievalOutcome* retrieval = nullptr;
  const model::ForwardTrace* trace = nullptr;  // first-pass trace of the query
  double u_th = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
};

// PredictionBundle as emitted by `predict`.
nlohmann::json bundle_to_json(const PredictionBundle& bundle, const std::vector<std::string>& class_names,
                              const std::string& query_id, std::uint64_t seed, const nlohmann::json& config);

nlohmann::json emit_evidence_report(const PredictionBundle& bundle, const ReportContext& context);

// Self-contained HTML view of a report document.
std::string render_report_html(const nlohmann::json& report);

// (1 - lambda) p_q + lambda p_sim from the report's own fields.
std::vector<double> recompute_final(const nlohmann::json& report);

}  // namespace casegraph::cdr
