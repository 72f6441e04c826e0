#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "casegraph/model/kpi.hpp"
#include "casegraph/model/params.hpp"
#include "casegraph/retrieval/retrieval.hpp"

namespace casegraph::cdr {

struct CdrConfig {
  double alpha = 1.0;   // similarity exponent
  double beta = 1.0;    // confidence exponent
  double lambda = 0.2;  // weight of the case-based distribution

  void validate() const;
  bool operator==(const CdrConfig&) const = default;
};

struct CasePrediction {
  std::size_t image = 0;  // KG image node
  std::string case_id;
  std::vector<double> distribution;
  double confidence = 0.0;  // max of distribution
  double similarity = 0.0;
  double raw_weight = 0.0;
  double weight = 0.0;
};

struct PredictionBundle {
  std::vector<double> p_q;
  std::vector<CasePrediction> cases;
  std::vector<double> p_sim;
  std::vector<double> p_final;
  std::size_t label = 0;
  CdrConfig config;
};

std::vector<double> predict_distribution(std::span<const double> logits);
double confidence(std::span<const double> distribution);

// w_i = sim_i^alpha * c_i^beta / sum_j sim_j^alpha * c_j^beta
std::vector<double> case_weights(std::span<const double> sims, std::span<const double> confidences,
                                 const CdrConfig& config, std::vector<double>* raw = nullptr);

std::vector<double> aggregate_sim(std::span<const std::vector<double>> distributions,
                                  std::span<const double> weights);

// Lowest index among maxima.
std::size_t argmax(std::span<const double> values);

struct Refinement {
  std::vector<double> p_final;
  std::size_t label = 0;
};

Refinement refine(std::span<const double> p_q, std::span<const double> p_sim, double lambda);

// Fills cases, p_sim, p_final and label of a bundle whose p_q is set, from
// already computed case distributions aligned with `retained`.
void assemble_bundle(PredictionBundle& bundle, const retrieval::RetrievalResult& retained,
                     const store::KnowledgeGraph& graph, std::vector<std::vector<double>> case_distributions);

// Plain KPI forward of one KG image over its cached subgraph, one query per
// call so the result does not depend on batching. Never itself refined.
std::vector<double> case_distribution(std::size_t image, const retrieval::SubgraphCache& cache,
                                      const model::FeatureSource& features, const model::ModelParams& params);

std::vector<std::vector<double>> case_distributions(const retrieval::RetrievalResult& retained,
                                                    const retrieval::SubgraphCache& cache,
                                                    const model::FeatureSource& features,
                                                    const model::ModelParams& params);

PredictionBundle second_pass(std::span<const double> p_q, const retrieval::RetrievalResult& retained,
                             const retrieval::SubgraphCache& cache, const model::FeatureSource& features,
                             const model::ModelParams& params, const CdrConfig& config);

}  // namespace casegraph::cdr
