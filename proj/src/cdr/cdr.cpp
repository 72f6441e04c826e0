#include "casegraph/cdr/cdr.hpp"

#include <cmath>

#include "casegraph/error.hpp"
#include "casegraph/numerics/functional.hpp"

namespace casegraph::cdr {

void CdrConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail(ErrorKind::Config, "cdr alpha must be nonnegative");
  if (!(beta >= 0.0) || !std::isfinite(beta)) fail(ErrorKind::Config, "cdr beta must be nonnegative");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    fail(ErrorKind::Config, "cdr lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
}

std::vector<double> predict_distribution(std::span<const double> logits) { return numerics::softmax(logits); }

double confidence(std::span<const double> distribution) {
  if (distribution.empty()) fail(ErrorKind::Domain, "confidence of an empty distribution");
  return distribution[argmax(distribution)];
}

std::vector<double> case_weights(std::span<const double> sims, std::span<const double> confidences,
                                 const CdrConfig& config, std::vector<double>* raw) {
  config.validate();
  if (sims.empty()) fail(ErrorKind::Usage, "case_weights of an empty case list");
  if (sims.size() != confidences.size()) fail(ErrorKind::Shape, "case_weights inputs differ in length");
  std::vector<double> r(sims.size());
  double total = 0.0;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    if (!(sims[i] > 0.0)) fail(ErrorKind::Domain, "case similarity must be positive");
    if (!(confidences[i] > 0.0 && confidences[i] <= 1.0)) fail(ErrorKind::Domain, "case confidence must lie in (0, 1]");
    r[i] = std::pow(sims[i], config.alpha) * std::pow(confidences[i], config.beta);
    total += r[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) fail(ErrorKind::Domain, "case weights do not normalize");
  std::vector<double> w(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) w[i] = r[i] / total;
  if (raw != nullptr) *raw = std::move(r);
  return w;
}

std::vector<double> aggregate_sim(std::span<const std::vector<double>> distributions,
                                  std::span<const double> weights) {
  if (distributions.empty()) fail(ErrorKind::Usage, "aggregate_sim of an empty case list");
  if (distributions.size() != weights.size()) fail(ErrorKind::Shape, "aggregate_sim inputs differ in length");
  std::vector<double> out(distributions[0].size(), 0.0);
  for (std::size_t i = 0; i < distributions.size(); ++i) {
    if (distributions[i].size() != out.size()) fail(ErrorKind::Shape, "case distributions differ in length");
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += weights[i] * distributions[i][c];
  }
  return out;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::Domain, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Refinement refine(std::span<const double> p_q, std::span<const double> p_sim, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    fail(ErrorKind::Config, "cdr lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  if (p_q.size() != p_sim.size()) fail(ErrorKind::Shape, "refine distributions differ in length");
  Refinement r;
  r.p_final.resize(p_q.size());
  for (std::size_t c = 0; c < p_q.size(); ++c) r.p_final[c] = (1.0 - lambda) * p_q[c] + lambda * p_sim[c];
  r.label = argmax(r.p_final);
  return r;
}

void assemble_bundle(PredictionBundle& bundle, const retrieval::RetrievalResult& retained,
                     const store::KnowledgeGraph& graph, std::vector<std::vector<double>> case_distributions) {
  if (retained.size() != case_distributions.size()) {
    fail(ErrorKind::Shape, "one case distribution is required per retained case");
  }
  std::vector<double> sims, confs;
  bundle.cases.clear();
  for (std::size_t i = 0; i < retained.size(); ++i) {
    CasePrediction cp;
    cp.image = retained.items[i].image;
    cp.case_id = graph.images().at(cp.image).case_id;
    cp.distribution = std::move(case_distributions[i]);
    cp.confidence = confidence(cp.distribution);
    cp.similarity = retained.items[i].similarity;
    sims.push_back(cp.similarity);
    confs.push_back(cp.confidence);
    bundle.cases.push_back(std::move(cp));
  }
  std::vector<double> raw;
  const auto w = case_weights(sims, confs, bundle.config, &raw);
  std::vector<std::vector<double>> dists;
  for (std::size_t i = 0; i < bundle.cases.size(); ++i) {
    bundle.cases[i].raw_weight = raw[i];
    bundle.cases[i].weight = w[i];
    dists.push_back(bundle.cases[i].distribution);
  }
  bundle.p_sim = aggregate_sim(dists, w);
  auto r = refine(bundle.p_q, bundle.p_sim, bundle.config.lambda);
  bundle.p_final = std::move(r.p_final);
  bundle.label = r.label;
}

std::vector<double> case_distribution(std::size_t image, const retrieval::SubgraphCache& cache,
                                      const model::FeatureSource& features, const model::ModelParams& params) {
  if (features.graph == nullptr || features.image == nullptr) {
    fail(ErrorKind::Usage, "second pass requires graph and image embeddings");
  }
  if (cache.graph_images != features.graph->images().size()) {
    fail(ErrorKind::Cache, "subgraph cache was built for a different graph; rebuild with `casegraph cache-subgraphs`");
  }
  const auto& node = features.graph->images().at(image);
  const retrieval::CaseSubgraph sub = retrieval::extract_subgraph(*features.graph, cache.at(image), node.case_id);
  const model::QueryInput input{features.image->row(node.embedding_row), &sub};
  const auto logits = model::infer_logits(params, std::span(&input, 1), features);
  return predict_distribution(logits.front());
}

std::vector<std::vector<double>> case_distributions(const retrieval::RetrievalResult& retained,
                                                    const retrieval::SubgraphCache& cache,
                                                    const model::FeatureSource& features,
                                                    const model::ModelParams& params) {
  std::vector<std::vector<double>> out;
  out.reserve(retained.size());
  for (const auto& item : retained.items) out.push_back(case_distribution(item.image, cache, features, params));
  return out;
}

PredictionBundle second_pass(std::span<const double> p_q, const retrieval::RetrievalResult& retained,
                             const retrieval::SubgraphCache& cache, const model::FeatureSource& features,
                             const model::ModelParams& params, const CdrConfig& config) {
  config.validate();
  PredictionBundle bundle;
  bundle.config = config;
  bundle.p_q.assign(p_q.begin(), p_q.end());
  assemble_bundle(bundle, retained, *features.graph, case_distributions(retained, cache, features, params));
  return bundle;
}

}  // namespace casegraph::cdr
