#include "casegraph/experiment/config.hpp"

#include <cmath>

#include "casegraph/error.hpp"

namespace casegraph::experiment {

using nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size == 0) fail(ErrorKind::Config, "batch_size must be positive");
  if (max_epochs == 0) fail(ErrorKind::Config, "max_epochs must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorKind::Config, "lr must be nonnegative");
  if (!(weight_decay >= 0.0)) fail(ErrorKind::Config, "weight_decay must be nonnegative");
  if (step_size == 0) fail(ErrorKind::Config, "step_size must be positive");
  if (!(gamma > 0.0)) fail(ErrorKind::Config, "gamma must be positive");
  if (patience > max_epochs) fail(ErrorKind::Config, "patience must not exceed max_epochs");
  if (!(clip_norm > 0.0)) fail(ErrorKind::Config, "clip_norm must be positive");
  if (eval_batch == 0) fail(ErrorKind::Config, "eval_batch must be positive");
}

void AblationMode::validate() const {
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) {
    fail(ErrorKind::Config, "drop_fraction must lie in [0, 1)");
  }
}

std::string to_string(AblationKind kind) {
  switch (kind) {
    case AblationKind::Full: return "full";
    case AblationKind::NoCdr: return "no_cdr";
    case AblationKind::NoKpiCdr: return "no_kpi_cdr";
    case AblationKind::NoKgKpiCdr: return "no_kg_kpi_cdr";
  }
  return "full";
}

AblationKind ablation_from_string(const std::string& name) {
  if (name == "full") return AblationKind::Full;
  if (name == "no_cdr") return AblationKind::NoCdr;
  if (name == "no_kpi_cdr") return AblationKind::NoKpiCdr;
  if (name == "no_kg_kpi_cdr") return AblationKind::NoKgKpiCdr;
  fail(ErrorKind::Config, "unknown ablation mode '" + name + "'");
}

void ExperimentConfig::validate() const {
  retrieval.validate();
  cdr.validate();
  train.validate();
  ablation.validate();
  if (kg_budget == 0) fail(ErrorKind::Config, "kg_budget must be positive");
  if (jobs == 0) fail(ErrorKind::Config, "jobs must be positive");
}

ExperimentConfig effective_config(const ExperimentConfig& config) {
  ExperimentConfig e = config;
  if (e.ablation.kind != AblationKind::Full) e.cdr.lambda = 0.0;
  if (e.ablation.kind == AblationKind::NoKpiCdr || e.ablation.kind == AblationKind::NoKgKpiCdr) {
    e.model.knowledge_propagation = false;
  }
  return e;
}

json experiment_to_json(const ExperimentConfig& c) {
  const auto& t = c.train;
  return json{
      {"model", model::config_to_json(c.model)},
      {"retrieval",
       {{"k", c.retrieval.k}, {"u_th", c.retrieval.u_th}, {"min_keep", c.retrieval.min_keep},
        {"sim_floor", c.retrieval.sim_floor}, {"include_self", c.retrieval.include_self}}},
      {"cdr", {{"alpha", c.cdr.alpha}, {"beta", c.cdr.beta}, {"lambda", c.cdr.lambda}}},
      {"train",
       {{"batch_size", t.batch_size}, {"max_epochs", t.max_epochs}, {"lr", t.lr}, {"weight_decay", t.weight_decay},
        {"step_size", t.step_size}, {"gamma", t.gamma}, {"patience", t.patience}, {"clip_norm", t.clip_norm},
        {"eval_batch", t.eval_batch}}},
      {"kg", {{"budget", c.kg_budget},
              {"selection", c.selection == store::SelectionStrategy::Medoid ? "medoid" : "random"}}},
      {"ablation", {{"mode", to_string(c.ablation.kind)}, {"drop_fraction", c.ablation.drop_fraction}}},
      {"seed", c.seed}};
}

}  // namespace casegraph::experiment
