#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "casegraph/cdr/cdr.hpp"
#include "casegraph/model/params.hpp"
#include "casegraph/retrieval/retrieval.hpp"
#include "casegraph/store/manifest.hpp"

namespace casegraph::experiment {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 40;
  double lr = 5e-5;
  double weight_decay = 0.02;
  std::size_t step_size = 25;
  double gamma = 0.5;
  std::size_t patience = 10;  // non-improving validation epochs tolerated (0 acts as 1)
  double clip_norm = 1.0;
  std::size_t eval_batch = 64;  // queries per inference batch

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

enum class AblationKind { Full, NoCdr, NoKpiCdr, NoKgKpiCdr };

struct AblationMode {
  AblationKind kind = AblationKind::Full;
  double drop_fraction = 0.25;  // NoKgKpiCdr only

  void validate() const;
  bool operator==(const AblationMode&) const = default;
};

std::string to_string(AblationKind kind);
AblationKind ablation_from_string(const std::string& name);

// Everything a run depends on besides file paths.
struct ExperimentConfig {
  model::ModelConfig model;  // zero dims and class count are filled from the data
  retrieval::RetrievalConfig retrieval;
  cdr::CdrConfig cdr;
  TrainConfig train;
  std::size_t kg_budget = 20;  // representative images per class
  store::SelectionStrategy selection = store::SelectionStrategy::Medoid;
  AblationMode ablation;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// The config actually run under an ablation mode: lambda forced to 0 for
// every mode except full, and propagation disabled for the KPI modes.
ExperimentConfig effective_config(const ExperimentConfig& config);

nlohmann::json experiment_to_json(const ExperimentConfig& config);

}  // namespace casegraph::experiment
