#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "casegraph/store/embeddings.hpp"
#include "casegraph/store/manifest.hpp"

namespace casegraph::experiment {

struct SyntheticConfig {
  std::size_t classes = 3;
  std::size_t per_class = 100;
  std::size_t dim = 32;        // image embedding dim
  std::size_t text_dim = 32;
  std::size_t symptoms = 12;   // lexicon size; split round-robin into class subsets
  double separation = 1.0;     // length of each class center
  double noise = 1.5;          // expected norm of the per-image perturbation
  double symptom_on = 0.8;     // probability of a characteristic symptom
  double symptom_off = 0.1;    // probability of any other symptom
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  store::DatasetManifest manifest;
  store::EmbeddingMatrix image_embeddings;
  store::EmbeddingMatrix text_embeddings;
};

// Images per class are split 60/20/20 into train/val/test in draw order.
// Text rows hold the class descriptions first, then the symptom lexicon.
// Values are rounded to float so the written files reload bit-identically.
SyntheticDataset generate_synthetic(const SyntheticConfig& config);

// Writes manifest.json, image_embeddings.bin and text_embeddings.bin.
void write_synthetic(const SyntheticDataset& dataset, const std::filesystem::path& dir);

}  // namespace casegraph::experiment
