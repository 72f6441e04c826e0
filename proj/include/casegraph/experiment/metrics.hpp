#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace casegraph::experiment {

double overall_accuracy(std::span<const std::size_t> labels, std::span<const std::size_t> predictions);

struct AucResult {
  double macro = 0.0;
  std::vector<std::optional<double>> per_class;  // nullopt for skipped classes
  std::vector<std::string> warnings;
};

// One-vs-rest rank-sum AUC per class, ties credited 0.5; classes without both
// positives and negatives are skipped. scores[n][c] is sample n's score for c.
AucResult macro_auc(std::span<const std::size_t> labels, std::span<const std::vector<double>> scores,
                    std::size_t classes);

// counts[true][predicted]
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::size_t> labels,
                                                       std::span<const std::size_t> predictions,
                                                       std::size_t classes);

}  // namespace casegraph::experiment
