#include "casegraph/experiment/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "casegraph/error.hpp"

namespace casegraph::experiment {

double overall_accuracy(std::span<const std::size_t> labels, std::span<const std::size_t> predictions) {
  if (labels.size() != predictions.size()) fail(ErrorKind::Shape, "labels and predictions differ in length");
  if (labels.empty()) fail(ErrorKind::Metric, "accuracy of an empty sample");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += labels[i] == predictions[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

AucResult macro_auc(std::span<const std::size_t> labels, std::span<const std::vector<double>> scores,
                    std::size_t classes) {
  const std::size_t n = labels.size();
  if (scores.size() != n) fail(ErrorKind::Shape, "labels and score rows differ in length");
  if (n < 2) fail(ErrorKind::Metric, "macro-AUC requires at least two samples");
  for (const auto& row : scores) {
    if (row.size() != classes) fail(ErrorKind::Shape, "score row width differs from class count");
    for (double v : row) {
      if (!std::isfinite(v)) fail(ErrorKind::Metric, "macro-AUC scores must be finite");
    }
  }
  AucResult out;
  out.per_class.assign(classes, std::nullopt);
  double total = 0.0;
  std::size_t counted = 0;
  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) pos += labels[i] == c ? 1 : 0;
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) {
      out.warnings.push_back("class " + std::to_string(c) + " has no " + (pos == 0 ? "positive" : "negative") +
                             " samples; excluded from macro-AUC");
      continue;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a][c] < scores[b][c]; });
    // midranks over tie groups, 1-based
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && scores[order[j + 1]][c] == scores[order[i]][c]) ++j;
      const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) rank_sum += labels[order[k]] == c ? mid : 0.0;
      i = j + 1;
    }
    const double p = static_cast<double>(pos), q = static_cast<double>(neg);
    const double auc = (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
    out.per_class[c] = auc;
    total += auc;
    ++counted;
  }
  if (counted == 0) fail(ErrorKind::Metric, "every class is degenerate; macro-AUC is undefined");
  out.macro = total / static_cast<double>(counted);
  return out;
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::size_t> labels,
                                                       std::span<const std::size_t> predictions,
                                                       std::size_t classes) {
  if (labels.size() != predictions.size()) fail(ErrorKind::Shape, "labels and predictions differ in length");
  std::vector<std::vector<std::size_t>> m(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes || predictions[i] >= classes) fail(ErrorKind::Shape, "label out of range");
    ++m[labels[i]][predictions[i]];
  }
  return m;
}

}  // namespace casegraph::experiment
