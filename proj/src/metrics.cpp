#include "casd/metrics.hpp"

#include "casd/error.hpp"

namespace casd {

Metrics compute_metrics(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                        std::size_t n_classes) {
  if (labels.size() != predictions.size()) fail(ErrorKind::kDimension, "metrics: label/prediction count mismatch");
  if (labels.empty()) fail(ErrorKind::kData, "metrics: empty evaluation set");
  std::vector<std::size_t> tp(n_classes), fp(n_classes), fn(n_classes), support(n_classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t y = labels[i], p = predictions[i];
    if (y >= n_classes || p >= n_classes) fail(ErrorKind::kData, "metrics: class index out of range");
    ++support[y];
    if (y == p) {
      ++tp[y];
      ++correct;
    } else {
      ++fp[p];
      ++fn[y];
    }
  }
  Metrics m;
  m.count = labels.size();
  m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  m.per_class_f1.resize(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    double f1 = denom ? 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom) : 0.0;
    m.per_class_f1[c] = f1;
    m.macro_f1 += f1 / static_cast<double>(n_classes);
    m.weighted_f1 += f1 * static_cast<double>(support[c]) / static_cast<double>(labels.size());
  }
  return m;
}

}  // namespace casd
