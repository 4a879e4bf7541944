#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace casd {

struct Metrics {
  std::vector<double> per_class_f1;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;  // support-weighted
  double accuracy = 0.0;
  std::size_t count = 0;
};

// Per-class F1 = 2TP/(2TP+FP+FN); a class with no support and no
// predictions scores 0.
Metrics compute_metrics(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                        std::size_t n_classes);

}  // namespace casd
