#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace gradbal {

/// K x K counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;

  std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
  std::size_t total() const;
  std::size_t trace() const;
};

/// Throws LabelError on labels outside [0, K), ConfigError on length mismatch
/// or empty input.
ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred,
                          std::size_t classes = 3);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  std::size_t support = 0;
};

/// F-beta from counts: (1 + b^2) TP / ((1 + b^2) TP + b^2 FN + FP); 0/0 -> 0.
double fbeta_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, double beta);

std::vector<ClassScores> per_class_prf(const ConfusionMatrix& matrix);

struct AveragedScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const AveragedScores&, const AveragedScores&) = default;
};

/// Weighted / macro / micro blocks plus the mean of all 15 values.
struct MetricsReport {
  AveragedScores weighted;
  AveragedScores macro;
  AveragedScores micro;
  double mean_of_15 = 0.0;

  /// Weighted (P, R, F1, F2, Acc), then macro, then micro.
  std::array<double, 15> values() const;
  static MetricsReport from_values(const std::array<double, 15>& values);

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

double mean_of_15(const std::array<double, 15>& values);

/// Weighted and macro "accuracy" are support-weighted and unweighted mean
/// recall (overall and balanced accuracy); micro accuracy is trace / total.
MetricsReport report(const ConfusionMatrix& matrix);
MetricsReport report(std::span<const int> y_true, std::span<const int> y_pred,
                     std::size_t classes = 3);

}  // namespace gradbal
