#pragma once

#include <string>
#include <vector>

#include "pldp/matrix.hpp"

namespace pldp {

// Classification scorecard. All percentages are in [0, 100].
struct MetricsReport {
  std::vector<std::vector<int64_t>> confusion;  // rows = true, cols = predicted
  double top1 = 0.0;
  double top2 = 0.0;
  double f1_macro = 0.0;
  double sensitivity_macro = 0.0;
  double specificity_macro = 0.0;
  int64_t n_samples = 0;
  // Set when any per-class rate hit a 0/0 and was scored as 0.
  bool had_degenerate_class = false;

  std::string to_json() const;  // field names match the keys above
};

// One-vs-rest decomposition of one class of a confusion matrix.
struct ClassRates {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Counts entry (i, j) = samples with true label i predicted j.
std::vector<std::vector<int64_t>> confusion_matrix(const std::vector<int>& true_labels,
                                                   const std::vector<int>& predicted_labels, int k);

// Percent of rows whose true label appears among the k_top highest scores;
// ties rank the lower class index first. Rows are probability vectors.
double top_k_accuracy(const Matrix& probabilities, const std::vector<int>& true_labels, int k_top);

std::vector<ClassRates> per_class_rates(const std::vector<std::vector<int64_t>>& confusion);

// Macro-averaged F1 / sensitivity / specificity from a confusion matrix;
// divisions by zero score 0 for that class and set the degenerate flag.
// top1/top2 are filled by evaluate_classifier, not here.
MetricsReport summary_metrics(const std::vector<std::vector<int64_t>>& confusion);

// Full report from probability rows: confusion from argmax predictions,
// top-1/top-2 accuracy, macro summary stats.
MetricsReport evaluate_predictions(const Matrix& probabilities, const std::vector<int>& true_labels);

// Argmax with ties to the lower index.
int argmax_row(const double* row, int k);

}  // namespace pldp
