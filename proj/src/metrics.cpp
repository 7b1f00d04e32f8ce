#include "pldp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pldp/error.hpp"

namespace pldp {

std::vector<std::vector<int64_t>> confusion_matrix(const std::vector<int>& true_labels,
                                                   const std::vector<int>& predicted_labels, int k) {
  if (k < 1) throw ConfigError("confusion matrix needs k >= 1, got " + std::to_string(k));
  if (true_labels.size() != predicted_labels.size()) {
    throw DimensionError("label lists differ in length: " + std::to_string(true_labels.size()) +
                         " vs " + std::to_string(predicted_labels.size()));
  }
  std::vector<std::vector<int64_t>> m(static_cast<size_t>(k), std::vector<int64_t>(static_cast<size_t>(k), 0));
  for (size_t i = 0; i < true_labels.size(); ++i) {
    int t = true_labels[i];
    int p = predicted_labels[i];
    if (t < 0 || t >= k) throw LabelError("true label " + std::to_string(t) + " outside [0, " + std::to_string(k) + ")");
    if (p < 0 || p >= k) throw LabelError("predicted label " + std::to_string(p) + " outside [0, " + std::to_string(k) + ")");
    m[static_cast<size_t>(t)][static_cast<size_t>(p)]++;
  }
  return m;
}

int argmax_row(const double* row, int k) {
  int best = 0;
  for (int j = 1; j < k; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

double top_k_accuracy(const Matrix& probabilities, const std::vector<int>& true_labels, int k_top) {
  const int n = probabilities.rows;
  const int k = probabilities.cols;
  if (k_top < 1 || k_top > k) {
    throw ConfigError("k_top must lie in [1, " + std::to_string(k) + "], got " + std::to_string(k_top));
  }
  if (static_cast<int>(true_labels.size()) != n) {
    throw DimensionError("expected " + std::to_string(n) + " labels, got " + std::to_string(true_labels.size()));
  }
  if (n == 0) throw EmptyInputError("top-k accuracy over zero samples");
  int64_t hits = 0;
  std::vector<int> order(static_cast<size_t>(k));
  for (int i = 0; i < n; ++i) {
    int t = true_labels[static_cast<size_t>(i)];
    if (t < 0 || t >= k) throw LabelError("label " + std::to_string(t) + " outside [0, " + std::to_string(k) + ")");
    double row_sum = 0.0;
    for (int j = 0; j < k; ++j) row_sum += probabilities.at(i, j);
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw ConfigError("probability row " + std::to_string(i) + " sums to " + std::to_string(row_sum) +
                        ", expected 1");
    }
    for (int j = 0; j < k; ++j) order[static_cast<size_t>(j)] = j;
    // Descending by score; equal scores keep the lower class index first.
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return probabilities.at(i, a) > probabilities.at(i, b);
    });
    for (int r = 0; r < k_top; ++r) {
      if (order[static_cast<size_t>(r)] == t) {
        ++hits;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<ClassRates> per_class_rates(const std::vector<std::vector<int64_t>>& confusion) {
  const size_t k = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != k) throw DimensionError("confusion matrix must be square");
  }
  int64_t total = 0;
  for (const auto& row : confusion) {
    for (int64_t v : row) total += v;
  }
  std::vector<ClassRates> rates(k);
  for (size_t c = 0; c < k; ++c) {
    ClassRates& r = rates[c];
    r.tp = confusion[c][c];
    for (size_t j = 0; j < k; ++j) {
      if (j != c) {
        r.fn += confusion[c][j];   // true c, predicted elsewhere
        r.fp += confusion[j][c];   // predicted c, true elsewhere
      }
    }
    r.tn = total - r.tp - r.fp - r.fn;
  }
  return rates;
}

MetricsReport summary_metrics(const std::vector<std::vector<int64_t>>& confusion) {
  if (confusion.empty()) throw EmptyInputError("empty confusion matrix");
  std::vector<ClassRates> rates = per_class_rates(confusion);
  int64_t total = 0;
  for (const auto& row : confusion) {
    for (int64_t v : row) total += v;
  }
  if (total < 1) throw EmptyInputError("confusion matrix counts no samples");

  MetricsReport rep;
  rep.confusion = confusion;
  rep.n_samples = total;
  double f1_sum = 0.0, sens_sum = 0.0, spec_sum = 0.0;
  for (const ClassRates& r : rates) {
    auto safe_div = [&rep](double num, double den) {
      if (den == 0.0) {
        rep.had_degenerate_class = true;
        return 0.0;
      }
      return num / den;
    };
    double precision = safe_div(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fp));
    double recall = safe_div(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fn));
    double specificity = safe_div(static_cast<double>(r.tn), static_cast<double>(r.tn + r.fp));
    double f1 = safe_div(2.0 * precision * recall, precision + recall);
    f1_sum += f1;
    sens_sum += recall;
    spec_sum += specificity;
  }
  const double k = static_cast<double>(rates.size());
  rep.f1_macro = 100.0 * f1_sum / k;
  rep.sensitivity_macro = 100.0 * sens_sum / k;
  rep.specificity_macro = 100.0 * spec_sum / k;
  return rep;
}

MetricsReport evaluate_predictions(const Matrix& probabilities, const std::vector<int>& true_labels) {
  const int n = probabilities.rows;
  const int k = probabilities.cols;
  if (n == 0) throw EmptyInputError("no predictions to evaluate");
  std::vector<int> preds(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) preds[static_cast<size_t>(i)] = argmax_row(probabilities.row(i), k);
  MetricsReport rep = summary_metrics(confusion_matrix(true_labels, preds, k));
  rep.top1 = top_k_accuracy(probabilities, true_labels, 1);
  rep.top2 = top_k_accuracy(probabilities, true_labels, std::min(2, k));
  // Widening the candidate set can only help, so a drop means the ranking
  // logic itself broke; fail loudly rather than emit nonsense.
  if (rep.top2 < rep.top1)
    throw Error("top-2 accuracy " + std::to_string(rep.top2) + " fell below top-1 " +
                std::to_string(rep.top1));
  return rep;
}

std::string MetricsReport::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\n  \"confusion\": [";
  for (size_t i = 0; i < confusion.size(); ++i) {
    os << (i == 0 ? "" : ", ") << "[";
    for (size_t j = 0; j < confusion[i].size(); ++j) {
      os << (j == 0 ? "" : ", ") << confusion[i][j];
    }
    os << "]";
  }
  os << "],\n";
  os << "  \"top1\": " << top1 << ",\n";
  os << "  \"top2\": " << top2 << ",\n";
  os << "  \"f1_macro\": " << f1_macro << ",\n";
  os << "  \"sensitivity_macro\": " << sensitivity_macro << ",\n";
  os << "  \"specificity_macro\": " << specificity_macro << ",\n";
  os << "  \"n_samples\": " << n_samples << "\n}";
  return os.str();
}

}  // namespace pldp
