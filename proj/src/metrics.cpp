#include "echopipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "echopipe/error.hpp"

namespace echopipe {
namespace {

void check_labels(const std::vector<int>& y, int num_classes, const char* what) {
  for (int v : y) {
    if (v < 0 || v >= num_classes) throw Error(std::string(what) + " contains a label outside [0, num_classes)");
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                                       int num_classes) {
  if (y_true.size() != y_pred.size()) throw Error("y_true and y_pred have different lengths");
  check_labels(y_true, num_classes, "y_true");
  check_labels(y_pred, num_classes, "y_pred");
  std::vector<std::vector<std::size_t>> m(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) ++m[y_true[i]][y_pred[i]];
  return m;
}

WeightedScores weighted_scores(const std::vector<int>& y_true, const std::vector<int>& y_pred, int num_classes) {
  const auto m = confusion_matrix(y_true, y_pred, num_classes);
  WeightedScores out;
  if (y_true.empty()) return out;
  const double n = static_cast<double>(y_true.size());
  for (int c = 0; c < num_classes; ++c) {
    double tp = static_cast<double>(m[c][c]), support = 0.0, predicted = 0.0;
    for (int k = 0; k < num_classes; ++k) {
      support += static_cast<double>(m[c][k]);
      predicted += static_cast<double>(m[k][c]);
    }
    if (support == 0.0) continue;
    const double precision = predicted > 0.0 ? tp / predicted : 0.0;
    const double recall = tp / support;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    const double w = support / n;
    out.precision += w * precision;
    out.recall += w * recall;
    out.f1 += w * f1;
  }
  return out;
}

double balanced_accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred, int num_classes,
                         std::vector<std::string>* warnings) {
  const auto m = confusion_matrix(y_true, y_pred, num_classes);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double support = static_cast<double>(std::accumulate(m[c].begin(), m[c].end(), std::size_t{0}));
    if (support == 0.0) {
      if (warnings) warnings->push_back("class " + std::to_string(c) + " absent from y_true; excluded from balanced accuracy");
      continue;
    }
    sum += static_cast<double>(m[c][c]) / support;
    ++present;
  }
  return present > 0 ? sum / present : std::numeric_limits<double>::quiet_NaN();
}

double binary_auc(const std::vector<double>& positive_scores, const std::vector<double>& negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) return std::numeric_limits<double>::quiet_NaN();
  // Mann-Whitney U through the pooled ranks.
  std::vector<double> pooled(positive_scores);
  pooled.insert(pooled.end(), negative_scores.begin(), negative_scores.end());
  const auto ranks = average_ranks(pooled);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < positive_scores.size(); ++i) rank_sum += ranks[i];
  const double np = static_cast<double>(positive_scores.size());
  const double nn = static_cast<double>(negative_scores.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auroc_ovo(const std::vector<int>& y_true, const std::vector<std::vector<double>>& probs, int num_classes) {
  if (probs.size() != y_true.size()) throw Error("auroc_ovo: y_true and probs have different lengths");
  check_labels(y_true, num_classes, "y_true");
  for (const auto& row : probs) {
    if (row.size() != static_cast<std::size_t>(num_classes)) throw Error("auroc_ovo: probability row has wrong length");
  }
  std::vector<int> present;
  for (int c = 0; c < num_classes; ++c) {
    if (std::find(y_true.begin(), y_true.end(), c) != y_true.end()) present.push_back(c);
  }
  if (present.size() < 2) return std::numeric_limits<double>::quiet_NaN();

  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < present.size(); ++i) {
    for (std::size_t j = i + 1; j < present.size(); ++j) {
      const int a = present[i], b = present[j];
      std::vector<double> a_on_a, b_on_a, a_on_b, b_on_b;
      for (std::size_t s = 0; s < y_true.size(); ++s) {
        if (y_true[s] == a) {
          a_on_a.push_back(probs[s][a]);
          a_on_b.push_back(probs[s][b]);
        } else if (y_true[s] == b) {
          b_on_a.push_back(probs[s][a]);
          b_on_b.push_back(probs[s][b]);
        }
      }
      total += 0.5 * (binary_auc(a_on_a, b_on_a) + binary_auc(b_on_b, a_on_b));
      ++pairs;
    }
  }
  return total / pairs;
}

FoldMetrics compute_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                            const std::vector<std::vector<double>>& probs, int num_classes) {
  for (const auto& row : probs) {
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    if (std::abs(s - 1.0) > 1e-4) throw Error("compute_metrics: probability rows must sum to 1");
  }
  FoldMetrics out;
  const auto w = weighted_scores(y_true, y_pred, num_classes);
  out.precision_weighted = w.precision;
  out.recall_weighted = w.recall;
  out.f1_weighted = w.f1;
  out.balanced_accuracy = balanced_accuracy(y_true, y_pred, num_classes, &out.warnings);
  out.auroc_ovo = auroc_ovo(y_true, probs, num_classes);
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("spearman: inputs have different lengths");
  if (a.empty()) throw Error("spearman: empty input");
  if (a == b) return 1.0;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

MeanStd mean_std(const std::vector<double>& values) {
  std::vector<double> finite;
  for (double v : values) {
    if (!std::isnan(v)) finite.push_back(v);
  }
  if (finite.empty()) return {std::nan(""), std::nan("")};
  MeanStd out;
  const double n = static_cast<double>(finite.size());
  out.mean = std::accumulate(finite.begin(), finite.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : finite) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / n);
  return out;
}

}  // namespace echopipe
