#pragma once

#include <string>
#include <vector>

namespace echopipe {

/// Single-fold classification scores. Weighted scores weight each class by its
/// support in y_true.
struct FoldMetrics {
  double auroc_ovo = 0.0;
  double f1_weighted = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double balanced_accuracy = 0.0;
  double confidence_mean = 0.0;
  std::vector<std::string> warnings;
};

/// counts[t][p] for t, p in [0, num_classes).
std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                                       int num_classes);

struct WeightedScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Support-weighted precision, recall and F1. A class never predicted has precision 0.
WeightedScores weighted_scores(const std::vector<int>& y_true, const std::vector<int>& y_pred, int num_classes);

/// Mean per-class recall over classes present in y_true. Absent classes are
/// skipped and reported through `warnings` when given.
double balanced_accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred, int num_classes,
                         std::vector<std::string>* warnings = nullptr);

/// Probability that a random positive scores above a random negative (ties count half).
double binary_auc(const std::vector<double>& positive_scores, const std::vector<double>& negative_scores);

/// One-vs-one AUROC: for each unordered pair of classes present in y_true, the mean
/// of AUC(a vs b on p_a) and AUC(b vs a on p_b); then the unweighted mean over pairs.
/// NaN when fewer than two classes are present.
double auroc_ovo(const std::vector<int>& y_true, const std::vector<std::vector<double>>& probs, int num_classes);

FoldMetrics compute_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                            const std::vector<std::vector<double>>& probs, int num_classes);

/// Average (fractional) ranks, 1-based; ties share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values);

/// Pearson correlation of average ranks. Identical inputs give 1; a constant
/// input that differs from the other gives 0.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

/// NaN entries are skipped; NaN when nothing remains.
MeanStd mean_std(const std::vector<double>& values);

}  // namespace echopipe
