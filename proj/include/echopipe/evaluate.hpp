#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "echopipe/augment.hpp"
#include "echopipe/labels.hpp"
#include "echopipe/manifest.hpp"
#include "echopipe/metrics.hpp"
#include "echopipe/network.hpp"
#include "echopipe/preprocess.hpp"
#include "echopipe/sampling.hpp"
#include "echopipe/train.hpp"

namespace echopipe {

struct FoldSpec {
  std::size_t fold_index = 0;
  std::vector<std::string> train_patient_ids;
  std::vector<std::string> validation_patient_ids;
};

enum class SplitScheme {
  ShuffleSplit,  // k independent stratified train/validation shuffles
  Partition      // classical stratified k-fold partition
};

std::string_view to_string(SplitScheme s) noexcept;
std::optional<SplitScheme> parse_split_scheme(std::string_view text) noexcept;

struct EvalConfig {
  std::size_t folds = 10;
  SplitScheme scheme = SplitScheme::ShuffleSplit;
  double validation_fraction = 0.2;
  TaskMode mode = TaskMode::Severity;
  std::vector<ViewTag> views = {kAllViews.begin(), kAllViews.end()};

  void validate() const;
};

/// Validation quota per class: round(fraction * N) patients in total, split over
/// classes in proportion to their size by largest remainder (ties to the lower class).
std::vector<std::size_t> stratified_quotas(const std::vector<std::size_t>& class_sizes, double validation_fraction);

/// Patient-level stratified folds. Labels are mapped into the task's label space.
/// Throws naming the class when any class has fewer than two patients.
std::vector<FoldSpec> stratified_patient_kfold(const std::map<std::string, SeverityLabel>& patient_labels,
                                               std::size_t k, std::uint64_t seed, TaskMode mode = TaskMode::Severity,
                                               SplitScheme scheme = SplitScheme::ShuffleSplit,
                                               double validation_fraction = 0.2);
std::vector<FoldSpec> stratified_patient_kfold(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed,
                                               TaskMode mode = TaskMode::Severity,
                                               SplitScheme scheme = SplitScheme::ShuffleSplit,
                                               double validation_fraction = 0.2);

/// Patient label = maximum severity over the patient's videos.
std::map<std::string, SeverityLabel> patient_labels_of(const std::vector<EchoVideo>& videos);

struct RowSummary {
  std::string name;
  std::vector<FoldMetrics> per_fold;
  /// Mean and population std over folds, skipping NaN fold values.
  MeanStd auroc_ovo, f1_weighted, precision_weighted, recall_weighted, balanced_accuracy, confidence_mean;
};

struct FoldOutcome {
  FoldSpec spec;
  std::map<std::string, std::size_t> selected_epochs;  // per view
  std::vector<PatientPrediction> mv_all;                // per validation patient
};

struct CvReport {
  TaskMode mode = TaskMode::Severity;
  std::string config_json;
  std::vector<FoldOutcome> folds;
  std::vector<RowSummary> rows;

  const RowSummary& row(const std::string& name) const;
};

struct CvHooks {
  /// Called after each model is trained, with the validation videos of its view.
  std::function<void(std::size_t fold, ViewTag view, Model<float>& model, const std::vector<EchoVideo>& validation)>
      on_model;
  /// When set, each selected model is saved as fold<i>_<VIEW>.ckpt here.
  std::optional<std::filesystem::path> checkpoint_dir;
  bool verbose = false;
};

/// Trains one model per view per fold on canonical videos and scores per-view,
/// MV-3 (PLAX, A4C, PSAX_P) and MV-All rows on the validation patients.
CvReport cross_validate(const std::vector<EchoVideo>& videos, const EvalConfig& eval, const ModelConfig& model,
                        const TrainConfig& train_config, const ClipConfig& clips, const AugmentConfig& augment,
                        std::uint64_t seed, const CvHooks& hooks = {}, const std::string& config_json = "{}");

/// Per-model seed derived from the run seed, fold and view.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t fold, std::uint64_t view);

std::string report_to_json(const CvReport& report);
std::string report_table(const CvReport& report);

}  // namespace echopipe
