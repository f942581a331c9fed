#pragma once

#include <string>
#include <vector>

#include "echopipe/labels.hpp"

namespace echopipe {

/// Clip votes reduced to one label per ECHO video. Labels are class indices in
/// the task's label space; a higher index is the more severe class.
struct ViewPrediction {
  ViewTag view = ViewTag::PLAX;
  int label = 0;
  /// plurality count / number of clips
  double confidence = 0.0;
  std::size_t vote_count = 0;
  std::vector<int> clip_labels;
  /// Mean probability vector over the clips that voted for `label`.
  std::vector<double> representative_probs;
};

struct PatientPrediction {
  std::string patient_id;
  int label = 0;
  std::vector<ViewPrediction> contributing_views;
  bool tie_broken = false;
  ViewTag winning_view = ViewTag::PLAX;
  /// Confidence of the winning view.
  double confidence = 0.0;
};

/// Argmax of each probability row (first maximum wins).
int argmax(const std::vector<double>& probs);

/// Plurality over clip labels. A tie goes to the class with the higher mean
/// probability over its own supporting clips, then to the more severe class.
ViewPrediction view_vote(const std::vector<int>& clip_labels, const std::vector<std::vector<double>>& clip_probs,
                         ViewTag view = ViewTag::PLAX);

/// Same, with labels taken as the argmax of each probability row.
ViewPrediction view_vote(const std::vector<std::vector<double>>& clip_probs, ViewTag view = ViewTag::PLAX);

/// Plurality over view labels. On a tie, the tied label whose supporting views
/// hold the single highest confidence wins; equal maxima go to the more severe label.
PatientPrediction patient_vote(const std::vector<ViewPrediction>& views, const std::string& patient_id = "");

/// Representative probabilities of the most confident view backing the patient
/// label. Equal confidences fall back to the fixed view order, then input order.
std::vector<double> multi_view_probs(const std::vector<ViewPrediction>& views);

}  // namespace echopipe
