#include "echopipe/aggregate.hpp"

#include <algorithm>
#include <map>

#include "echopipe/error.hpp"

namespace echopipe {
namespace {

// Index of the winning view among those voting `label`.
std::size_t most_confident(const std::vector<ViewPrediction>& views, int label) {
  std::size_t best = views.size();
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].label != label) continue;
    if (best == views.size() || views[i].confidence > views[best].confidence ||
        (views[i].confidence == views[best].confidence && views[i].view < views[best].view)) {
      best = i;
    }
  }
  return best;
}

}  // namespace

int argmax(const std::vector<double>& probs) {
  if (probs.empty()) throw Error("argmax of an empty probability vector");
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

ViewPrediction view_vote(const std::vector<int>& clip_labels, const std::vector<std::vector<double>>& clip_probs,
                         ViewTag view) {
  if (clip_labels.empty()) throw Error("view_vote: no clip predictions");
  if (clip_probs.size() != clip_labels.size()) throw Error("view_vote: labels and probabilities are not aligned");
  const std::size_t C = clip_probs.front().size();
  for (const auto& p : clip_probs) {
    if (p.size() != C) throw Error("view_vote: probability rows have different lengths");
  }
  for (int l : clip_labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= C) throw Error("view_vote: clip label out of range");
  }

  std::vector<std::size_t> counts(C, 0);
  std::vector<double> mean(C, 0.0);
  for (std::size_t i = 0; i < clip_labels.size(); ++i) {
    const auto l = static_cast<std::size_t>(clip_labels[i]);
    ++counts[l];
    mean[l] += clip_probs[i][l];
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (counts[c] > 0) mean[c] /= static_cast<double>(counts[c]);
  }

  std::size_t winner = 0;
  for (std::size_t c = 1; c < C; ++c) {
    if (counts[c] > counts[winner] || (counts[c] == counts[winner] && counts[c] > 0 && mean[c] >= mean[winner])) {
      winner = c;
    }
  }

  ViewPrediction out;
  out.view = view;
  out.label = static_cast<int>(winner);
  out.vote_count = counts[winner];
  out.confidence = static_cast<double>(counts[winner]) / static_cast<double>(clip_labels.size());
  out.clip_labels = clip_labels;
  out.representative_probs.assign(C, 0.0);
  for (std::size_t i = 0; i < clip_labels.size(); ++i) {
    if (static_cast<std::size_t>(clip_labels[i]) != winner) continue;
    for (std::size_t c = 0; c < C; ++c) out.representative_probs[c] += clip_probs[i][c];
  }
  for (auto& v : out.representative_probs) v /= static_cast<double>(counts[winner]);
  return out;
}

ViewPrediction view_vote(const std::vector<std::vector<double>>& clip_probs, ViewTag view) {
  std::vector<int> labels;
  labels.reserve(clip_probs.size());
  for (const auto& p : clip_probs) labels.push_back(argmax(p));
  return view_vote(labels, clip_probs, view);
}

PatientPrediction patient_vote(const std::vector<ViewPrediction>& views, const std::string& patient_id) {
  if (views.empty()) throw Error("patient_vote: no view predictions");
  std::map<int, std::size_t> counts;
  std::map<int, double> top_confidence;
  for (const auto& v : views) {
    ++counts[v.label];
    auto [it, inserted] = top_confidence.emplace(v.label, v.confidence);
    if (!inserted) it->second = std::max(it->second, v.confidence);
  }
  std::size_t plurality = 0;
  for (const auto& [label, n] : counts) plurality = std::max(plurality, n);
  std::vector<int> tied;
  for (const auto& [label, n] : counts) {
    if (n == plurality) tied.push_back(label);
  }

  // `tied` is ascending, so >= prefers the more severe label on equal confidence.
  int label = tied.front();
  for (int l : tied) {
    if (top_confidence[l] >= top_confidence[label]) label = l;
  }

  PatientPrediction out;
  out.patient_id = patient_id;
  out.label = label;
  out.contributing_views = views;
  out.tie_broken = tied.size() > 1;
  const std::size_t win = most_confident(views, label);
  out.winning_view = views[win].view;
  out.confidence = views[win].confidence;
  return out;
}

std::vector<double> multi_view_probs(const std::vector<ViewPrediction>& views) {
  const PatientPrediction p = patient_vote(views);
  return views[most_confident(views, p.label)].representative_probs;
}

}  // namespace echopipe
