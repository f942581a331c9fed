#include "echopipe/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "echopipe/checkpoint.hpp"
#include "echopipe/config.hpp"
#include "echopipe/error.hpp"
#include "echopipe/rng.hpp"

namespace echopipe {
namespace {

RowSummary summarize(const std::string& name, std::vector<FoldMetrics> per_fold) {
  RowSummary row;
  row.name = name;
  const auto collect = [&](double FoldMetrics::*field) {
    std::vector<double> v;
    for (const auto& f : per_fold) v.push_back(f.*field);
    return mean_std(v);
  };
  row.auroc_ovo = collect(&FoldMetrics::auroc_ovo);
  row.f1_weighted = collect(&FoldMetrics::f1_weighted);
  row.precision_weighted = collect(&FoldMetrics::precision_weighted);
  row.recall_weighted = collect(&FoldMetrics::recall_weighted);
  row.balanced_accuracy = collect(&FoldMetrics::balanced_accuracy);
  row.confidence_mean = collect(&FoldMetrics::confidence_mean);
  row.per_fold = std::move(per_fold);
  return row;
}

Json metrics_json(const FoldMetrics& m) {
  Json j;
  j["auroc_ovo"] = m.auroc_ovo;
  j["f1_weighted"] = m.f1_weighted;
  j["precision_weighted"] = m.precision_weighted;
  j["recall_weighted"] = m.recall_weighted;
  j["balanced_accuracy"] = m.balanced_accuracy;
  j["confidence_mean"] = m.confidence_mean;
  if (!m.warnings.empty()) j["warnings"] = m.warnings;
  return j;
}

Json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

// Folds over views of one patient set; each contributing video is one voter.
FoldMetrics score_multi_view(const std::map<std::string, std::vector<ViewPrediction>>& by_patient,
                             const std::map<std::string, SeverityLabel>& labels, const std::vector<ViewTag>& subset,
                             TaskMode mode, std::vector<PatientPrediction>* keep) {
  std::vector<int> y_true, y_pred;
  std::vector<std::vector<double>> probs;
  std::vector<double> confidence;
  for (const auto& [patient, views] : by_patient) {
    std::vector<ViewPrediction> chosen;
    for (const auto& v : views) {
      if (std::find(subset.begin(), subset.end(), v.view) != subset.end()) chosen.push_back(v);
    }
    if (chosen.empty()) continue;
    PatientPrediction p = patient_vote(chosen, patient);
    y_true.push_back(class_index(labels.at(patient), mode));
    y_pred.push_back(p.label);
    probs.push_back(multi_view_probs(chosen));
    confidence.push_back(p.confidence);
    if (keep) keep->push_back(std::move(p));
  }
  FoldMetrics m;
  if (y_true.empty()) {
    m.auroc_ovo = m.f1_weighted = m.precision_weighted = m.recall_weighted = m.balanced_accuracy =
        m.confidence_mean = std::nan("");
    return m;
  }
  m = compute_metrics(y_true, y_pred, probs, num_classes(mode));
  m.confidence_mean = mean_std(confidence).mean;
  return m;
}

// Patients per (fold, class) for a k-fold partition. Fold sizes differ by at most
// one and every cell is the floor or ceiling of n_c * s_f / N; such a table always
// exists because both margins are integers. The ceilings are placed by max-flow.
std::vector<std::vector<std::size_t>> partition_counts(const std::vector<std::size_t>& class_sizes, std::size_t k) {
  const std::size_t C = class_sizes.size();
  const std::size_t N = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(C, 0));
  // Nodes: source, folds, classes, sink.
  const std::size_t src = 0, sink = k + C + 1, V = k + C + 2;
  std::vector<std::vector<long>> cap(V, std::vector<long>(V, 0));
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t s_f = N / k + (f < N % k ? 1 : 0);
    std::size_t row = 0;
    for (std::size_t c = 0; c < C; ++c) {
      counts[f][c] = class_sizes[c] * s_f / N;
      row += counts[f][c];
      if (class_sizes[c] * s_f % N != 0) cap[1 + f][1 + k + c] = 1;
    }
    cap[src][1 + f] = static_cast<long>(s_f - row);
  }
  long need = 0;
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t col = 0;
    for (std::size_t f = 0; f < k; ++f) col += counts[f][c];
    cap[1 + k + c][sink] = static_cast<long>(class_sizes[c] - col);
    need += cap[1 + k + c][sink];
  }
  long flow = 0;
  while (true) {
    std::vector<std::size_t> parent(V, V);
    parent[src] = src;
    std::vector<std::size_t> queue = {src};
    for (std::size_t qi = 0; qi < queue.size() && parent[sink] == V; ++qi) {
      for (std::size_t v = 0; v < V; ++v) {
        if (parent[v] == V && cap[queue[qi]][v] > 0) {
          parent[v] = queue[qi];
          queue.push_back(v);
        }
      }
    }
    if (parent[sink] == V) break;
    for (std::size_t v = sink; v != src; v = parent[v]) {
      --cap[parent[v]][v];
      ++cap[v][parent[v]];
    }
    ++flow;
  }
  if (flow != need) throw Error("partition: no consistent fold allocation");
  // Used fold -> class edges show up as reverse capacity.
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t c = 0; c < C; ++c) counts[f][c] += static_cast<std::size_t>(cap[1 + k + c][1 + f]);
  }
  return counts;
}

}  // namespace

std::string_view to_string(SplitScheme s) noexcept {
  return s == SplitScheme::Partition ? "partition" : "shuffle_split";
}

std::optional<SplitScheme> parse_split_scheme(std::string_view text) noexcept {
  if (text == "shuffle_split") return SplitScheme::ShuffleSplit;
  if (text == "partition") return SplitScheme::Partition;
  return std::nullopt;
}

void EvalConfig::validate() const {
  if (folds < 1) throw ConfigError("eval folds must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("eval validation_fraction must be in (0, 1)");
  }
  if (views.empty()) throw ConfigError("eval views must not be empty");
  const std::set<ViewTag> unique(views.begin(), views.end());
  if (unique.size() != views.size()) throw ConfigError("eval views contain duplicates");
}

std::vector<std::size_t> stratified_quotas(const std::vector<std::size_t>& class_sizes, double validation_fraction) {
  const std::size_t total = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  if (total == 0) return std::vector<std::size_t>(class_sizes.size(), 0);
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(total)));
  std::vector<std::size_t> quota(class_sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const double exact = static_cast<double>(n_val) * static_cast<double>(class_sizes[c]) / static_cast<double>(total);
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n_val && i < remainders.size(); ++i, ++assigned) ++quota[remainders[i].second];
  return quota;
}

std::vector<FoldSpec> stratified_patient_kfold(const std::map<std::string, SeverityLabel>& patient_labels,
                                               std::size_t k, std::uint64_t seed, TaskMode mode, SplitScheme scheme,
                                               double validation_fraction) {
  if (k < 1) throw Error("k must be >= 1");
  const int C = num_classes(mode);
  std::vector<std::vector<std::string>> by_class(static_cast<std::size_t>(C));
  for (const auto& [patient, label] : patient_labels) by_class[class_index(label, mode)].push_back(patient);
  for (int c = 0; c < C; ++c) {
    if (by_class[c].size() < 2) {
      const std::string name = mode == TaskMode::Binary ? (c == 0 ? "NoPH" : "PH")
                                                        : std::string(to_string(static_cast<SeverityLabel>(c)));
      throw Error("class " + name + " has " + std::to_string(by_class[c].size()) +
                  " patient(s); stratified splitting needs at least 2");
    }
  }
  if (scheme == SplitScheme::Partition && k < 2) throw Error("partitioned k-fold needs k >= 2");

  std::vector<FoldSpec> folds(k);
  for (std::size_t f = 0; f < k; ++f) folds[f].fold_index = f;

  if (scheme == SplitScheme::ShuffleSplit) {
    std::vector<std::size_t> sizes;
    for (const auto& members : by_class) sizes.push_back(members.size());
    const auto quota = stratified_quotas(sizes, validation_fraction);
    for (std::size_t f = 0; f < k; ++f) {
      auto rng = seeded_rng({seed, static_cast<std::uint64_t>(f), 0xF01D});
      for (int c = 0; c < C; ++c) {
        auto members = by_class[c];
        std::shuffle(members.begin(), members.end(), rng);
        const std::size_t q = std::min(quota[c], members.size() - 1);
        for (std::size_t i = 0; i < members.size(); ++i) {
          (i < q ? folds[f].validation_patient_ids : folds[f].train_patient_ids).push_back(members[i]);
        }
      }
    }
  } else {
    std::vector<std::size_t> sizes;
    for (const auto& members : by_class) sizes.push_back(members.size());
    const auto counts = partition_counts(sizes, k);
    auto rng = seeded_rng({seed, 0xF01D});
    for (int c = 0; c < C; ++c) {
      auto members = by_class[c];
      std::shuffle(members.begin(), members.end(), rng);
      std::size_t pos = 0;
      for (std::size_t f = 0; f < k; ++f) {
        const std::size_t end = pos + counts[f][static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < members.size(); ++i) {
          (i >= pos && i < end ? folds[f].validation_patient_ids : folds[f].train_patient_ids).push_back(members[i]);
        }
        pos = end;
      }
    }
  }
  for (auto& f : folds) {
    std::sort(f.train_patient_ids.begin(), f.train_patient_ids.end());
    std::sort(f.validation_patient_ids.begin(), f.validation_patient_ids.end());
  }
  return folds;
}

std::vector<FoldSpec> stratified_patient_kfold(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed,
                                               TaskMode mode, SplitScheme scheme, double validation_fraction) {
  return stratified_patient_kfold(manifest.patient_labels(), k, seed, mode, scheme, validation_fraction);
}

std::map<std::string, SeverityLabel> patient_labels_of(const std::vector<EchoVideo>& videos) {
  std::map<std::string, SeverityLabel> out;
  for (const auto& v : videos) {
    auto [it, inserted] = out.emplace(v.patient_id, v.label);
    if (!inserted && v.label > it->second) it->second = v.label;
  }
  return out;
}

const RowSummary& CvReport::row(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw Error("report has no row '" + name + "'");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t fold, std::uint64_t view) {
  auto rng = seeded_rng({seed, fold, view, 0x5EED});
  return rng();
}

CvReport cross_validate(const std::vector<EchoVideo>& videos, const EvalConfig& eval, const ModelConfig& model_config,
                        const TrainConfig& train_config, const ClipConfig& clips, const AugmentConfig& augment,
                        std::uint64_t seed, const CvHooks& hooks, const std::string& config_json) {
  eval.validate();
  const auto labels = patient_labels_of(videos);
  for (ViewTag v : eval.views) {
    if (std::none_of(videos.begin(), videos.end(), [&](const EchoVideo& e) { return e.view == v; })) {
      throw Error("no videos for requested view " + std::string(to_string(v)));
    }
  }
  const auto specs = stratified_patient_kfold(labels, eval.folds, seed, eval.mode, eval.scheme,
                                              eval.validation_fraction);
  const int C = num_classes(eval.mode);

  CvReport report;
  report.mode = eval.mode;
  report.config_json = config_json;
  std::map<ViewTag, std::vector<FoldMetrics>> per_view;
  std::vector<FoldMetrics> mv3, mv_all;
  const std::vector<ViewTag> mv3_views = [&] {
    std::vector<ViewTag> out;
    for (ViewTag v : {ViewTag::PLAX, ViewTag::A4C, ViewTag::PSAX_P}) {
      if (std::find(eval.views.begin(), eval.views.end(), v) != eval.views.end()) out.push_back(v);
    }
    return out;
  }();

  for (const auto& spec : specs) {
    FoldOutcome outcome;
    outcome.spec = spec;
    const std::set<std::string> train_ids(spec.train_patient_ids.begin(), spec.train_patient_ids.end());
    const std::set<std::string> val_ids(spec.validation_patient_ids.begin(), spec.validation_patient_ids.end());
    std::map<std::string, std::vector<ViewPrediction>> by_patient;

    for (ViewTag view : eval.views) {
      std::vector<EchoVideo> train_videos, val_videos;
      for (const auto& v : videos) {
        if (v.view != view) continue;
        if (train_ids.count(v.patient_id)) train_videos.push_back(v);
        if (val_ids.count(v.patient_id)) val_videos.push_back(v);
      }
      const std::uint64_t model_seed = derive_seed(seed, spec.fold_index, static_cast<std::uint64_t>(view));
      TrainConfig tc = train_config;
      tc.seed = model_seed;
      ModelConfig mc = model_config;
      mc.num_classes = C;
      if (hooks.verbose) {
        std::fprintf(stderr, "fold %zu view %s: %zu train / %zu validation videos\n", spec.fold_index + 1,
                     std::string(to_string(view)).c_str(), train_videos.size(), val_videos.size());
      }
      TrainResult trained = train(build_model<float>(mc, model_seed), train_videos, val_videos, eval.mode, tc, clips,
                                  augment);
      outcome.selected_epochs[std::string(to_string(view))] = trained.history.selected_epoch;

      std::vector<int> y_true, y_pred;
      std::vector<std::vector<double>> probs;
      std::vector<double> confidence;
      for (const auto& v : val_videos) {
        ViewPrediction p = predict_video(*trained.model, v, clips, tc.eval_seed);
        y_true.push_back(class_index(v.label, eval.mode));
        y_pred.push_back(p.label);
        probs.push_back(p.representative_probs);
        confidence.push_back(p.confidence);
        by_patient[v.patient_id].push_back(std::move(p));
      }
      FoldMetrics m = compute_metrics(y_true, y_pred, probs, C);
      m.confidence_mean = mean_std(confidence).mean;
      per_view[view].push_back(m);

      if (hooks.checkpoint_dir) {
        CheckpointMeta meta{model_seed, trained.history.selected_epoch, std::string(to_string(eval.mode)),
                            std::string(to_string(view))};
        save_checkpoint(*trained.model, meta,
                        *hooks.checkpoint_dir /
                            ("fold" + std::to_string(spec.fold_index) + "_" + std::string(to_string(view)) + ".ckpt"));
      }
      if (hooks.on_model) hooks.on_model(spec.fold_index, view, *trained.model, val_videos);
    }

    if (eval.views.size() >= 3) mv3.push_back(score_multi_view(by_patient, labels, mv3_views, eval.mode, nullptr));
    if (eval.views.size() >= 2) {
      mv_all.push_back(score_multi_view(by_patient, labels, eval.views, eval.mode, &outcome.mv_all));
    }
    report.folds.push_back(std::move(outcome));
  }

  for (ViewTag v : eval.views) report.rows.push_back(summarize(std::string(to_string(v)), per_view[v]));
  if (!mv3.empty()) report.rows.push_back(summarize("MV-3", mv3));
  if (!mv_all.empty()) report.rows.push_back(summarize("MV-All", mv_all));
  return report;
}

std::string report_to_json(const CvReport& report) {
  Json j;
  j["schema"] = "echopipe.cv_report/1";
  Json config = Json::object();
  if (!report.config_json.empty()) config = Json::parse(report.config_json);
  j["config_hash"] = config_hash(config);
  j["config"] = config;
  j["task"] = std::string(to_string(report.mode));
  Json folds = Json::array();
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    const auto& o = report.folds[f];
    Json fj;
    fj["fold"] = o.spec.fold_index;
    fj["train_patients"] = o.spec.train_patient_ids;
    fj["validation_patients"] = o.spec.validation_patient_ids;
    fj["selected_epochs"] = o.selected_epochs;
    Json rows = Json::object();
    for (const auto& r : report.rows) {
      if (f < r.per_fold.size()) rows[r.name] = metrics_json(r.per_fold[f]);
    }
    fj["metrics"] = rows;
    folds.push_back(fj);
  }
  j["folds"] = folds;
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"name", r.name},
                    {"folds", r.per_fold.size()},
                    {"auroc_ovo", mean_std_json(r.auroc_ovo)},
                    {"f1_weighted", mean_std_json(r.f1_weighted)},
                    {"precision_weighted", mean_std_json(r.precision_weighted)},
                    {"recall_weighted", mean_std_json(r.recall_weighted)},
                    {"balanced_accuracy", mean_std_json(r.balanced_accuracy)},
                    {"confidence_mean", mean_std_json(r.confidence_mean)}});
  }
  j["rows"] = rows;
  return j.dump(2);
}

std::string report_table(const CvReport& report) {
  std::ostringstream out;
  const auto cell = [](const MeanStd& m) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f+-%.2f", m.mean, m.std);
    return std::string(buf);
  };
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-12s %-12s %-12s %-12s %-12s %-12s\n", "View", "AUROC", "F1", "Precision",
                "Recall", "BalAcc", "Confidence");
  out << "Task: " << to_string(report.mode) << ", folds: " << report.folds.size() << '\n' << line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-8s %-12s %-12s %-12s %-12s %-12s %-12s\n", r.name.c_str(),
                  cell(r.auroc_ovo).c_str(), cell(r.f1_weighted).c_str(), cell(r.precision_weighted).c_str(),
                  cell(r.recall_weighted).c_str(), cell(r.balanced_accuracy).c_str(),
                  cell(r.confidence_mean).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace echopipe
