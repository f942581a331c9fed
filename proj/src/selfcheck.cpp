#include "echopipe/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>

#include "echopipe/aggregate.hpp"
#include "echopipe/metrics.hpp"
#include "echopipe/network.hpp"
#include "echopipe/preprocess.hpp"
#include "echopipe/video.hpp"

namespace echopipe {
namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

CheckResult check_view_vote() {
  // Every label sequence of length 1..5 over 3 classes, with per-clip winning
  // probabilities drawn from a small grid so that mean-probability ties occur.
  std::size_t cases = 0, mismatches = 0;
  const double grid[] = {0.4, 0.6, 0.8};
  for (int n = 1; n <= 5; ++n) {
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 9;
    for (int code = 0; code < total; ++code) {
      std::vector<int> labels;
      std::vector<std::vector<double>> probs;
      int c = code;
      for (int i = 0; i < n; ++i) {
        const int label = (c % 9) / 3;
        const double p = grid[c % 3];
        c /= 9;
        std::vector<double> row(3, (1.0 - p) / 2.0);
        row[label] = p;
        labels.push_back(label);
        probs.push_back(row);
      }
      std::map<int, int> counts;
      std::map<int, double> sums;
      for (int i = 0; i < n; ++i) {
        ++counts[labels[i]];
        sums[labels[i]] += probs[i][labels[i]];
      }
      int best = -1;
      for (const auto& [label, k] : counts) {
        if (best < 0) { best = label; continue; }
        const double mb = sums[best] / counts[best], ml = sums[label] / k;
        if (k > counts[best] || (k == counts[best] && ml >= mb)) best = label;
      }
      const ViewPrediction got = view_vote(labels, probs);
      ++cases;
      if (got.label != best || got.confidence != static_cast<double>(counts[best]) / n) ++mismatches;
    }
  }
  return {"view_vote exhaustive (n<=5, 3 classes)", mismatches == 0,
          std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches"};
}

CheckResult check_patient_vote() {
  std::size_t cases = 0, mismatches = 0;
  const double conf[] = {0.2, 0.6, 1.0};
  for (int n = 1; n <= 3; ++n) {
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 9;
    for (int code = 0; code < total; ++code) {
      std::vector<ViewPrediction> views;
      int c = code;
      for (int i = 0; i < n; ++i) {
        ViewPrediction v;
        v.view = kAllViews[static_cast<std::size_t>(i)];
        v.label = (c % 9) / 3;
        v.confidence = conf[c % 3];
        v.representative_probs = {0.0, 0.0, 0.0};
        v.representative_probs[static_cast<std::size_t>(v.label)] = 1.0;
        views.push_back(v);
        c /= 9;
      }
      // Oracle: maximize (count, top confidence, severity) lexicographically.
      int best = -1;
      std::tuple<int, double, int> best_key{-1, -1.0, -1};
      for (int label = 0; label < 3; ++label) {
        int count = 0;
        double top = -1.0;
        for (const auto& v : views) {
          if (v.label == label) { ++count; top = std::max(top, v.confidence); }
        }
        if (count == 0) continue;
        const std::tuple<int, double, int> key{count, top, label};
        if (key > best_key) { best_key = key; best = label; }
      }
      ++cases;
      if (patient_vote(views).label != best) ++mismatches;
    }
  }
  return {"patient_vote exhaustive (<=3 views)", mismatches == 0,
          std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches"};
}

CheckResult check_metrics() {
  const std::vector<int> t{0, 0, 1, 1}, p{0, 1, 1, 1};
  const double ba = balanced_accuracy(t, p, 2);
  const double f1 = weighted_scores(t, p, 2).f1;
  const double expected_f1 = 0.5 * (2.0 / 3.0) + 0.5 * 0.8;
  const bool ok = std::abs(ba - 0.75) < 1e-12 && std::abs(f1 - expected_f1) < 1e-12;
  const double auc = auroc_ovo({0, 1, 2}, {{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}}, 3);
  return {"metric fixtures", ok && std::abs(auc - 1.0) < 1e-12,
          fmt("balanced accuracy %.4f, weighted F1 %.4f", ba, f1)};
}

CheckResult check_equalization() {
  Tensor<float> frame({4, 4}, 0.2f);
  for (std::size_t i = 0; i < 4; ++i) frame[i] = 0.8f;
  const Tensor<float> eq = histogram_equalize(frame, 256);
  const bool ok = eq[0] == 1.0f && eq[15] == 0.75f;
  return {"equalization two-level fixture", ok, fmt("levels %.4f, %.4f", eq[15], eq[0])};
}

CheckResult check_container() {
  std::mt19937_64 rng(5);
  Tensor<float> frames({3, 5, 7});
  for (auto& v : frames.storage()) v = dequantize8(static_cast<std::uint8_t>(rng() & 0xFF));
  Echo1Header h{Echo1Kind::Gray8, 3, 5, 7, 25.0f};
  std::vector<std::uint8_t> payload;
  for (float v : frames.storage()) payload.push_back(quantize8(v));
  const auto bytes = encode_echo1(h, payload);
  const auto decoded = decode_echo1(bytes);
  const bool ok = decoded.payload == payload && encode_echo1(decoded.header, decoded.payload) == bytes;
  return {"ECHO1 round trip", ok, std::to_string(bytes.size()) + " bytes"};
}

CheckResult check_gradient() {
  ModelConfig c;
  c.width_multiplier = 0.125;
  c.clip_len = 4;
  c.input_height = 8;
  c.input_width = 8;
  Model<double> model(c, 17);
  model.set_training(false);
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor<double> x({1, 1, 4, 8, 8});
  for (auto& v : x.storage()) v = n(rng);
  std::vector<double> w(3);
  for (auto& v : w) v = n(rng);
  const auto objective = [&](const Tensor<double>& input) {
    const Tensor<double> logits = model.forward(input);
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) s += w[i] * logits[i];
    return s;
  };
  objective(x);
  Tensor<double> seed({1, 3});
  for (std::size_t i = 0; i < 3; ++i) seed[i] = w[i];
  const Tensor<double> grad = model.backward(seed, true);
  double worst = 0.0;
  const double eps = 1e-5;
  for (int k = 0; k < 10; ++k) {
    const std::size_t idx = rng() % x.size();
    Tensor<double> xp = x, xm = x;
    xp[idx] += eps;
    xm[idx] -= eps;
    const double numeric = (objective(xp) - objective(xm)) / (2 * eps);
    const double rel = std::abs(numeric - grad[idx]) / std::max({std::abs(numeric), std::abs(grad[idx]), 1e-6});
    worst = std::max(worst, rel);
  }
  return {"input gradient vs finite differences", worst < 1e-3, fmt("max relative error %.2e", worst)};
}

}  // namespace

std::vector<CheckResult> run_selfcheck() {
  std::vector<CheckResult> out;
  const std::function<CheckResult()> checks[] = {check_view_vote, check_patient_vote, check_metrics,
                                                 check_equalization, check_container, check_gradient};
  for (const auto& check : checks) {
    try {
      out.push_back(check());
    } catch (const std::exception& e) {
      out.push_back({"(check threw)", false, e.what()});
    }
  }
  return out;
}

}  // namespace echopipe
