// Acceptance runner. `echopipe_acceptance <n>` checks one criterion and prints a
// single PASS/FAIL line; with no argument every criterion runs in order.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "echopipe/aggregate.hpp"
#include "echopipe/evaluate.hpp"
#include "echopipe/explain.hpp"
#include "echopipe/manifest.hpp"
#include "echopipe/metrics.hpp"
#include "echopipe/phantom.hpp"
#include "echopipe/preprocess.hpp"
#include "echopipe/train.hpp"
#include "echopipe/video.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace echopipe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

template <typename F>
void for_each_sequence(std::size_t n, std::size_t base, F&& f) {
  std::vector<std::size_t> digits(n, 0);
  while (true) {
    f(digits);
    std::size_t i = 0;
    while (i < n && ++digits[i] == base) digits[i++] = 0;
    if (i == n) break;
  }
}

std::vector<double> row_for(int label, double p) {
  std::vector<double> r(3, (1.0 - p) / 2.0);
  r[static_cast<std::size_t>(label)] = p;
  return r;
}

// 1 ------------------------------------------------------------------------

Outcome voting_oracle() {
  const auto start = Clock::now();
  std::size_t cases = 0, mismatches = 0;
  const std::array<double, 3> prob_grid = {0.4, 0.6, 0.8};
  for (std::size_t n = 1; n <= 5; ++n) {
    for_each_sequence(n, 9, [&](const std::vector<std::size_t>& d) {
      std::vector<int> labels;
      std::vector<std::vector<double>> probs;
      for (std::size_t s : d) {
        labels.push_back(static_cast<int>(s / 3));
        probs.push_back(row_for(labels.back(), prob_grid[s % 3]));
      }
      const auto got = view_vote(labels, probs);
      const auto want = oracle::view_vote(labels, probs);
      bool same = got.label == want.label && got.confidence == want.confidence;
      for (std::size_t c = 0; c < 3; ++c) same = same && std::abs(got.representative_probs[c] - want.probs[c]) < 1e-12;
      mismatches += !same;
      ++cases;
    });
  }
  const std::array<double, 5> conf_grid = {0.2, 0.4, 0.6, 0.8, 1.0};
  for (std::size_t n = 1; n <= 5; ++n) {
    for_each_sequence(n, 15, [&](const std::vector<std::size_t>& d) {
      std::vector<ViewPrediction> views;
      std::vector<int> labels;
      std::vector<double> conf;
      for (std::size_t i = 0; i < n; ++i) {
        ViewPrediction p;
        p.view = kAllViews[i];
        p.label = static_cast<int>(d[i] / 5);
        p.confidence = conf_grid[d[i] % 5];
        p.representative_probs = row_for(p.label, 0.5);
        labels.push_back(p.label);
        conf.push_back(p.confidence);
        views.push_back(p);
      }
      const auto got = patient_vote(views);
      const auto want = oracle::patient_vote(labels, conf);
      mismatches += !(got.label == want.label && got.tie_broken == want.tie_broken && got.confidence == want.confidence);
      ++cases;
    });
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 10.0, std::to_string(cases) + " cases, " + std::to_string(mismatches) +
                                              " mismatches, " + fmt(secs, 2) + " s (limit 10 s)"};
}

// 2 ------------------------------------------------------------------------

Outcome metric_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240607);
  double worst = 0.0;
  std::size_t nan_mismatch = 0;
  for (int i = 0; i < 200; ++i) {
    const int C = std::uniform_int_distribution<int>(2, 3)(rng);
    const int n = std::uniform_int_distribution<int>(2, 50)(rng);
    std::vector<int> y, p;
    std::vector<std::vector<double>> probs;
    std::uniform_int_distribution<int> lab(0, C - 1), score(1, 6);
    for (int j = 0; j < n; ++j) {
      y.push_back(lab(rng));
      std::vector<double> row(static_cast<std::size_t>(C));
      double s = 0.0;
      for (auto& v : row) s += (v = score(rng));
      for (auto& v : row) v /= s;
      p.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
      probs.push_back(row);
    }
    const auto w = weighted_scores(y, p, C);
    const auto o = oracle::weighted_scores(y, p, C);
    worst = std::max({worst, std::abs(w.f1 - o.f1), std::abs(w.precision - o.precision), std::abs(w.recall - o.recall),
                      std::abs(balanced_accuracy(y, p, C) - oracle::balanced_accuracy(y, p, C))});
    const double a = auroc_ovo(y, probs, C), b = oracle::auroc_ovo(y, probs, C);
    if (std::isnan(a) != std::isnan(b)) {
      ++nan_mismatch;
    } else if (!std::isnan(a)) {
      worst = std::max(worst, std::abs(a - b));
    }
  }
  const double secs = seconds_since(start);
  std::ostringstream d;
  d << "200 fixtures, max |diff| " << worst << " (tol 1e-9), " << nan_mismatch << " NaN mismatches, " << fmt(secs, 2)
    << " s";
  return {worst <= 1e-9 && nan_mismatch == 0 && secs < 30.0, d.str()};
}

// 3 ------------------------------------------------------------------------

Outcome gradient_check() {
  const auto start = Clock::now();
  ModelConfig c;
  c.width_multiplier = 0.125;
  c.clip_len = 12;
  c.input_height = c.input_width = 16;
  Model<double> m(c, 31);
  m.set_training(false);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (auto& b : m.buffers()) {
    for (auto& v : b.value->storage()) v = b.name.find("var") != std::string::npos ? u(rng) : u(rng) - 1.0;
  }
  Tensor<double> x({1, 1, c.clip_len, c.input_height, c.input_width});
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  for (auto& v : x.storage()) v = ux(rng);
  const std::vector<int> target = {1};
  auto loss = [&](const Tensor<double>& in) { return cross_entropy(m.forward(in), target).loss; };
  const auto lg = cross_entropy(m.forward(x), target);
  const Tensor<double> grad = m.backward(lg.grad, true);
  m.zero_grad();

  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  const double eps = 1e-5;
  const int coords = 24;
  double worst = 0.0;
  for (int i = 0; i < coords; ++i) {
    const std::size_t j = pick(rng);
    auto xp = x, xm = x;
    xp[j] += eps;
    xm[j] -= eps;
    const double fd = (loss(xp) - loss(xm)) / (2 * eps);
    const double rel = std::abs(fd - grad[j]) / std::max({std::abs(fd), std::abs(grad[j]), 1e-8});
    worst = std::max(worst, rel);
  }
  const double secs = seconds_since(start);
  std::ostringstream d;
  d << coords << " input coordinates, max relative error " << worst << " (tol 1e-3), " << fmt(secs, 1)
    << " s (limit 120 s)";
  return {worst < 1e-3 && secs < 120.0, d.str()};
}

// 4 ------------------------------------------------------------------------

Outcome gradcam_closed_form() {
  constexpr std::size_t T = 3, H = 6, W = 6, C = 3;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(0.05, 1.0);
  nn::Sequential<double> net("toy");
  auto& conv = net.emplace<nn::Conv3d<double>>("conv", 1, C, nn::Dims3{1, 3, 3}, nn::Dims3{1, 1, 1}, nn::Dims3{0, 1, 1});
  net.emplace<nn::GlobalAvgPool3d<double>>("pool");
  auto& fc = net.emplace<nn::Linear<double>>("fc", C, 2);
  for (auto& v : conv.weight().value.storage()) v = pos(rng);
  for (auto& v : fc.weight().value.storage()) v = pos(rng);
  fc.bias().value.fill(0.0);

  Tensor<double> x({1, 1, T, H, W}, 0.0);
  x.at(0, 0, 1, 2, 3) = 1.0;

  // alpha_c = W[y, c] / (T H W); A_c from direct correlation.
  double worst = 0.0;
  for (int y : {0, 1}) {
    GradCamConfig cfg;
    cfg.target_class = y;
    const auto s = grad_cam_sequential(net, x, 0, cfg);
    for (std::size_t t = 0; t < T; ++t) {
      for (int r = 0; r < static_cast<int>(H); ++r) {
        for (int q = 0; q < static_cast<int>(W); ++q) {
          double cam = 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            double a = 0.0;
            for (int dr = -1; dr <= 1; ++dr) {
              for (int dq = -1; dq <= 1; ++dq) {
                const int rr = r + dr, qq = q + dq;
                if (rr < 0 || qq < 0 || rr >= static_cast<int>(H) || qq >= static_cast<int>(W)) continue;
                a += conv.weight().value[c * 9 + static_cast<std::size_t>((dr + 1) * 3 + dq + 1)] * x.at(0, 0, t, rr, qq);
              }
            }
            cam += fc.weight().value[static_cast<std::size_t>(y) * C + c] / static_cast<double>(T * H * W) * a;
          }
          worst = std::max(worst, std::abs(std::max(0.0, cam) - s.raw.at(t, r, q)));
        }
      }
    }
  }

  // Zero-gradient cases: zero classifier weights, and an all-zero input.
  fc.weight().value.fill(0.0);
  const auto z1 = grad_cam_sequential(net, x, 0, GradCamConfig{});
  for (auto& v : fc.weight().value.storage()) v = pos(rng);
  const auto z2 = grad_cam_sequential(net, Tensor<double>({1, 1, T, H, W}, 0.0), 0, GradCamConfig{});
  bool zero = true;
  for (const auto* s : {&z1, &z2}) {
    for (double v : s->raw.span()) zero = zero && v == 0.0;
    for (float v : s->values.span()) zero = zero && v == 0.0f;
  }
  std::ostringstream d;
  d << "max |raw - ReLU(sum alpha A)| " << worst << " (tol 1e-5), zero-gradient volumes "
    << (zero ? "all zero" : "NOT zero");
  return {worst < 1e-5 && zero, d.str()};
}

// Phantom helpers -----------------------------------------------------------

struct CanonicalSet {
  std::vector<EchoVideo> videos;
  std::map<std::string, PixelBox> septum;  // video_key -> septum box in canonical pixels
};

CanonicalSet canonical_phantom(const DatasetManifest& manifest, std::size_t size) {
  PreprocessConfig pp;
  pp.target_height = pp.target_width = size;
  CanonicalSet out;
  for (const auto& r : manifest.records) {
    const auto vf = read_video(manifest.resolve(r));
    const auto res = preprocess_video_detailed(EchoVideo{r.patient_id, r.view, r.label, vf.frames, vf.fps}, pp);
    const auto truth = read_phantom_truth(truth_path_for(manifest.resolve(r)));
    out.septum[video_key(res.video)] = map_box_to_canonical(truth.septum_box, res.sector.bounding_box, size, size);
    out.videos.push_back(res.video);
  }
  return out;
}

// 5 ------------------------------------------------------------------------

Outcome gradcam_sanity() {
  const auto start = Clock::now();
  testing::TempDir dir("acc5");
  PhantomConfig pc;
  pc.n_patients = 40;
  pc.frames_per_video = 48;
  pc.seed = 5;
  const auto manifest = generate_phantom_dataset(pc, dir.path()).filter_view(ViewTag::PSAX_P);
  const auto set = canonical_phantom(manifest, 64);

  ModelConfig mc;
  mc.width_multiplier = 0.125;
  mc.input_height = mc.input_width = 64;
  TrainConfig tc;
  tc.epochs = 8;
  tc.seed = 5;
  const ClipConfig cc;
  auto result = train(build_model<float>(mc, 5), set.videos, {}, TaskMode::Severity, tc, cc, AugmentConfig{});

  // Two frozen clips from each of the first eight videos.
  std::vector<Tensor<float>> clips;
  for (std::size_t i = 0; i < 8 && i < set.videos.size(); ++i) {
    const auto ec = extract_eval_clips(set.videos[i], cc, tc.eval_seed, video_key(set.videos[i]));
    for (std::size_t j = 0; j < 2 && j < ec.size(); ++j) clips.push_back(ec[j].frames);
  }
  const auto report = sanity_check_randomization(*result.model, clips);
  std::ostringstream d;
  d << "final train loss " << fmt(result.history.epochs.back().train_loss) << ", " << clips.size()
    << " clips, mean Spearman per cascade stage:";
  for (const auto& s : report.stages) d << ' ' << s.stage << '=' << fmt(s.mean_correlation);
  d << "; fully randomized " << fmt(report.final_mean_correlation) << " (< 0.5), "
    << fmt(seconds_since(start), 0) << " s";
  return {report.pass, d.str()};
}

// 6 ------------------------------------------------------------------------

Outcome phantom_end_to_end() {
  const auto start = Clock::now();
  constexpr std::size_t kSize = 80;
  testing::TempDir dir("acc6");
  PhantomConfig pc;  // 60 patients, 5 views
  const auto manifest = generate_phantom_dataset(pc, dir.path());
  const auto set = canonical_phantom(manifest, kSize);
  std::cerr << "[6] " << set.videos.size() << " canonical videos at " << kSize << " px after "
            << fmt(seconds_since(start), 0) << " s\n";

  EvalConfig ev;
  ev.folds = 3;
  ev.scheme = SplitScheme::Partition;
  ModelConfig mc;
  mc.width_multiplier = 0.125;
  mc.input_height = mc.input_width = kSize;
  TrainConfig tc;
  tc.epochs = 25;
  const ClipConfig cc;  // k = 12, n = 10

  const int ms = class_index(SeverityLabel::ModerateSevere, TaskMode::Severity);
  std::map<std::string, std::pair<double, std::size_t>> mass;  // layer -> (sum, clips)
  double box_area = 0.0;
  std::size_t boxes = 0;
  CvHooks hooks;
  hooks.on_model = [&](std::size_t fold, ViewTag view, Model<float>& model, const std::vector<EchoVideo>& val) {
    for (const auto& v : val) {
      if (v.label != SeverityLabel::ModerateSevere) continue;
      const PixelBox box = set.septum.at(video_key(v));
      box_area += static_cast<double>(box.area()) / static_cast<double>(kSize * kSize);
      ++boxes;
      for (const auto& clip : extract_eval_clips(v, cc, tc.eval_seed, video_key(v))) {
        for (const char* layer : {"layer3", "layer4"}) {
          GradCamConfig g;
          g.layer = layer;
          g.target_class = ms;
          const auto s = grad_cam_3d(model, clip.frames, g);
          auto& [sum, n] = mass[layer];
          sum += saliency_mass_in_box(s.values, box);
          ++n;
        }
      }
    }
    std::cerr << "[6] fold " << fold << ' ' << to_string(view) << " done after " << fmt(seconds_since(start), 0)
              << " s\n";
  };
  const auto report = cross_validate(set.videos, ev, mc, tc, cc, AugmentConfig{}, pc.seed, hooks);
  {
    std::ofstream out("acceptance_6_report.json");
    out << report_to_json(report) << '\n';
  }
  std::cerr << report_table(report);

  bool a = true;
  double best_view = 0.0;
  std::ostringstream d;
  d << "(a) per-view bacc";
  for (auto v : kAllViews) {
    const double b = report.row(std::string(to_string(v))).balanced_accuracy.mean;
    a = a && b >= 0.85;
    best_view = std::max(best_view, b);
    d << ' ' << to_string(v) << '=' << fmt(b);
  }
  d << " (>= 0.85) " << (a ? "ok" : "FAIL");
  const double mv_all = report.row("MV-All").balanced_accuracy.mean;
  const bool b = mv_all >= best_view - 0.02;
  d << "; (b) MV-All " << fmt(mv_all) << " vs best view " << fmt(best_view) << " - 0.02 " << (b ? "ok" : "FAIL");
  const double m3 = mass["layer3"].second ? mass["layer3"].first / static_cast<double>(mass["layer3"].second) : 0.0;
  const double m4 = mass["layer4"].second ? mass["layer4"].first / static_cast<double>(mass["layer4"].second) : 0.0;
  const bool c = m3 >= 0.30;
  d << "; (c) septum-box saliency mass layer3 " << fmt(m3) << " (>= 0.30) " << (c ? "ok" : "FAIL") << " over "
    << mass["layer3"].second << " ModerateSevere clips, layer4 " << fmt(m4) << ", mean box area "
    << fmt(boxes ? box_area / static_cast<double>(boxes) : 0.0) << "; 3-fold partition, " << fmt(seconds_since(start) / 60.0, 1)
    << " min";
  return {a && b && c, d.str()};
}

// 7 ------------------------------------------------------------------------

Outcome cv_no_leakage() {
  std::mt19937_64 rng(99);
  std::size_t folds_checked = 0, violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    DatasetManifest m;
    std::uniform_int_distribution<std::size_t> class_size(2, 40), views(1, 5);
    std::size_t id = 0;
    std::array<std::size_t, 3> global{};
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t n = class_size(rng);
      global[c] = n;
      for (std::size_t i = 0; i < n; ++i, ++id) {
        const std::string pid = "R" + std::to_string(trial) + "_" + std::to_string(id);
        const std::size_t nv = views(rng);
        for (std::size_t v = 0; v < nv; ++v) {
          // Lower-severity extra records do not change the patient's label.
          const auto label = v == 0 ? kAllSeverities[c] : kAllSeverities[std::uniform_int_distribution<std::size_t>(0, c)(rng)];
          m.records.push_back({pid, kAllViews[v], label, pid + "_" + std::to_string(v) + ".echo"});
        }
      }
    }
    const auto labels = m.patient_labels();
    const std::size_t k = 1 + static_cast<std::size_t>(trial) % 10;
    const auto scheme = trial % 2 ? SplitScheme::Partition : SplitScheme::ShuffleSplit;
    const auto folds = stratified_patient_kfold(m, k, static_cast<std::uint64_t>(trial), TaskMode::Severity, scheme);
    const double N = static_cast<double>(labels.size());
    for (const auto& f : folds) {
      ++folds_checked;
      const std::set<std::string> train(f.train_patient_ids.begin(), f.train_patient_ids.end());
      std::array<std::size_t, 3> vc{};
      for (const auto& pid : f.validation_patient_ids) {
        violations += train.count(pid);
        ++vc[static_cast<std::size_t>(class_index(labels.at(pid), TaskMode::Severity))];
      }
      violations += train.size() + f.validation_patient_ids.size() != labels.size();
      const double nv = static_cast<double>(f.validation_patient_ids.size());
      for (std::size_t c = 0; c < 3; ++c) {
        violations += std::abs(static_cast<double>(vc[c]) - static_cast<double>(global[c]) * nv / N) > 1.0;
      }
    }
  }
  return {violations == 0, "100 random manifests, " + std::to_string(folds_checked) + " folds, " +
                               std::to_string(violations) + " leakage or proportion violations"};
}

// 8 ------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + std::string(ECHOPIPE_CLI_PATH) + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Relative path -> bytes, skipping the per-run configuration echo (it names the output directory).
std::map<std::string, std::vector<std::uint8_t>> tree_bytes(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename().string().rfind("run_config.", 0) == 0) continue;
    out[fs::relative(e.path(), root).string()] = read_file_bytes(e.path());
  }
  return out;
}

Outcome reproducibility() {
  testing::TempDir dir("acc8");
  const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  const std::string synth = "synth --patients 12 --frames 24 --size 64 --seed 8 --out ";
  if (run_cli(synth + q(dir / "a"), dir / "log") != 0 || run_cli(synth + q(dir / "b"), dir / "log") != 0) {
    return {false, "synth failed"};
  }
  const auto ta = tree_bytes(dir / "a"), tb = tree_bytes(dir / "b");
  const bool phantom_same = ta == tb && !ta.empty();

  const std::string train = "train --manifest " + q(dir / "a" / "manifest.tsv") +
                            " --view PSAX_P --epochs 2 --width 0.125 --size 32 --seed 8 --out ";
  if (run_cli(train + q(dir / "m1"), dir / "log") != 0 || run_cli(train + q(dir / "m2"), dir / "log") != 0) {
    return {false, "train failed"};
  }
  const auto c1 = read_file_bytes(dir / "m1" / "model.ckpt"), c2 = read_file_bytes(dir / "m2" / "model.ckpt");
  const bool ckpt_same = c1 == c2 && !c1.empty();
  return {phantom_same && ckpt_same, "phantom trees " + std::string(phantom_same ? "identical" : "DIFFER") + " (" +
                                         std::to_string(ta.size()) + " files), checkpoints " +
                                         (ckpt_same ? "identical" : "DIFFER") + " (" + std::to_string(c1.size()) +
                                         " bytes)"};
}

// 9 ------------------------------------------------------------------------

Outcome format_round_trip() {
  testing::TempDir dir("acc9");
  std::mt19937_64 rng(1000);
  std::uniform_int_distribution<std::size_t> t(1, 8), hw(1, 48);
  std::uniform_real_distribution<float> fps(1.0f, 120.0f), u(0.0f, 1.0f);
  std::size_t failures = 0;
  for (int i = 0; i < 1000; ++i) {
    EchoVideo v;
    v.frames = Tensor<float>({t(rng), hw(rng), hw(rng)});
    for (auto& x : v.frames.storage()) x = u(rng);
    v.frames[0] = 0.0f;
    v.frames[v.frames.size() - 1] = 1.0f;
    v.fps = fps(rng);
    const fs::path p = dir / "v.echo";
    write_video(v, p);
    const auto bytes = read_file_bytes(p);
    const auto back = read_video(p);
    bool ok = back.frames.shape() == v.frames.shape() && back.fps == v.fps;
    for (std::size_t j = 0; ok && j < v.frames.size(); ++j) ok = back.frames[j] == dequantize8(quantize8(v.frames[j]));
    // Decoded content re-encodes to the same bytes.
    write_frames(back.frames, back.fps, p);
    ok = ok && read_file_bytes(p) == bytes;
    const auto dec = decode_echo1(bytes);
    ok = ok && encode_echo1(dec.header, dec.payload) == bytes;
    failures += !ok;
  }
  return {failures == 0, "1000 random videos, " + std::to_string(failures) + " round-trip failures"};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, Criterion> criteria = {
      {1, {"voting oracle equivalence", voting_oracle}},
      {2, {"metric oracle equivalence", metric_oracle}},
      {3, {"gradient correctness", gradient_check}},
      {4, {"Grad-CAM closed form", gradcam_closed_form}},
      {5, {"Grad-CAM randomization sanity", gradcam_sanity}},
      {6, {"phantom end-to-end", phantom_end_to_end}},
      {7, {"CV no-leakage", cv_no_leakage}},
      {8, {"reproducibility", reproducibility}},
      {9, {"ECHO1 round trip", format_round_trip}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (!criteria.count(n)) {
      std::cerr << "usage: echopipe_acceptance [1-9 ...]\n";
      return 2;
    }
    selected.push_back(n);
  }
  if (selected.empty()) {
    for (const auto& [n, c] : criteria) selected.push_back(n);
  }
  bool all = true;
  for (int n : selected) {
    const auto& c = criteria.at(n);
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << c.name << "): " << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
