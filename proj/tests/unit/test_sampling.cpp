#include <doctest.h>

#include <cmath>
#include <map>

#include "echopipe/error.hpp"
#include "echopipe/sampling.hpp"
#include "helpers.hpp"

using namespace echopipe;

namespace {

EchoVideo ramp_video(std::size_t t, std::size_t h = 4, std::size_t w = 4) {
  EchoVideo v;
  v.patient_id = "P1";
  v.view = ViewTag::A4C;
  v.label = SeverityLabel::Mild;
  v.frames = Tensor<float>({t, h, w});
  for (std::size_t f = 0; f < t; ++f) {
    std::fill_n(v.frames.data() + f * h * w, h * w, static_cast<float>(f) / static_cast<float>(t));
  }
  return v;
}

}  // namespace

TEST_CASE("clips: T = k forces every start to 0") {
  const auto v = ramp_video(12);
  ClipConfig cfg;
  std::mt19937_64 rng(1);
  const auto clips = extract_clips(v, cfg, rng);
  REQUIRE(clips.size() == 10);
  for (const auto& c : clips) {
    CHECK(c.start_frame == 0);
    CHECK(c.frames == clips[0].frames);
  }
}

TEST_CASE("clips: T = 122, k = 12 keeps every start in [0, 110] and frames contiguous") {
  const auto v = ramp_video(122);
  ClipConfig cfg;
  cfg.n_clips = 500;
  std::mt19937_64 rng(2);
  for (const auto& c : extract_clips(v, cfg, rng)) {
    REQUIRE(c.start_frame <= 110);
    REQUIRE(c.frames.shape() == Shape{12, 4, 4});
    REQUIRE(c.patient_id == "P1");
    REQUIRE(c.label == SeverityLabel::Mild);
    for (std::size_t f = 0; f < 12; ++f) {
      REQUIRE(c.frames.at(f, 0, 0) == v.frames.at(c.start_frame + f, 0, 0));
    }
  }
}

TEST_CASE("clips: starts are uniform (10000 draws, T = 22, k = 12)") {
  const auto v = ramp_video(22, 1, 1);
  ClipConfig cfg;
  cfg.n_clips = 10000;
  std::mt19937_64 rng(3);
  std::array<int, 11> counts{};
  for (const auto& c : extract_clips(v, cfg, rng)) ++counts.at(c.start_frame);
  double chi2 = 0.0;
  for (int n : counts) {
    CHECK(std::abs(n / 10000.0 - 1.0 / 11.0) <= 0.02);
    chi2 += std::pow(n - 10000.0 / 11.0, 2) / (10000.0 / 11.0);
  }
  CHECK(chi2 < 29.59);  // chi-square, 10 dof, p = 0.001
}

TEST_CASE("clips: short videos fail unless padding is enabled") {
  const auto v = ramp_video(5);
  ClipConfig cfg;
  std::mt19937_64 rng(4);
  CHECK_THROWS_AS(extract_clips(v, cfg, rng), Error);
  cfg.pad_short = true;
  const auto clips = extract_clips(v, cfg, rng);
  REQUIRE(clips.size() == cfg.n_clips);
  for (const auto& c : clips) {
    CHECK(c.padded);
    CHECK(c.frames == clips[0].frames);
    for (std::size_t f = 0; f < 12; ++f) CHECK(c.frames.at(f, 0, 0) == v.frames.at(f % 5, 0, 0));
  }
}

TEST_CASE("clips: fixed seed gives identical sets; eval clips are frozen per video") {
  const auto v = ramp_video(60);
  ClipConfig cfg;
  std::mt19937_64 a(9), b(9);
  const auto ca = extract_clips(v, cfg, a), cb = extract_clips(v, cfg, b);
  for (std::size_t i = 0; i < ca.size(); ++i) CHECK(ca[i].start_frame == cb[i].start_frame);

  const auto e1 = extract_eval_clips(v, cfg, 7, "P1/A4C");
  const auto e2 = extract_eval_clips(v, cfg, 7, "P1/A4C");
  const auto e3 = extract_eval_clips(v, cfg, 7, "P2/A4C");
  std::vector<std::size_t> s1, s2, s3;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    s1.push_back(e1[i].start_frame);
    s2.push_back(e2[i].start_frame);
    s3.push_back(e3[i].start_frame);
  }
  CHECK(s1 == s2);
  CHECK(s1 != s3);
}

TEST_CASE("inverse class weights") {
  const std::vector<int> labels = {0, 0, 1};
  const auto w = inverse_class_weights(labels, 2);
  CHECK(w == std::vector<double>{0.5, 0.5, 1.0});

  const std::vector<int> balanced = {0, 1, 2, 2, 1, 0};
  for (double x : inverse_class_weights(balanced, 3)) CHECK(x == doctest::Approx(0.5));

  const std::vector<int> missing = {0, 0, 2};
  CHECK_THROWS_WITH_AS(inverse_class_weights(missing, 3), doctest::Contains("labels: 1"), Error);
}

TEST_CASE("weighted sampling equalizes class frequencies (126/32/36, 30000 draws)") {
  std::vector<int> labels;
  labels.insert(labels.end(), 126, 0);
  labels.insert(labels.end(), 32, 1);
  labels.insert(labels.end(), 36, 2);
  const auto w = inverse_class_weights(labels, 3);
  std::mt19937_64 rng(12);
  std::array<int, 3> counts{};
  for (std::size_t i : weighted_sample(w, 30000, rng)) ++counts[labels.at(i)];
  for (int n : counts) CHECK(std::abs(n / 30000.0 - 1.0 / 3.0) <= 0.02);
}

TEST_CASE("stable_hash is FNV-1a") {
  CHECK(stable_hash("") == 0xcbf29ce484222325ULL);
  CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
}
