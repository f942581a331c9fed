#include <doctest.h>

#include <cmath>

#include "echopipe/checkpoint.hpp"
#include "echopipe/error.hpp"
#include "echopipe/phantom.hpp"
#include "echopipe/preprocess.hpp"
#include "echopipe/train.hpp"
#include "helpers.hpp"

using namespace echopipe;

namespace {

std::vector<EchoVideo> phantom_videos(const std::vector<SeverityLabel>& labels, std::uint64_t seed,
                                      std::size_t size = 16) {
  PhantomConfig pc;
  pc.frames_per_video = 12;
  pc.frame_height = pc.frame_width = 48;
  PreprocessConfig pp;
  pp.target_height = pp.target_width = size;
  std::mt19937_64 rng(seed);
  std::vector<EchoVideo> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto video = render_phantom_video(pc, labels[i], ViewTag::PSAX_P, rng).first;
    video.patient_id = "P" + std::to_string(seed * 100 + i);
    video.view = ViewTag::PSAX_P;
    video.label = labels[i];
    out.push_back(preprocess_video(video, pp));
  }
  return out;
}

const std::vector<SeverityLabel> kSix = {SeverityLabel::None,   SeverityLabel::Mild,
                                         SeverityLabel::ModerateSevere, SeverityLabel::None,
                                         SeverityLabel::Mild,   SeverityLabel::ModerateSevere};

std::unique_ptr<Model<float>> tiny_model(std::uint64_t seed, double width = 0.125) {
  ModelConfig mc;
  mc.width_multiplier = width;
  mc.clip_len = 4;
  mc.input_height = mc.input_width = 16;
  return build_model<float>(mc, seed);
}

ClipConfig tiny_clips() {
  ClipConfig cc;
  cc.clip_len = 4;
  cc.n_clips = 2;
  return cc;
}

}  // namespace

TEST_CASE("train: loss goes down in most short runs") {
  int decreased = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto videos = phantom_videos(kSix, seed);
    TrainConfig tc;
    tc.epochs = 4;
    tc.seed = seed;
    tc.clips_per_video = 4;
    tc.batch_size = 4;
    AugmentConfig aug;
    aug.apply_probability = 0.0;
    const auto r = train(tiny_model(seed, 0.25), videos, {}, TaskMode::Severity, tc, tiny_clips(), aug);
    REQUIRE(r.history.epochs.size() == 4);
    for (const auto& e : r.history.epochs) REQUIRE(std::isfinite(e.train_loss));
    decreased += r.history.epochs.back().train_loss < r.history.epochs.front().train_loss;
    CHECK(std::isnan(r.history.epochs.back().val_balanced_accuracy));
    CHECK(r.history.selected_epoch == 4);
  }
  MESSAGE("loss decreased in " << decreased << " of 5 runs");
  CHECK(decreased >= 4);
}

TEST_CASE("train: a tiny model overfits eight fixed clips") {
  auto model = tiny_model(3);
  std::vector<Tensor<float>> clips;
  std::vector<int> labels;
  for (int i = 0; i < 8; ++i) {
    clips.push_back(testing::random_frames(4, 16, 16, 100 + static_cast<std::uint64_t>(i)));
    labels.push_back(i % 3);
  }
  std::vector<const Tensor<float>*> ptrs;
  for (const auto& c : clips) ptrs.push_back(&c);
  const Tensor<float> batch = stack_clips(ptrs);
  model->set_training(true);
  Adam<float> opt(model->parameters(), 1e-3, 0.0);
  for (int step = 0; step < 200; ++step) {
    opt.zero_grad();
    const auto lg = cross_entropy(model->forward(batch), labels);
    model->backward(lg.grad, false);
    opt.step();
  }
  model->set_training(false);
  const Tensor<float> logits = model->forward(batch);
  int correct = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const float* row = logits.data() + 3 * i;
    correct += static_cast<int>(std::max_element(row, row + 3) - row) == labels[i];
  }
  CHECK(correct == 8);
}

TEST_CASE("train: identical configs give byte-identical checkpoints") {
  const auto videos = phantom_videos(kSix, 9);
  const auto val = phantom_videos(kSix, 10);
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 21;
  tc.clips_per_video = 2;
  auto run = [&] {
    return train(tiny_model(21), videos, val, TaskMode::Severity, tc, tiny_clips(), AugmentConfig{});
  };
  auto a = run(), b = run();
  CHECK(encode_checkpoint(*a.model, CheckpointMeta{21, a.history.selected_epoch}) ==
        encode_checkpoint(*b.model, CheckpointMeta{21, b.history.selected_epoch}));
  CHECK(a.history.batch_losses == b.history.batch_losses);

  tc.seed = 22;
  auto c = train(tiny_model(21), videos, val, TaskMode::Severity, tc, tiny_clips(), AugmentConfig{});
  CHECK(c.history.batch_losses != a.history.batch_losses);
}

TEST_CASE("train: best-validation selection keeps the latest best epoch") {
  const auto videos = phantom_videos(kSix, 12);
  const auto val = phantom_videos(kSix, 13);
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 4;
  tc.clips_per_video = 2;
  std::vector<EpochRecord> seen;
  const auto r = train(tiny_model(4), videos, val, TaskMode::Severity, tc, tiny_clips(), AugmentConfig{},
                       [&](const EpochRecord& e) { seen.push_back(e); });
  REQUIRE(seen.size() == 3);
  std::size_t best = 0;
  double best_acc = -1.0;
  for (const auto& e : r.history.epochs) {
    if (e.val_balanced_accuracy >= best_acc) {
      best_acc = e.val_balanced_accuracy;
      best = e.epoch;
    }
  }
  CHECK(r.history.selected_epoch == best);
  // The returned weights reproduce the selected epoch's validation score.
  std::vector<int> y, p;
  for (const auto& v : val) {
    y.push_back(class_index(v.label, TaskMode::Severity));
    p.push_back(predict_video(*r.model, v, tiny_clips(), tc.eval_seed).label);
  }
  int hits_by_class[3] = {0, 0, 0}, support[3] = {0, 0, 0};
  for (std::size_t i = 0; i < y.size(); ++i) {
    ++support[y[i]];
    hits_by_class[y[i]] += y[i] == p[i];
  }
  double bacc = 0.0;
  for (int c = 0; c < 3; ++c) bacc += static_cast<double>(hits_by_class[c]) / support[c];
  CHECK(bacc / 3.0 == doctest::Approx(best_acc));
}

TEST_CASE("train: input validation") {
  const auto videos = phantom_videos(kSix, 14);
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train(tiny_model(1), std::vector<EchoVideo>{}, {}, TaskMode::Severity, tc, tiny_clips(),
                        AugmentConfig{}),
                  Error);
  // Severity training without any Mild video has an absent class.
  const std::vector<EchoVideo> no_mild = {videos[0], videos[2], videos[3], videos[5]};
  CHECK_THROWS_WITH_AS(train(tiny_model(1), no_mild, {}, TaskMode::Severity, tc, tiny_clips(), AugmentConfig{}),
                       doctest::Contains("absent"), Error);
  tc.epochs = 0;
  CHECK_THROWS_AS(train(tiny_model(1), videos, {}, TaskMode::Severity, tc, tiny_clips(), AugmentConfig{}), Error);
}
