#include "echopipe/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "echopipe/error.hpp"
#include "echopipe/metrics.hpp"
#include "echopipe/rng.hpp"

namespace echopipe {

std::string_view to_string(CheckpointSelection s) noexcept {
  return s == CheckpointSelection::Last ? "last" : "best_validation";
}

std::optional<CheckpointSelection> parse_selection(std::string_view text) noexcept {
  if (text == "best_validation") return CheckpointSelection::BestValidation;
  if (text == "last") return CheckpointSelection::Last;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("train batch_size must be >= 1");
}

std::vector<EchoVideo> load_videos(const DatasetManifest& manifest, const PreprocessConfig& config) {
  config.validate();
  std::vector<EchoVideo> out;
  out.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    VideoFrames vf = read_video(manifest.resolve(r));
    EchoVideo v{r.patient_id, r.view, r.label, std::move(vf.frames), vf.fps};
    if (manifest.canonical) {
      if (v.height() != config.target_height || v.width() != config.target_width) {
        throw Error("canonical video " + r.video_path.string() + " is " + std::to_string(v.height()) + "x" +
                    std::to_string(v.width()) + ", expected " + std::to_string(config.target_height) + "x" +
                    std::to_string(config.target_width));
      }
      v.frames = normalize_frames(v.frames, config);
    } else {
      v = preprocess_video(v, config);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string video_key(const EchoVideo& video) {
  return video.patient_id + "/" + std::string(to_string(video.view));
}

Tensor<float> stack_clips(const std::vector<const Tensor<float>*>& clips) {
  if (clips.empty()) throw Error("stack_clips: no clips");
  const Shape& s = clips.front()->shape();
  if (s.size() != 3) throw Error("stack_clips: clips must be [k, H, W], got " + shape_string(s));
  Tensor<float> batch({clips.size(), 1, s[0], s[1], s[2]});
  const std::size_t n = shape_numel(s);
  for (std::size_t b = 0; b < clips.size(); ++b) {
    if (clips[b]->shape() != s) throw Error("stack_clips: clip shapes differ");
    std::copy_n(clips[b]->data(), n, batch.data() + b * n);
  }
  return batch;
}

std::vector<std::vector<double>> predict_clip_probs(Model<float>& model, const std::vector<Clip>& clips,
                                                    std::size_t batch_size) {
  const bool was_training = model.training();
  model.set_training(false);
  std::vector<std::vector<double>> out;
  out.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); i += batch_size) {
    std::vector<const Tensor<float>*> group;
    for (std::size_t j = i; j < std::min(clips.size(), i + batch_size); ++j) group.push_back(&clips[j].frames);
    const Tensor<float> probs = softmax_rows(model.forward(stack_clips(group)));
    const std::size_t C = probs.dim(1);
    for (std::size_t b = 0; b < group.size(); ++b) {
      out.emplace_back(probs.data() + b * C, probs.data() + (b + 1) * C);
    }
  }
  model.set_training(was_training);
  return out;
}

ViewPrediction predict_video(Model<float>& model, const EchoVideo& video, const ClipConfig& clips,
                             std::uint64_t eval_seed) {
  const auto eval_clips = extract_eval_clips(video, clips, eval_seed, video_key(video));
  return view_vote(predict_clip_probs(model, eval_clips), video.view);
}

TrainResult train(std::unique_ptr<Model<float>> model, const std::vector<EchoVideo>& train_videos,
                  const std::vector<EchoVideo>& val_videos, TaskMode mode, const TrainConfig& config,
                  const ClipConfig& clips, const AugmentConfig& augment,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  clips.validate();
  augment.validate();
  if (!model) throw Error("train: no model");
  if (train_videos.empty()) throw Error("train: no training videos");
  const int C = num_classes(mode);
  if (model->config().num_classes != C) {
    throw Error("train: model has " + std::to_string(model->config().num_classes) + " classes but the task has " +
                std::to_string(C));
  }

  std::vector<int> class_ids;
  for (const auto& v : train_videos) class_ids.push_back(class_index(v.label, mode));
  const std::vector<double> weights = inverse_class_weights(class_ids, C);
  const std::size_t per_video = config.clips_per_video > 0 ? config.clips_per_video : clips.n_clips;
  const std::size_t samples = per_video * train_videos.size();
  const std::size_t k = clips.clip_len;

  Adam<float> optimizer(model->parameters(), config.learning_rate, config.weight_decay);
  TrainResult result;
  std::unique_ptr<Model<float>> best;
  double best_score = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    model->set_training(true);
    auto epoch_rng = seeded_rng({config.seed, static_cast<std::uint64_t>(epoch), 0x7EA1});
    const auto picks = weighted_sample(weights, samples, epoch_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<int> y_true, y_pred;
    for (std::size_t start = 0; start < samples; start += config.batch_size) {
      const std::size_t end = std::min(samples, start + config.batch_size);
      std::vector<Tensor<float>> inputs;
      std::vector<int> targets;
      for (std::size_t i = start; i < end; ++i) {
        const EchoVideo& video = train_videos[picks[i]];
        auto rng = make_sample_rng(config.seed, i, epoch);
        const std::size_t T = video.num_frames();
        if (T < k && !clips.pad_short) {
          throw Error("video " + video_key(video) + " has " + std::to_string(T) + " frames, fewer than clip length " +
                      std::to_string(k));
        }
        const std::size_t s = T > k ? std::uniform_int_distribution<std::size_t>(0, T - k)(rng) : 0;
        inputs.push_back(augment_clip(clip_at(video, s, k).frames, rng, augment));
        targets.push_back(class_index(video.label, mode));
      }
      std::vector<const Tensor<float>*> ptrs;
      for (const auto& t : inputs) ptrs.push_back(&t);

      optimizer.zero_grad();
      const Tensor<float> logits = model->forward(stack_clips(ptrs));
      const auto lg = cross_entropy(logits, targets);
      if (!std::isfinite(lg.loss)) {
        throw TrainingDiverged("training diverged: loss is " + std::to_string(lg.loss) + " at epoch " +
                               std::to_string(epoch) + ", batch " + std::to_string(batches + 1) +
                               " (learning rate " + std::to_string(config.learning_rate) + ")");
      }
      model->backward(lg.grad, false);
      optimizer.step();

      result.history.batch_losses.push_back(lg.loss);
      loss_sum += lg.loss;
      ++batches;
      for (std::size_t b = 0; b < targets.size(); ++b) {
        const float* row = logits.data() + b * static_cast<std::size_t>(C);
        y_pred.push_back(static_cast<int>(std::max_element(row, row + C) - row));
        y_true.push_back(targets[b]);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.train_balanced_accuracy = balanced_accuracy(y_true, y_pred, C);
    rec.val_balanced_accuracy = std::numeric_limits<double>::quiet_NaN();
    if (!val_videos.empty()) {
      std::vector<int> vt, vp;
      for (const auto& v : val_videos) {
        vt.push_back(class_index(v.label, mode));
        vp.push_back(predict_video(*model, v, clips, config.eval_seed).label);
      }
      rec.val_balanced_accuracy = balanced_accuracy(vt, vp, C);
      if (config.selection == CheckpointSelection::BestValidation && rec.val_balanced_accuracy >= best_score) {
        best_score = rec.val_balanced_accuracy;
        best = model->clone();
        result.history.selected_epoch = epoch;
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(rec);
    if (config.verbose) {
      std::fprintf(stderr, "epoch %zu/%zu loss %.4f train_bacc %.3f val_bacc %.3f (%.1fs)\n", epoch, config.epochs,
                   rec.train_loss, rec.train_balanced_accuracy, rec.val_balanced_accuracy, rec.seconds);
    }
    if (on_epoch) on_epoch(rec);
  }

  if (best) {
    result.model = std::move(best);
  } else {
    result.model = std::move(model);
    result.history.selected_epoch = config.epochs;
  }
  result.model->set_training(false);
  return result;
}

TrainResult train(std::unique_ptr<Model<float>> model, const DatasetManifest& train_manifest, ViewTag view,
                  TaskMode mode, const PreprocessConfig& preprocess, const TrainConfig& config,
                  const ClipConfig& clips, const AugmentConfig& augment, const DatasetManifest* val_manifest) {
  const auto train_videos = load_videos(train_manifest.filter_view(view), preprocess);
  std::vector<EchoVideo> val_videos;
  if (val_manifest) val_videos = load_videos(val_manifest->filter_view(view), preprocess);
  return train(std::move(model), train_videos, val_videos, mode, config, clips, augment);
}

}  // namespace echopipe
