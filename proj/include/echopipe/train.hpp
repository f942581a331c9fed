#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "echopipe/aggregate.hpp"
#include "echopipe/augment.hpp"
#include "echopipe/manifest.hpp"
#include "echopipe/network.hpp"
#include "echopipe/preprocess.hpp"
#include "echopipe/sampling.hpp"
#include "echopipe/video.hpp"

namespace echopipe {

enum class CheckpointSelection { BestValidation, Last };

std::string_view to_string(CheckpointSelection s) noexcept;
std::optional<CheckpointSelection> parse_selection(std::string_view text) noexcept;

struct TrainConfig {
  std::size_t epochs = 150;
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  /// Clips drawn per training video per epoch; 0 means ClipConfig::n_clips.
  std::size_t clips_per_video = 0;
  CheckpointSelection selection = CheckpointSelection::BestValidation;
  /// Seed of the frozen evaluation clips.
  std::uint64_t eval_seed = 7;
  bool verbose = false;

  void validate() const;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_balanced_accuracy = 0.0;
  /// NaN when no validation videos were given.
  double val_balanced_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<double> batch_losses;
  /// Epoch whose weights were kept.
  std::size_t selected_epoch = 0;
};

struct TrainResult {
  std::unique_ptr<Model<float>> model;
  TrainHistory history;
};

/// Loads every video of a manifest into canonical form: full preprocessing, or
/// normalization only when the manifest is marked canonical.
std::vector<EchoVideo> load_videos(const DatasetManifest& manifest, const PreprocessConfig& config);

/// Key that identifies a video for frozen evaluation clips.
std::string video_key(const EchoVideo& video);

/// Stacks [k, H, W] clips into a [B, 1, k, H, W] batch.
Tensor<float> stack_clips(const std::vector<const Tensor<float>*>& clips);

/// Softmax probabilities per clip, computed in eval mode.
std::vector<std::vector<double>> predict_clip_probs(Model<float>& model, const std::vector<Clip>& clips,
                                                    std::size_t batch_size = 8);

/// Frozen evaluation clips of one video, reduced by view_vote.
ViewPrediction predict_video(Model<float>& model, const EchoVideo& video, const ClipConfig& clips,
                             std::uint64_t eval_seed);

/// Trains on canonical videos of a single view. Each epoch draws
/// `clips_per_video * |videos|` class-balanced samples with fresh clip windows,
/// augments them and takes Adam steps on the cross-entropy. When validation videos
/// are given, the weights with the best validation balanced accuracy are kept
/// (later epochs win ties).
TrainResult train(std::unique_ptr<Model<float>> model, const std::vector<EchoVideo>& train_videos,
                  const std::vector<EchoVideo>& val_videos, TaskMode mode, const TrainConfig& config,
                  const ClipConfig& clips, const AugmentConfig& augment,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Manifest front end: filters to `view`, loads and preprocesses, then trains.
TrainResult train(std::unique_ptr<Model<float>> model, const DatasetManifest& train_manifest, ViewTag view,
                  TaskMode mode, const PreprocessConfig& preprocess, const TrainConfig& config,
                  const ClipConfig& clips, const AugmentConfig& augment,
                  const DatasetManifest* val_manifest = nullptr);

}  // namespace echopipe
