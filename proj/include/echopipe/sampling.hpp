#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "echopipe/labels.hpp"
#include "echopipe/tensor.hpp"
#include "echopipe/video.hpp"

namespace echopipe {

struct ClipConfig {
  std::size_t n_clips = 10;
  std::size_t clip_len = 12;
  /// Loop videos shorter than clip_len instead of failing.
  bool pad_short = false;

  void validate() const;
};

/// A k-frame contiguous window of a video: the network's input unit.
struct Clip {
  Tensor<float> frames;  // [k, H, W]
  std::string patient_id;
  ViewTag view = ViewTag::PLAX;
  std::size_t start_frame = 0;
  SeverityLabel label = SeverityLabel::None;
  bool padded = false;
};

Clip clip_at(const EchoVideo& video, std::size_t start, std::size_t clip_len);

/// n clips with starts drawn independently and uniformly from [0, T - k].
std::vector<Clip> extract_clips(const EchoVideo& video, const ClipConfig& config, std::mt19937_64& rng);

/// Frozen evaluation clips: the rng is seeded from `seed` and the video identity,
/// so repeated evaluation of one video sees the same windows.
std::vector<Clip> extract_eval_clips(const EchoVideo& video, const ClipConfig& config, std::uint64_t seed,
                                     const std::string& video_key);

/// FNV-1a, used to derive stable per-video seeds.
std::uint64_t stable_hash(std::string_view text) noexcept;

/// weight(sample) = 1 / count(class(sample)). Throws if any of the `num_classes`
/// classes has no sample, listing the missing classes.
std::vector<double> inverse_class_weights(std::span<const int> class_ids, int num_classes);

/// Draws `count` indices with replacement, proportional to `weights`.
std::vector<std::size_t> weighted_sample(std::span<const double> weights, std::size_t count, std::mt19937_64& rng);

}  // namespace echopipe
