#include "echopipe/sampling.hpp"

#include <algorithm>

#include "echopipe/error.hpp"
#include "echopipe/rng.hpp"

namespace echopipe {

void ClipConfig::validate() const {
  if (n_clips < 1) throw ConfigError("clips n_clips must be >= 1");
  if (clip_len < 1) throw ConfigError("clips clip_len must be >= 1");
}

Clip clip_at(const EchoVideo& video, std::size_t start, std::size_t clip_len) {
  const std::size_t T = video.num_frames(), HW = video.height() * video.width();
  Clip clip;
  clip.patient_id = video.patient_id;
  clip.view = video.view;
  clip.label = video.label;
  clip.start_frame = start;
  clip.frames = Tensor<float>({clip_len, video.height(), video.width()});
  if (start + clip_len <= T) {
    std::copy_n(video.frames.data() + start * HW, clip_len * HW, clip.frames.data());
  } else {
    // Loop the video to reach clip_len frames.
    clip.padded = true;
    for (std::size_t i = 0; i < clip_len; ++i) {
      std::copy_n(video.frames.data() + ((start + i) % T) * HW, HW, clip.frames.data() + i * HW);
    }
  }
  return clip;
}

std::vector<Clip> extract_clips(const EchoVideo& video, const ClipConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::size_t T = video.num_frames(), k = config.clip_len;
  std::vector<Clip> clips;
  clips.reserve(config.n_clips);
  if (T < k) {
    if (!config.pad_short) {
      throw Error("video of " + video.patient_id + "/" + std::string(to_string(video.view)) + " has " +
                  std::to_string(T) + " frames, fewer than clip length " + std::to_string(k));
    }
    const Clip looped = clip_at(video, 0, k);
    clips.assign(config.n_clips, looped);
    return clips;
  }
  std::uniform_int_distribution<std::size_t> start(0, T - k);
  for (std::size_t i = 0; i < config.n_clips; ++i) clips.push_back(clip_at(video, start(rng), k));
  return clips;
}

std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<Clip> extract_eval_clips(const EchoVideo& video, const ClipConfig& config, std::uint64_t seed,
                                     const std::string& video_key) {
  auto rng = seeded_rng({seed, stable_hash(video_key), 0xE7A1});
  return extract_clips(video, config, rng);
}

std::vector<double> inverse_class_weights(std::span<const int> class_ids, int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int c : class_ids) {
    if (c < 0 || c >= num_classes) throw Error("class id " + std::to_string(c) + " out of range");
    ++counts[static_cast<std::size_t>(c)];
  }
  std::string missing;
  for (int c = 0; c < num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) missing += (missing.empty() ? "" : ", ") + std::to_string(c);
  }
  if (!missing.empty()) throw Error("classes absent from training labels: " + missing);
  std::vector<double> weights;
  weights.reserve(class_ids.size());
  for (int c : class_ids) weights.push_back(1.0 / static_cast<double>(counts[static_cast<std::size_t>(c)]));
  return weights;
}

std::vector<std::size_t> weighted_sample(std::span<const double> weights, std::size_t count, std::mt19937_64& rng) {
  if (weights.empty()) throw Error("weighted_sample needs at least one weight");
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = dist(rng);
  return out;
}

}  // namespace echopipe
