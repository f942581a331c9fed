#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "echopipe/network.hpp"
#include "echopipe/phantom.hpp"

namespace echopipe {

enum class AlphaPooling {
  SpaceTime,  // one weight per channel, averaged over (t, h, w)
  SpaceOnly   // one weight per channel and time step, averaged over (h, w)
};

std::string_view to_string(AlphaPooling p) noexcept;
std::optional<AlphaPooling> parse_alpha_pooling(std::string_view text) noexcept;

struct GradCamConfig {
  std::string layer = "last_conv";
  /// Explicit class to explain; the predicted class when empty.
  std::optional<int> target_class;
  AlphaPooling pooling = AlphaPooling::SpaceTime;
};

struct SaliencyVolume {
  /// [k, H, W], non-negative, max 1 unless identically zero.
  Tensor<float> values;
  int target_class = 0;
  std::string source_layer;
  /// (t', h', w') of the explained feature map.
  Shape feature_shape;
  /// ReLU(sum_c alpha_c A_c) at feature resolution, before upsampling and normalization.
  Tensor<double> raw;
  /// Softmax output for the clip.
  std::vector<double> probs;
};

/// Trilinear resize of [D, H, W] with half-pixel centres (align-corners=false);
/// source coordinates below zero clamp to the first sample.
Tensor<double> upsample_trilinear(const Tensor<double>& volume, std::size_t depth, std::size_t height,
                                  std::size_t width);

/// Grad-CAM on any Sequential whose child `layer_index` emits [1, C, t, h, w].
/// `input` is [1, channels, k, H, W]. Runs in eval mode; parameter gradients are
/// cleared afterwards.
template <typename T>
SaliencyVolume grad_cam_sequential(nn::Sequential<T>& net, const Tensor<T>& input, std::size_t layer_index,
                                   const GradCamConfig& config);

/// Grad-CAM for a classifier; `clip` is [k, H, W] or [1, 1, k, H, W].
SaliencyVolume grad_cam_3d(Model<float>& model, const Tensor<float>& clip, const GradCamConfig& config = {});

/// Fraction of total saliency inside `box` (summed over frames). Zero for a zero volume.
double saliency_mass_in_box(const Tensor<float>& saliency, const PixelBox& box);

/// 256-entry jet colormap, index = round(255 * saliency).
const std::array<std::array<std::uint8_t, 3>, 256>& saliency_colormap();

/// Alpha-blends the colormap over grayscale frames with weight = saliency.
/// Frames already in [0, 1] are used directly; anything else is min-max scaled.
Tensor<std::uint8_t> render_overlay(const Tensor<float>& frames, const Tensor<float>& saliency);

struct OverlayFiles {
  std::filesystem::path overlay;   // ECHO1 RGB
  std::filesystem::path saliency;  // ECHO1 float32
};

/// Writes the overlay to `path` and the raw saliency to "<stem>.saliency.echo" beside it.
OverlayFiles overlay_export(const Tensor<float>& frames, const SaliencyVolume& saliency,
                            const std::filesystem::path& path, float fps = 25.0f);

struct StageCorrelation {
  std::string stage;
  double mean_correlation = 0.0;
  std::vector<double> per_clip;
};

struct SanityReport {
  /// One entry per randomized block, from the head backwards.
  std::vector<StageCorrelation> stages;
  double final_mean_correlation = 0.0;
  bool pass = false;
};

/// Cascading randomization: re-initializes blocks from the head towards the input
/// and compares each saliency volume with the original by Spearman rank
/// correlation. Passes when the fully randomized mean correlation is below 0.5.
/// The target class stays the original model's choice throughout.
SanityReport sanity_check_randomization(Model<float>& model, const std::vector<Tensor<float>>& clips,
                                        const GradCamConfig& config = {}, std::uint64_t seed = 99);

}  // namespace echopipe
