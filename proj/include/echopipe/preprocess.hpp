#pragma once

#include <cstdint>

#include "echopipe/phantom.hpp"
#include "echopipe/tensor.hpp"
#include "echopipe/video.hpp"

namespace echopipe {

/// Binary [H, W] mask of the ultrasound scan sector and its tight bounding box.
struct SectorMask {
  Tensor<std::uint8_t> mask;
  PixelBox bounding_box;

  std::size_t count() const;
};

enum class NormalizationMode { PerVideo, PerFrame, Dataset, None };

struct PreprocessConfig {
  std::size_t target_height = 224;
  std::size_t target_width = 224;
  /// Number of quantization steps of [0, 1] used by histogram equalization.
  std::size_t equalization_bins = 256;
  /// Temporal-max threshold for sector detection, as a fraction of the video maximum.
  double sector_threshold = 0.02;
  NormalizationMode normalization = NormalizationMode::PerVideo;
  /// Used only with NormalizationMode::Dataset.
  double dataset_mean = 0.0;
  double dataset_std = 1.0;

  void validate() const;
};

std::string_view to_string(NormalizationMode mode) noexcept;
std::optional<NormalizationMode> parse_normalization(std::string_view text) noexcept;

/// Temporal max > threshold * max, largest 8-connected component, filled convex hull.
/// Throws Error("no scan sector found") when nothing survives the threshold.
SectorMask detect_sector_mask(const Tensor<float>& frames, double threshold_fraction = 0.02);
inline SectorMask detect_sector_mask(const EchoVideo& video, double threshold_fraction = 0.02) {
  return detect_sector_mask(video.frames, threshold_fraction);
}

/// CDF remapping of one [H, W] frame with values in [0, 1]. Intensities are
/// quantized to the grid k/bins (k = 0..bins), the cumulative histogram is taken
/// over pixels where `mask` is set (all pixels if `mask` is null), and each pixel
/// maps to its CDF value rounded up onto the same grid. Pixels outside the mask are
/// left untouched. A frame with a single occupied level is returned unchanged.
Tensor<float> histogram_equalize(const Tensor<float>& frame, std::size_t bins,
                                 const Tensor<std::uint8_t>* mask = nullptr);

/// Bilinear resize of a [T, H, W] stack, align-corners=false convention.
Tensor<float> resize_bilinear(const Tensor<float>& frames, std::size_t out_height, std::size_t out_width);

struct PreprocessResult {
  EchoVideo video;
  SectorMask sector;  // in source coordinates
  Tensor<std::uint8_t> canonical_mask;  // [target_h, target_w]
};

/// mask -> crop to the sector box -> bilinear resize (divided by the resized mask
/// coverage) -> per-frame equalization
/// inside the sector -> normalization.
PreprocessResult preprocess_video_detailed(const EchoVideo& video, const PreprocessConfig& config);
EchoVideo preprocess_video(const EchoVideo& video, const PreprocessConfig& config);

/// Normalizes canonical [0, 1] frames according to `config.normalization`.
Tensor<float> normalize_frames(const Tensor<float>& frames, const PreprocessConfig& config);

/// Maps a box in source pixel coordinates into canonical (cropped + resized) coordinates.
PixelBox map_box_to_canonical(const PixelBox& box, const PixelBox& crop, std::size_t target_height,
                              std::size_t target_width);

}  // namespace echopipe
