#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>

#include "echopipe/tensor.hpp"

namespace echopipe {

using Range = std::pair<double, double>;

struct AugmentConfig {
  double apply_probability = 0.9;
  Range sharpness_range = {0.5, 2.0};
  Range brightness_range = {-0.2, 0.2};
  Range gamma_range = {0.7, 1.4};
  double salt_pepper_amount = 0.01;     // max fraction of pixels
  double gaussian_noise_sigma = 0.05;   // max sigma, unit intensity scale
  double speckle_amount = 0.1;          // max multiplicative noise variance
  double max_rotation_deg = 15.0;
  double max_translation_frac = 0.1;
  double min_scale = 0.8;
  double max_zoom = 1.2;

  void validate() const;
};

enum class NoiseKind { SaltPepper, Gaussian };

/// One draw of augmentation parameters. Disengaged members are skipped.
struct AugmentParams {
  bool applied = false;
  std::optional<double> sharpness;
  std::optional<double> brightness;
  std::optional<double> gamma;
  std::optional<std::pair<NoiseKind, double>> noise;  // kind, amount (fraction or sigma)
  std::optional<double> speckle;                      // variance
  std::optional<double> rotation_deg;
  std::optional<std::pair<double, double>> translation;  // (x, y) as fractions of (W, H)
  std::optional<double> scale;

  bool has_spatial() const { return rotation_deg || translation || scale; }
};

/// Independent stream per (global seed, sample index, epoch).
std::mt19937_64 make_sample_rng(std::uint64_t global_seed, std::uint64_t sample_index, std::uint64_t epoch);

/// Gate with apply_probability; inside the gate every sub-transform has its own coin
/// flip (at least one is forced on so a passed gate never yields the identity).
AugmentParams sample_augment_params(std::mt19937_64& rng, const AugmentConfig& config);

/// Applies one parameter draw identically to all frames of a [k, H, W] clip.
/// Noise fields are drawn once per clip from `rng`. Intensity transforms run in
/// the clip's own [min, max] range and are clamped to it; spatial transforms
/// (about the frame centre, positive angles turn +x towards +y) fill exposed
/// pixels with the clip minimum.
Tensor<float> apply_augment(const Tensor<float>& clip, const AugmentParams& params, std::mt19937_64& rng);

Tensor<float> augment_clip(const Tensor<float>& clip, std::mt19937_64& rng, const AugmentConfig& config);

}  // namespace echopipe
