#include "echopipe/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "echopipe/error.hpp"
#include "echopipe/rng.hpp"

namespace echopipe {
namespace {

double draw(std::mt19937_64& rng, const Range& r) {
  return std::uniform_real_distribution<double>(r.first, r.second)(rng);
}

bool coin(std::mt19937_64& rng) { return std::bernoulli_distribution(0.5)(rng); }

// PIL-style sharpness: blend between a 3x3 smoothed frame and the original.
void sharpen(float* frame, std::size_t H, std::size_t W, float factor, std::vector<float>& scratch) {
  scratch.assign(frame, frame + H * W);
  for (std::size_t r = 1; r + 1 < H; ++r) {
    for (std::size_t c = 1; c + 1 < W; ++c) {
      float acc = 4.0f * scratch[r * W + c];
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) acc += scratch[(r + dr) * W + (c + dc)];
      }
      const float blurred = acc / 13.0f;
      frame[r * W + c] = blurred + factor * (scratch[r * W + c] - blurred);
    }
  }
}

}  // namespace

void AugmentConfig::validate() const {
  if (!(apply_probability >= 0.0 && apply_probability <= 1.0)) throw ConfigError("augment apply_probability must be in [0, 1]");
  const auto ordered = [](const Range& r, const char* name) {
    if (!(r.first <= r.second)) throw ConfigError(std::string("augment ") + name + " range is inverted");
  };
  ordered(sharpness_range, "sharpness");
  ordered(brightness_range, "brightness");
  ordered(gamma_range, "gamma");
  if (!(gamma_range.first > 0.0)) throw ConfigError("augment gamma must be positive");
  if (!(sharpness_range.first >= 0.0)) throw ConfigError("augment sharpness must be non-negative");
  if (!(salt_pepper_amount >= 0.0 && salt_pepper_amount <= 1.0)) throw ConfigError("augment salt_pepper_amount must be in [0, 1]");
  if (!(gaussian_noise_sigma >= 0.0)) throw ConfigError("augment gaussian_noise_sigma must be >= 0");
  if (!(speckle_amount >= 0.0)) throw ConfigError("augment speckle_amount must be >= 0");
  if (!(max_rotation_deg >= 0.0 && max_rotation_deg <= 15.0)) throw ConfigError("augment max_rotation_deg must be in [0, 15]");
  if (!(max_translation_frac >= 0.0 && max_translation_frac <= 0.1)) throw ConfigError("augment max_translation_frac must be in [0, 0.1]");
  if (!(min_scale >= 0.8 && min_scale <= 1.0)) throw ConfigError("augment min_scale must be in [0.8, 1]");
  if (!(max_zoom >= 1.0 && max_zoom <= 1.2)) throw ConfigError("augment max_zoom must be in [1, 1.2]");
}

std::mt19937_64 make_sample_rng(std::uint64_t global_seed, std::uint64_t sample_index, std::uint64_t epoch) {
  return seeded_rng({global_seed, sample_index, epoch, 0xA06});
}

AugmentParams sample_augment_params(std::mt19937_64& rng, const AugmentConfig& config) {
  AugmentParams p;
  if (!std::bernoulli_distribution(config.apply_probability)(rng)) return p;
  p.applied = true;

  constexpr int kSubTransforms = 8;
  std::array<bool, kSubTransforms> on{};
  for (bool& b : on) b = coin(rng);
  if (std::none_of(on.begin(), on.end(), [](bool b) { return b; })) {
    on[std::uniform_int_distribution<int>(0, kSubTransforms - 1)(rng)] = true;
  }
  if (on[0]) p.sharpness = draw(rng, config.sharpness_range);
  if (on[1]) p.brightness = draw(rng, config.brightness_range);
  if (on[2]) p.gamma = draw(rng, config.gamma_range);
  if (on[3]) {
    if (coin(rng)) {
      p.noise = std::make_pair(NoiseKind::SaltPepper, draw(rng, {0.0, config.salt_pepper_amount}));
    } else {
      p.noise = std::make_pair(NoiseKind::Gaussian, draw(rng, {0.0, config.gaussian_noise_sigma}));
    }
  }
  if (on[4]) p.speckle = draw(rng, {0.0, config.speckle_amount});
  if (on[5]) p.rotation_deg = draw(rng, {-config.max_rotation_deg, config.max_rotation_deg});
  if (on[6]) {
    const Range t{-config.max_translation_frac, config.max_translation_frac};
    const double tx = draw(rng, t);
    p.translation = std::make_pair(tx, draw(rng, t));
  }
  if (on[7]) p.scale = draw(rng, {config.min_scale, config.max_zoom});
  return p;
}

Tensor<float> apply_augment(const Tensor<float>& clip, const AugmentParams& params, std::mt19937_64& rng) {
  if (clip.rank() != 3) throw Error("augment expects a [k, H, W] clip, got " + shape_string(clip.shape()));
  if (!params.applied) return clip;
  const std::size_t K = clip.dim(0), H = clip.dim(1), W = clip.dim(2), HW = H * W;
  Tensor<float> out = clip;
  const auto [min_it, max_it] = std::minmax_element(clip.span().begin(), clip.span().end());
  const float lo = *min_it, hi = *max_it;
  const float span = hi - lo;

  const bool intensity = params.sharpness || params.brightness || params.gamma || params.noise || params.speckle;
  if (intensity && span > 0.0f) {
    // Shared noise fields keep the clip temporally coherent.
    std::vector<float> additive(HW, 0.0f), multiplicative(HW, 1.0f);
    std::vector<std::int8_t> impulse(HW, 0);
    if (params.noise) {
      if (params.noise->first == NoiseKind::SaltPepper) {
        std::bernoulli_distribution hit(params.noise->second);
        for (auto& v : impulse) v = hit(rng) ? (coin(rng) ? 1 : -1) : 0;
      } else {
        std::normal_distribution<float> n(0.0f, static_cast<float>(params.noise->second));
        for (auto& v : additive) v = n(rng);
      }
    }
    if (params.speckle) {
      std::normal_distribution<float> n(0.0f, static_cast<float>(std::sqrt(*params.speckle)));
      for (auto& v : multiplicative) v = 1.0f + n(rng);
    }

    std::vector<float> scratch;
    for (std::size_t k = 0; k < K; ++k) {
      float* f = out.data() + k * HW;
      for (std::size_t i = 0; i < HW; ++i) f[i] = (f[i] - lo) / span;
      if (params.sharpness) sharpen(f, H, W, static_cast<float>(*params.sharpness), scratch);
      for (std::size_t i = 0; i < HW; ++i) {
        float u = std::clamp(f[i], 0.0f, 1.0f);
        if (params.brightness) u = std::clamp(u + static_cast<float>(*params.brightness), 0.0f, 1.0f);
        if (params.gamma) u = std::pow(u, static_cast<float>(*params.gamma));
        u = u * multiplicative[i] + additive[i];
        if (impulse[i] != 0) u = impulse[i] > 0 ? 1.0f : 0.0f;
        f[i] = lo + span * std::clamp(u, 0.0f, 1.0f);
      }
    }
  }

  if (params.has_spatial()) {
    const double theta = params.rotation_deg.value_or(0.0) * std::numbers::pi / 180.0;
    const double s = params.scale.value_or(1.0);
    const double tx = params.translation ? params.translation->first * static_cast<double>(W) : 0.0;
    const double ty = params.translation ? params.translation->second * static_cast<double>(H) : 0.0;
    const double cx = 0.5 * (static_cast<double>(W) - 1.0), cy = 0.5 * (static_cast<double>(H) - 1.0);
    const double cs = std::cos(theta), sn = std::sin(theta);
    const Tensor<float> src = out;
    for (std::size_t k = 0; k < K; ++k) {
      const float* in = src.data() + k * HW;
      float* dst = out.data() + k * HW;
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          // Inverse of p' = c + s R(theta) (p - c) + t.
          const double dx = (static_cast<double>(x) - cx - tx) / s;
          const double dy = (static_cast<double>(y) - cy - ty) / s;
          const double sx = cx + cs * dx + sn * dy;
          const double sy = cy - sn * dx + cs * dy;
          const double fx = std::floor(sx), fy = std::floor(sy);
          const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
          const double wx = sx - fx, wy = sy - fy;
          const auto sample = [&](long yy, long xx) -> double {
            if (xx < 0 || yy < 0 || xx >= static_cast<long>(W) || yy >= static_cast<long>(H)) return lo;
            return in[static_cast<std::size_t>(yy) * W + static_cast<std::size_t>(xx)];
          };
          const double v = (1 - wy) * ((1 - wx) * sample(y0, x0) + wx * sample(y0, x0 + 1)) +
                           wy * ((1 - wx) * sample(y0 + 1, x0) + wx * sample(y0 + 1, x0 + 1));
          dst[y * W + x] = static_cast<float>(v);
        }
      }
    }
  }
  return out;
}

Tensor<float> augment_clip(const Tensor<float>& clip, std::mt19937_64& rng, const AugmentConfig& config) {
  const AugmentParams params = sample_augment_params(rng, config);
  return apply_augment(clip, params, rng);
}

}  // namespace echopipe
