#include "echopipe/explain.hpp"

#include <algorithm>
#include <cmath>

#include "echopipe/error.hpp"
#include "echopipe/metrics.hpp"
#include "echopipe/video.hpp"

namespace echopipe {
namespace {

struct Axis {
  std::vector<std::size_t> lo, hi;
  std::vector<double> w;
};

Axis interp_axis(std::size_t in, std::size_t out) {
  Axis a;
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t l = std::min(static_cast<std::size_t>(src), in - 1);
    const std::size_t h = std::min(l + 1, in - 1);
    a.lo.push_back(l);
    a.hi.push_back(h);
    a.w.push_back(src - static_cast<double>(l));
  }
  return a;
}

}  // namespace

std::string_view to_string(AlphaPooling p) noexcept { return p == AlphaPooling::SpaceOnly ? "space" : "space_time"; }

std::optional<AlphaPooling> parse_alpha_pooling(std::string_view text) noexcept {
  if (text == "space_time") return AlphaPooling::SpaceTime;
  if (text == "space") return AlphaPooling::SpaceOnly;
  return std::nullopt;
}

Tensor<double> upsample_trilinear(const Tensor<double>& volume, std::size_t depth, std::size_t height,
                                  std::size_t width) {
  if (volume.rank() != 3) throw Error("upsample_trilinear expects [D, H, W], got " + shape_string(volume.shape()));
  const std::size_t D = volume.dim(0), H = volume.dim(1), W = volume.dim(2);
  const Axis ad = interp_axis(D, depth), ah = interp_axis(H, height), aw = interp_axis(W, width);
  Tensor<double> out({depth, height, width});
  const auto at = [&](std::size_t d, std::size_t h, std::size_t w) { return volume[(d * H + h) * W + w]; };
  for (std::size_t d = 0; d < depth; ++d) {
    const double wd = ad.w[d];
    for (std::size_t h = 0; h < height; ++h) {
      const double wh = ah.w[h];
      for (std::size_t w = 0; w < width; ++w) {
        const double ww = aw.w[w];
        const auto plane = [&](std::size_t dd) {
          const double top = (1 - ww) * at(dd, ah.lo[h], aw.lo[w]) + ww * at(dd, ah.lo[h], aw.hi[w]);
          const double bot = (1 - ww) * at(dd, ah.hi[h], aw.lo[w]) + ww * at(dd, ah.hi[h], aw.hi[w]);
          return (1 - wh) * top + wh * bot;
        };
        out[(d * height + h) * width + w] = (1 - wd) * plane(ad.lo[d]) + wd * plane(ad.hi[d]);
      }
    }
  }
  return out;
}

template <typename T>
SaliencyVolume grad_cam_sequential(nn::Sequential<T>& net, const Tensor<T>& input, std::size_t layer_index,
                                   const GradCamConfig& config) {
  if (input.rank() != 5 || input.dim(0) != 1) {
    throw Error("grad_cam expects a single clip [1, C, k, H, W], got " + shape_string(input.shape()));
  }
  if (layer_index >= net.size()) throw Error("grad_cam: layer index out of range");
  const bool was_training = net.training();
  net.set_training(false);

  Tensor<T> acts;
  const Tensor<T> logits = net.forward_capture(input, layer_index, acts);
  if (acts.rank() != 5) {
    net.set_training(was_training);
    throw Error("grad_cam: layer '" + net.child(layer_index).name() + "' does not produce a [C, t, h, w] feature map");
  }
  if (logits.rank() != 2 || logits.dim(0) != 1) {
    net.set_training(was_training);
    throw Error("grad_cam: network output is not [1, classes]");
  }
  const std::size_t classes = logits.dim(1);
  SaliencyVolume out;
  {
    const Tensor<T> p = softmax_rows(logits);
    for (std::size_t c = 0; c < classes; ++c) out.probs.push_back(static_cast<double>(p[c]));
  }
  out.target_class = config.target_class
                         ? *config.target_class
                         : static_cast<int>(std::max_element(logits.data(), logits.data() + classes) - logits.data());
  if (out.target_class < 0 || static_cast<std::size_t>(out.target_class) >= classes) {
    net.set_training(was_training);
    throw Error("grad_cam: target class " + std::to_string(out.target_class) + " out of range");
  }

  Tensor<T> seed({1, classes}, T{0});
  seed[static_cast<std::size_t>(out.target_class)] = T{1};
  const Tensor<T> grads = net.backward_to(seed, layer_index);
  std::vector<nn::Parameter<T>*> params;
  net.collect_parameters(params);
  for (auto* p : params) p->zero_grad();
  net.set_training(was_training);

  const std::size_t C = acts.dim(1), Tt = acts.dim(2), Hh = acts.dim(3), Ww = acts.dim(4);
  const std::size_t plane = Hh * Ww, volume = Tt * plane;
  out.source_layer = net.child(layer_index).name();
  out.feature_shape = {Tt, Hh, Ww};
  out.raw = Tensor<double>({Tt, Hh, Ww}, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const T* a = acts.data() + c * volume;
    const T* g = grads.data() + c * volume;
    if (config.pooling == AlphaPooling::SpaceTime) {
      double alpha = 0.0;
      for (std::size_t i = 0; i < volume; ++i) alpha += static_cast<double>(g[i]);
      alpha /= static_cast<double>(volume);
      for (std::size_t i = 0; i < volume; ++i) out.raw[i] += alpha * static_cast<double>(a[i]);
    } else {
      for (std::size_t t = 0; t < Tt; ++t) {
        double alpha = 0.0;
        for (std::size_t i = 0; i < plane; ++i) alpha += static_cast<double>(g[t * plane + i]);
        alpha /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) out.raw[t * plane + i] += alpha * static_cast<double>(a[t * plane + i]);
      }
    }
  }
  for (auto& v : out.raw.storage()) v = std::max(0.0, v);

  const Tensor<double> up = upsample_trilinear(out.raw, input.dim(2), input.dim(3), input.dim(4));
  const double peak = *std::max_element(up.storage().begin(), up.storage().end());
  out.values = Tensor<float>(up.shape());
  if (peak > 0.0) {
    for (std::size_t i = 0; i < up.size(); ++i) out.values[i] = static_cast<float>(up[i] / peak);
  }
  return out;
}

template SaliencyVolume grad_cam_sequential(nn::Sequential<float>&, const Tensor<float>&, std::size_t,
                                            const GradCamConfig&);
template SaliencyVolume grad_cam_sequential(nn::Sequential<double>&, const Tensor<double>&, std::size_t,
                                            const GradCamConfig&);

SaliencyVolume grad_cam_3d(Model<float>& model, const Tensor<float>& clip, const GradCamConfig& config) {
  const std::size_t layer = model.block_index(config.layer);
  Tensor<float> input = clip.rank() == 3 ? clip.reshaped({1, 1, clip.dim(0), clip.dim(1), clip.dim(2)}) : clip;
  const auto& c = model.config();
  const Shape expected{1, c.input_channels, c.clip_len, c.input_height, c.input_width};
  if (input.shape() != expected) {
    throw Error("grad_cam: clip shape " + shape_string(clip.shape()) + " does not match model input " +
                shape_string(expected));
  }
  SaliencyVolume out = grad_cam_sequential(model.net(), input, layer, config);
  out.source_layer = config.layer;
  return out;
}

double saliency_mass_in_box(const Tensor<float>& saliency, const PixelBox& box) {
  if (saliency.rank() != 3) throw Error("saliency must be [k, H, W]");
  const std::size_t K = saliency.dim(0), H = saliency.dim(1), W = saliency.dim(2);
  double inside = 0.0, total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) {
        const double v = saliency[(k * H + r) * W + c];
        total += v;
        if (box.contains(static_cast<int>(r), static_cast<int>(c))) inside += v;
      }
    }
  }
  return total > 0.0 ? inside / total : 0.0;
}

const std::array<std::array<std::uint8_t, 3>, 256>& saliency_colormap() {
  static const auto table = [] {
    std::array<std::array<std::uint8_t, 3>, 256> t{};
    const auto ramp = [](double x) { return std::clamp(1.5 - std::abs(4.0 * x), 0.0, 1.0); };
    for (int i = 0; i < 256; ++i) {
      const double x = i / 255.0;
      const double rgb[3] = {ramp(x - 0.75), ramp(x - 0.5), ramp(x - 0.25)};
      for (int ch = 0; ch < 3; ++ch) t[i][ch] = static_cast<std::uint8_t>(std::lround(255.0 * rgb[ch]));
    }
    return t;
  }();
  return table;
}

Tensor<std::uint8_t> render_overlay(const Tensor<float>& frames, const Tensor<float>& saliency) {
  if (frames.rank() != 3 || frames.shape() != saliency.shape()) {
    throw Error("overlay: frames " + shape_string(frames.shape()) + " and saliency " +
                shape_string(saliency.shape()) + " differ");
  }
  const auto [lo_it, hi_it] = std::minmax_element(frames.span().begin(), frames.span().end());
  const bool unit = *lo_it >= 0.0f && *hi_it <= 1.0f;
  const float lo = unit ? 0.0f : *lo_it;
  const float span = unit ? 1.0f : std::max(*hi_it - *lo_it, 1e-12f);
  const auto& lut = saliency_colormap();
  Tensor<std::uint8_t> out({frames.dim(0), frames.dim(1), frames.dim(2), 3});
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::uint8_t gray = quantize8((frames[i] - lo) / span);
    const float s = std::clamp(saliency[i], 0.0f, 1.0f);
    const auto& color = lut[static_cast<std::size_t>(std::lround(255.0f * s))];
    for (int ch = 0; ch < 3; ++ch) {
      const float v = (1.0f - s) * static_cast<float>(gray) + s * static_cast<float>(color[ch]);
      out[3 * i + ch] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return out;
}

OverlayFiles overlay_export(const Tensor<float>& frames, const SaliencyVolume& saliency,
                            const std::filesystem::path& path, float fps) {
  OverlayFiles files{path, path.parent_path() / (path.stem().string() + ".saliency.echo")};
  const Tensor<std::uint8_t> rgb = render_overlay(frames, saliency.values);
  write_rgb_video(rgb, fps, files.overlay);
  write_float_volume(saliency.values, fps, files.saliency);
  return files;
}

SanityReport sanity_check_randomization(Model<float>& model, const std::vector<Tensor<float>>& clips,
                                        const GradCamConfig& config, std::uint64_t seed) {
  if (clips.empty()) throw Error("sanity check needs at least one clip");
  std::vector<SaliencyVolume> reference;
  for (const auto& clip : clips) reference.push_back(grad_cam_3d(model, clip, config));

  auto randomized = model.clone();
  randomized->set_training(false);
  SanityReport report;
  const char* cascade[] = {"fc", "layer4", "layer3", "layer2", "layer1", "stem"};
  std::mt19937_64 rng(seed);
  for (const char* stage : cascade) {
    randomized->net().child(randomized->block_index(stage)).reset_parameters(rng);
    StageCorrelation sc;
    sc.stage = stage;
    for (std::size_t i = 0; i < clips.size(); ++i) {
      GradCamConfig fixed = config;
      fixed.target_class = reference[i].target_class;
      const SaliencyVolume s = grad_cam_3d(*randomized, clips[i], fixed);
      const std::vector<double> a(reference[i].values.storage().begin(), reference[i].values.storage().end());
      const std::vector<double> b(s.values.storage().begin(), s.values.storage().end());
      sc.per_clip.push_back(spearman(a, b));
    }
    sc.mean_correlation = mean_std(sc.per_clip).mean;
    report.stages.push_back(std::move(sc));
  }
  report.final_mean_correlation = report.stages.back().mean_correlation;
  report.pass = report.final_mean_correlation < 0.5;
  return report;
}

}  // namespace echopipe
