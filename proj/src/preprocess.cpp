#include "echopipe/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "echopipe/error.hpp"

namespace echopipe {
namespace {

struct Point {
  long x;  // column
  long y;  // row
};

long cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain; returns the hull counter-clockwise (in x-right, y-down
// coordinates this is clockwise on screen) without collinear points.
std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

PixelBox tight_box(const Tensor<std::uint8_t>& mask) {
  const long H = static_cast<long>(mask.dim(0)), W = static_cast<long>(mask.dim(1));
  long top = H, left = W, bottom = -1, right = -1;
  for (long r = 0; r < H; ++r) {
    for (long c = 0; c < W; ++c) {
      if (!mask[static_cast<std::size_t>(r * W + c)]) continue;
      top = std::min(top, r);
      bottom = std::max(bottom, r);
      left = std::min(left, c);
      right = std::max(right, c);
    }
  }
  if (bottom < 0) return {};
  return PixelBox{static_cast<int>(top), static_cast<int>(left), static_cast<int>(bottom - top + 1),
                  static_cast<int>(right - left + 1)};
}

// Sets every pixel whose centre lies in the convex hull of the set pixels.
// Applying it twice gives the same mask.
void fill_hull(Tensor<std::uint8_t>& mask) {
  const std::size_t W = mask.dim(1);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) pts.push_back(Point{static_cast<long>(i % W), static_cast<long>(i / W)});
  }
  const auto hull = convex_hull(std::move(pts));
  if (hull.size() < 3) return;
  const PixelBox box = tight_box(mask);
  for (int r = box.top; r < box.top + box.height; ++r) {
    for (int c = box.left; c < box.left + box.width; ++c) {
      const Point p{c, r};
      bool inside = true;
      for (std::size_t i = 0; i < hull.size() && inside; ++i) {
        inside = cross(hull[i], hull[(i + 1) % hull.size()], p) >= 0;
      }
      if (inside) mask[static_cast<std::size_t>(r) * W + static_cast<std::size_t>(c)] = 1;
    }
  }
}

// Canonical mask: resized coverage >= 0.5, extended to touch every frame edge,
// then hull-filled. A canonical video therefore re-detects to this same mask
// with the full frame as its box.
Tensor<std::uint8_t> canonical_mask_from(const Tensor<float>& coverage) {
  const std::size_t H = coverage.dim(coverage.rank() - 2), W = coverage.dim(coverage.rank() - 1);
  Tensor<std::uint8_t> mask({H, W}, 0);
  for (std::size_t i = 0; i < H * W; ++i) mask[i] = coverage[i] >= 0.5f;
  const auto touch = [&](std::size_t start, std::size_t step, std::size_t n) {
    std::size_t best = start;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = start + k * step;
      if (mask[i]) return;
      if (coverage[i] > coverage[best]) best = i;
    }
    mask[best] = 1;
  };
  touch(0, 1, W);
  touch((H - 1) * W, 1, W);
  touch(0, W, H);
  touch(W - 1, W, H);
  fill_hull(mask);
  return mask;
}

}  // namespace

std::size_t SectorMask::count() const {
  return static_cast<std::size_t>(std::count_if(mask.span().begin(), mask.span().end(), [](std::uint8_t v) { return v != 0; }));
}

void PreprocessConfig::validate() const {
  if (target_height == 0 || target_width == 0) throw ConfigError("preprocess target size must be positive");
  if (equalization_bins < 2) throw ConfigError("preprocess equalization_bins must be >= 2");
  if (!(sector_threshold >= 0.0 && sector_threshold < 1.0)) throw ConfigError("preprocess sector_threshold must be in [0, 1)");
  if (normalization == NormalizationMode::Dataset && !(dataset_std > 0.0)) {
    throw ConfigError("preprocess dataset_std must be positive");
  }
}

std::string_view to_string(NormalizationMode mode) noexcept {
  switch (mode) {
    case NormalizationMode::PerVideo: return "per_video";
    case NormalizationMode::PerFrame: return "per_frame";
    case NormalizationMode::Dataset: return "dataset";
    case NormalizationMode::None: return "none";
  }
  return "?";
}

std::optional<NormalizationMode> parse_normalization(std::string_view text) noexcept {
  for (auto m : {NormalizationMode::PerVideo, NormalizationMode::PerFrame, NormalizationMode::Dataset, NormalizationMode::None}) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

SectorMask detect_sector_mask(const Tensor<float>& frames, double threshold_fraction) {
  if (frames.rank() != 3 || frames.dim(0) == 0) throw Error("sector detection needs a [T, H, W] video with T >= 1");
  const std::size_t T = frames.dim(0), H = frames.dim(1), W = frames.dim(2), HW = H * W;

  std::vector<float> tmax(HW, 0.0f);
  for (std::size_t t = 0; t < T; ++t) {
    const float* f = frames.data() + t * HW;
    for (std::size_t i = 0; i < HW; ++i) tmax[i] = std::max(tmax[i], f[i]);
  }
  const float peak = *std::max_element(tmax.begin(), tmax.end());
  const float threshold = static_cast<float>(threshold_fraction) * peak;
  std::vector<std::uint8_t> above(HW, 0);
  bool any = false;
  for (std::size_t i = 0; i < HW; ++i) {
    above[i] = peak > 0.0f && tmax[i] > threshold;
    any = any || above[i];
  }
  if (!any) throw Error("no scan sector found");

  // Largest 8-connected component.
  std::vector<int> component(HW, -1);
  int best = -1;
  std::size_t best_size = 0;
  int next_id = 0;
  std::deque<std::size_t> queue;
  for (std::size_t seed = 0; seed < HW; ++seed) {
    if (!above[seed] || component[seed] >= 0) continue;
    const int id = next_id++;
    std::size_t size = 0;
    component[seed] = id;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      ++size;
      const long r = static_cast<long>(p / W), c = static_cast<long>(p % W);
      for (long dr = -1; dr <= 1; ++dr) {
        for (long dc = -1; dc <= 1; ++dc) {
          const long rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(H) || cc >= static_cast<long>(W)) continue;
          const std::size_t q = static_cast<std::size_t>(rr) * W + static_cast<std::size_t>(cc);
          if (above[q] && component[q] < 0) {
            component[q] = id;
            queue.push_back(q);
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best = id;
    }
  }

  SectorMask out;
  out.mask = Tensor<std::uint8_t>({H, W}, 0);
  for (std::size_t i = 0; i < HW; ++i) out.mask[i] = component[i] == best;
  fill_hull(out.mask);
  out.bounding_box = tight_box(out.mask);
  return out;
}

Tensor<float> histogram_equalize(const Tensor<float>& frame, std::size_t bins, const Tensor<std::uint8_t>* mask) {
  if (frame.rank() != 2) throw Error("histogram_equalize expects an [H, W] frame, got " + shape_string(frame.shape()));
  if (bins < 2) throw Error("histogram_equalize needs at least 2 bins");
  if (mask && mask->shape() != frame.shape()) throw Error("equalization mask shape mismatch");
  const double steps = static_cast<double>(bins);
  const auto level_of = [&](float v) {
    const double q = std::floor(std::clamp(static_cast<double>(v), 0.0, 1.0) * steps + 0.5);
    return static_cast<std::size_t>(q);
  };

  std::vector<std::size_t> hist(bins + 1, 0);
  std::size_t total = 0;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    ++hist[level_of(frame[i])];
    ++total;
  }
  const auto occupied = std::count_if(hist.begin(), hist.end(), [](std::size_t n) { return n > 0; });
  if (total == 0 || occupied <= 1) return frame;

  std::vector<float> lut(bins + 1);
  std::size_t running = 0;
  for (std::size_t k = 0; k <= bins; ++k) {
    running += hist[k];
    // ceil(cdf * bins) in exact integer arithmetic: occupied levels never map to 0.
    const std::size_t level = (running * bins + total - 1) / total;
    lut[k] = static_cast<float>(static_cast<double>(level) / steps);
  }
  Tensor<float> out = frame;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    out[i] = lut[level_of(frame[i])];
  }
  return out;
}

Tensor<float> resize_bilinear(const Tensor<float>& frames, std::size_t out_h, std::size_t out_w) {
  if (frames.rank() != 3) throw Error("resize_bilinear expects [T, H, W], got " + shape_string(frames.shape()));
  const std::size_t T = frames.dim(0), H = frames.dim(1), W = frames.dim(2);
  // Source sample positions: (dst + 0.5) * scale - 0.5, clamped at the low edge.
  const auto axis = [](std::size_t in, std::size_t out) {
    std::vector<std::size_t> i0(out), i1(out);
    std::vector<float> w(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
      const double src = std::max(0.0, (static_cast<double>(d) + 0.5) * scale - 0.5);
      const std::size_t lo = std::min(static_cast<std::size_t>(src), in - 1);
      i0[d] = lo;
      i1[d] = std::min(lo + 1, in - 1);
      w[d] = static_cast<float>(src - static_cast<double>(lo));
    }
    return std::make_tuple(i0, i1, w);
  };
  const auto [r0, r1, wr] = axis(H, out_h);
  const auto [c0, c1, wc] = axis(W, out_w);
  Tensor<float> out({T, out_h, out_w});
  for (std::size_t t = 0; t < T; ++t) {
    const float* src = frames.data() + t * H * W;
    float* dst = out.data() + t * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const float* row0 = src + r0[y] * W;
      const float* row1 = src + r1[y] * W;
      for (std::size_t x = 0; x < out_w; ++x) {
        const float top = row0[c0[x]] + wc[x] * (row0[c1[x]] - row0[c0[x]]);
        const float bottom = row1[c0[x]] + wc[x] * (row1[c1[x]] - row1[c0[x]]);
        dst[y * out_w + x] = top + wr[y] * (bottom - top);
      }
    }
  }
  return out;
}

Tensor<float> normalize_frames(const Tensor<float>& frames, const PreprocessConfig& config) {
  Tensor<float> out = frames;
  const auto standardize = [](float* begin, std::size_t n, double mean, double stddev) {
    const double inv = stddev > 0.0 ? 1.0 / stddev : 1.0;
    for (std::size_t i = 0; i < n; ++i) begin[i] = static_cast<float>((begin[i] - mean) * inv);
  };
  const auto moments = [](const float* begin, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += begin[i];
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += (begin[i] - mean) * (begin[i] - mean);
    return std::make_pair(mean, std::sqrt(sq / static_cast<double>(n)));
  };
  switch (config.normalization) {
    case NormalizationMode::None:
      break;
    case NormalizationMode::Dataset:
      standardize(out.data(), out.size(), config.dataset_mean, config.dataset_std);
      break;
    case NormalizationMode::PerVideo: {
      const auto [mean, stddev] = moments(out.data(), out.size());
      standardize(out.data(), out.size(), mean, stddev);
      break;
    }
    case NormalizationMode::PerFrame: {
      const std::size_t hw = out.size() / out.dim(0);
      for (std::size_t t = 0; t < out.dim(0); ++t) {
        const auto [mean, stddev] = moments(out.data() + t * hw, hw);
        standardize(out.data() + t * hw, hw, mean, stddev);
      }
      break;
    }
  }
  return out;
}

PreprocessResult preprocess_video_detailed(const EchoVideo& video, const PreprocessConfig& config) {
  config.validate();
  PreprocessResult result;
  result.sector = detect_sector_mask(video.frames, config.sector_threshold);
  const PixelBox& box = result.sector.bounding_box;
  const std::size_t T = video.num_frames(), W = video.width();
  const std::size_t bh = static_cast<std::size_t>(box.height), bw = static_cast<std::size_t>(box.width);

  Tensor<float> cropped({T, bh, bw});
  Tensor<float> crop_mask({1, bh, bw});
  for (std::size_t r = 0; r < bh; ++r) {
    for (std::size_t c = 0; c < bw; ++c) {
      const std::size_t src = (r + static_cast<std::size_t>(box.top)) * W + c + static_cast<std::size_t>(box.left);
      crop_mask[r * bw + c] = result.sector.mask[src] ? 1.0f : 0.0f;
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    const float* f = video.frames.data() + t * video.height() * W;
    for (std::size_t r = 0; r < bh; ++r) {
      for (std::size_t c = 0; c < bw; ++c) {
        const std::size_t src = (r + static_cast<std::size_t>(box.top)) * W + c + static_cast<std::size_t>(box.left);
        cropped[(t * bh + r) * bw + c] = result.sector.mask[src] ? f[src] : 0.0f;
      }
    }
  }

  const std::size_t oh = config.target_height, ow = config.target_width;
  Tensor<float> resized = resize_bilinear(cropped, oh, ow);
  const Tensor<float> resized_mask = resize_bilinear(crop_mask, oh, ow);
  // Divide out the mask coverage so rim pixels are not darkened by the zeroed outside.
  for (std::size_t t = 0; t < T; ++t) {
    float* f = resized.data() + t * oh * ow;
    for (std::size_t i = 0; i < oh * ow; ++i) f[i] = resized_mask[i] > 0.0f ? std::min(1.0f, f[i] / resized_mask[i]) : 0.0f;
  }
  result.canonical_mask = canonical_mask_from(resized_mask);

  Tensor<float> equalized({T, oh, ow});
  for (std::size_t t = 0; t < T; ++t) {
    Tensor<float> frame({oh, ow}, std::vector<float>(resized.data() + t * oh * ow, resized.data() + (t + 1) * oh * ow));
    const Tensor<float> eq = histogram_equalize(frame, config.equalization_bins, &result.canonical_mask);
    float* dst = equalized.data() + t * oh * ow;
    for (std::size_t i = 0; i < oh * ow; ++i) dst[i] = result.canonical_mask[i] ? eq[i] : 0.0f;
  }

  result.video = video;
  result.video.frames = normalize_frames(equalized, config);
  return result;
}

EchoVideo preprocess_video(const EchoVideo& video, const PreprocessConfig& config) {
  return preprocess_video_detailed(video, config).video;
}

PixelBox map_box_to_canonical(const PixelBox& box, const PixelBox& crop, std::size_t target_height,
                              std::size_t target_width) {
  const double sy = static_cast<double>(target_height) / crop.height;
  const double sx = static_cast<double>(target_width) / crop.width;
  const auto clamp_to = [](double v, std::size_t hi) { return std::clamp(v, 0.0, static_cast<double>(hi)); };
  const double top = clamp_to((box.top - crop.top) * sy, target_height);
  const double left = clamp_to((box.left - crop.left) * sx, target_width);
  const double bottom = clamp_to((box.top + box.height - crop.top) * sy, target_height);
  const double right = clamp_to((box.left + box.width - crop.left) * sx, target_width);
  const int t = static_cast<int>(std::floor(top)), l = static_cast<int>(std::floor(left));
  return PixelBox{t, l, static_cast<int>(std::ceil(bottom)) - t, static_cast<int>(std::ceil(right)) - l};
}

}  // namespace echopipe
