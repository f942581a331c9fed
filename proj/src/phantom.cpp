#include "echopipe/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "echopipe/error.hpp"
#include "echopipe/rng.hpp"

namespace echopipe {
namespace {

using nlohmann::json;

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Heart geometry in units of the heart radius R, in septum-aligned coordinates
// (u across the septum, positive towards the LV; v along it).
constexpr double kHeartRadiusFrac = 0.36;  // R as a fraction of min(H, W)
constexpr double kRvCenterU = -0.32, kRvAxisU = 0.26, kRvAxisV = 0.62;
constexpr double kLvCenterU = 0.38, kLvAxisU = 0.32, kLvAxisV = 0.66;
constexpr double kSeptumHalfLength = 0.62;
constexpr double kSeptumThickness = 0.13;
// Septum midpoint displacement towards the LV per class.
constexpr std::array<double, 3> kSeptumBow = {-0.18, 0.0, 0.18};
// Per-view mean septum orientation; each video adds a small jitter.
constexpr std::array<double, 5> kViewAngleDeg = {0.0, 8.0, -6.0, 4.0, -9.0};

constexpr double kTissueLevel = 0.2;
constexpr double kChamberLevel = 0.45;
constexpr double kSeptumLevel = 0.95;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

json box_to_json(const PixelBox& b) {
  return json{{"top", b.top}, {"left", b.left}, {"height", b.height}, {"width", b.width}};
}

PixelBox box_from_json(const json& j) {
  return PixelBox{j.at("top").get<int>(), j.at("left").get<int>(), j.at("height").get<int>(),
                  j.at("width").get<int>()};
}

// Fake burned-in annotations outside the sector: a text block and an ECG trace.
void draw_overlays(Tensor<float>& frames, std::size_t t, const SectorGeometry& sector, double fps,
                   double heart_hz) {
  const std::size_t H = frames.dim(1), W = frames.dim(2);
  float* frame = frames.data() + t * H * W;
  const auto put = [&](long r, long c, float v) {
    if (r < 0 || c < 0 || r >= static_cast<long>(H) || c >= static_cast<long>(W)) return;
    if (sector.contains(static_cast<double>(r), static_cast<double>(c))) return;
    frame[r * static_cast<long>(W) + c] = v;
  };
  // Text block: a few glyph-like bars in the top-left corner.
  const long text_top = static_cast<long>(0.025 * H), text_left = static_cast<long>(0.03 * W);
  for (long g = 0; g < 4; ++g) {
    for (long r = 0; r < static_cast<long>(0.045 * H) + 1; ++r) {
      for (long c = 0; c < static_cast<long>(0.03 * W) + 1; ++c) {
        if ((r + c + g) % 3 != 0) put(text_top + r, text_left + g * static_cast<long>(0.045 * W) + c, 0.85f);
      }
    }
  }
  // ECG trace in the bottom-left corner, scrolling with time.
  const long base_row = static_cast<long>(0.955 * H);
  const long c0 = static_cast<long>(0.03 * W), c1 = static_cast<long>(0.3 * W);
  for (long c = c0; c < c1; ++c) {
    const double phase = std::fmod((c - c0) / (0.09 * W) + heart_hz * t / fps, 1.0);
    const double spike = phase < 0.08 ? std::sin(phase / 0.08 * std::numbers::pi) : 0.0;
    put(base_row - static_cast<long>(std::lround(spike * 0.03 * H)), c, 0.8f);
  }
}

}  // namespace

void PhantomConfig::validate() const {
  if (n_patients == 0) throw ConfigError("phantom n_patients must be positive");
  if (views_per_patient == 0 || views_per_patient > kAllViews.size()) {
    throw ConfigError("phantom views_per_patient must be in [1, 5]");
  }
  if (frames_per_video == 0) throw ConfigError("phantom frames_per_video must be positive");
  if (frame_height < 16 || frame_width < 16) throw ConfigError("phantom frame size must be at least 16x16");
  if (!(fps > 0.0)) throw ConfigError("phantom fps must be positive");
  if (!(noise_level >= 0.0)) throw ConfigError("phantom noise_level must be >= 0");
  double sum = 0.0;
  for (double p : class_priors) {
    if (!(p >= 0.0)) throw ConfigError("phantom class priors must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("phantom class priors must sum to 1");
}

bool SectorGeometry::contains(double row, double col) const {
  const double dr = row - apex_row, dc = col - apex_col;
  if (dr < 0.0) return false;
  if (dr * dr + dc * dc > radius * radius) return false;
  return std::abs(dc) <= dr * std::tan(half_angle_deg * kDegToRad);
}

std::array<std::size_t, 3> phantom_class_counts(std::size_t n_patients, const std::array<double, 3>& priors) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double exact = priors[c] * static_cast<double>(n_patients);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += counts[c];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n_patients; ++i, ++assigned) ++counts[order[i % 3]];
  return counts;
}

std::pair<EchoVideo, PhantomTruth> render_phantom_video(const PhantomConfig& config, SeverityLabel label,
                                                        ViewTag view, std::mt19937_64& rng) {
  const std::size_t T = config.frames_per_video, H = config.frame_height, W = config.frame_width;
  const double Hd = static_cast<double>(H), Wd = static_cast<double>(W);

  PhantomTruth truth;
  truth.label = label;
  truth.view = view;
  truth.sector = SectorGeometry{0.04 * Hd, 0.5 * Wd, 0.86 * Hd, 34.0};
  if (W < H) truth.sector.radius = 0.86 * Wd;

  const double R = kHeartRadiusFrac * static_cast<double>(std::min(H, W)) * uniform(rng, 0.92, 1.08);
  truth.heart_radius = R;
  truth.heart_row = Hd * (0.52 + uniform(rng, -0.03, 0.03));
  truth.heart_col = Wd * (0.5 + uniform(rng, -0.03, 0.03));
  truth.heart_angle_deg = kViewAngleDeg[static_cast<std::size_t>(view)] + uniform(rng, -5.0, 5.0);
  const double bow = kSeptumBow[static_cast<std::size_t>(label)] * uniform(rng, 0.85, 1.15);
  truth.septum_bow = bow * R;
  truth.septum_half_length = kSeptumHalfLength * R;

  const double heart_hz = uniform(rng, 1.8, 2.2);
  const double phase0 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double gain = uniform(rng, 0.82, 1.0);
  const double tissue = kTissueLevel * uniform(rng, 0.85, 1.15);
  const double chamber = kChamberLevel * uniform(rng, 0.9, 1.1);
  const double sin_a = std::sin(truth.heart_angle_deg * kDegToRad);
  const double cos_a = std::cos(truth.heart_angle_deg * kDegToRad);

  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor<float> frames({T, H, W}, 0.0f);
  int box_top = static_cast<int>(H), box_left = static_cast<int>(W), box_bottom = -1, box_right = -1;

  for (std::size_t t = 0; t < T; ++t) {
    const double pulse = std::sin(2.0 * std::numbers::pi * heart_hz * static_cast<double>(t) / config.fps + phase0);
    const double Rt = R * (1.0 + 0.05 * pulse);
    const double half_thick = 0.5 * kSeptumThickness * (1.0 + 0.25 * pulse);
    float* frame = frames.data() + t * H * W;
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) {
        const double rd = static_cast<double>(r), cd = static_cast<double>(c);
        if (!truth.sector.contains(rd, cd)) continue;
        const double dr = rd - truth.heart_row, dc = cd - truth.heart_col;
        const double u = (-sin_a * dr + cos_a * dc) / Rt;
        const double v = (cos_a * dr + sin_a * dc) / Rt;
        double value = tissue;
        const double rv = std::pow((u - kRvCenterU) / kRvAxisU, 2) + std::pow(v / kRvAxisV, 2);
        const double lv = std::pow((u - kLvCenterU) / kLvAxisU, 2) + std::pow(v / kLvAxisV, 2);
        if (rv <= 1.0 || lv <= 1.0) value = chamber;
        if (std::abs(v) <= kSeptumHalfLength) {
          const double s = v / kSeptumHalfLength;
          const double centre = bow * (1.0 - s * s);
          if (std::abs(u - centre) <= half_thick) {
            value = kSeptumLevel;
            const int ri = static_cast<int>(r), ci = static_cast<int>(c);
            box_top = std::min(box_top, ri);
            box_left = std::min(box_left, ci);
            box_bottom = std::max(box_bottom, ri);
            box_right = std::max(box_right, ci);
          }
        }
        value *= gain * std::max(0.0, 1.0 + config.noise_level * gauss(rng));
        value += 0.25 * config.noise_level * gauss(rng) * gain * tissue;
        frame[r * W + c] = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
    draw_overlays(frames, t, truth.sector, config.fps, heart_hz);
  }
  if (box_bottom < 0) throw Error("phantom septum fell outside the frame");
  truth.septum_box = PixelBox{box_top, box_left, box_bottom - box_top + 1, box_right - box_left + 1};

  EchoVideo video;
  video.view = view;
  video.label = label;
  video.frames = std::move(frames);
  video.fps = static_cast<float>(config.fps);
  return {std::move(video), truth};
}

DatasetManifest generate_phantom_dataset(const PhantomConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  const auto counts = phantom_class_counts(config.n_patients, config.class_priors);
  std::vector<SeverityLabel> labels;
  for (std::size_t c = 0; c < 3; ++c) labels.insert(labels.end(), counts[c], kAllSeverities[c]);
  std::mt19937_64 label_rng(config.seed);
  std::shuffle(labels.begin(), labels.end(), label_rng);

  DatasetManifest manifest;
  manifest.root = out_dir;
  std::filesystem::create_directories(out_dir / "videos");
  for (std::size_t p = 0; p < config.n_patients; ++p) {
    char id[16];
    std::snprintf(id, sizeof id, "P%04zu", p + 1);
    for (std::size_t v = 0; v < config.views_per_patient; ++v) {
      const ViewTag view = kAllViews[v];
      auto rng = seeded_rng({config.seed, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(v), 0xEC40});
      auto [video, truth] = render_phantom_video(config, labels[p], view, rng);
      video.patient_id = id;
      const std::filesystem::path rel = std::filesystem::path("videos") / (std::string(id) + "_" + std::string(to_string(view)) + ".echo");
      write_video(video, out_dir / rel);
      write_phantom_truth(truth, truth_path_for(out_dir / rel));
      manifest.records.push_back(ManifestRecord{id, view, labels[p], rel});
    }
  }
  save_manifest(manifest, out_dir / "manifest.tsv");
  return manifest;
}

std::filesystem::path truth_path_for(const std::filesystem::path& video_path) {
  std::filesystem::path p = video_path;
  p.replace_extension(".json");
  return p;
}

void write_phantom_truth(const PhantomTruth& truth, const std::filesystem::path& path) {
  const json j{
      {"label", std::string(to_string(truth.label))},
      {"view", std::string(to_string(truth.view))},
      {"sector",
       {{"apex_row", truth.sector.apex_row},
        {"apex_col", truth.sector.apex_col},
        {"radius", truth.sector.radius},
        {"half_angle_deg", truth.sector.half_angle_deg}}},
      {"septum_box", box_to_json(truth.septum_box)},
      {"heart",
       {{"row", truth.heart_row},
        {"col", truth.heart_col},
        {"radius", truth.heart_radius},
        {"angle_deg", truth.heart_angle_deg}}},
      {"septum_bow", truth.septum_bow},
      {"septum_half_length", truth.septum_half_length},
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

PhantomTruth read_phantom_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open phantom truth " + path.string());
  const json j = json::parse(in);
  PhantomTruth t;
  t.label = parse_severity(j.at("label").get<std::string>()).value();
  t.view = parse_view(j.at("view").get<std::string>()).value();
  const auto& s = j.at("sector");
  t.sector = SectorGeometry{s.at("apex_row").get<double>(), s.at("apex_col").get<double>(), s.at("radius").get<double>(),
                            s.at("half_angle_deg").get<double>()};
  t.septum_box = box_from_json(j.at("septum_box"));
  const auto& h = j.at("heart");
  t.heart_row = h.at("row").get<double>();
  t.heart_col = h.at("col").get<double>();
  t.heart_radius = h.at("radius").get<double>();
  t.heart_angle_deg = h.at("angle_deg").get<double>();
  t.septum_bow = j.at("septum_bow").get<double>();
  t.septum_half_length = j.at("septum_half_length").get<double>();
  return t;
}

}  // namespace echopipe
