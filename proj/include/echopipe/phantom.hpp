#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "echopipe/manifest.hpp"
#include "echopipe/video.hpp"

namespace echopipe {

struct PhantomConfig {
  std::size_t n_patients = 60;
  std::size_t views_per_patient = 5;
  std::array<double, 3> class_priors = {0.65, 0.16, 0.19};
  std::size_t frames_per_video = 120;
  double fps = 25.0;
  std::size_t frame_height = 128;
  std::size_t frame_width = 128;
  double noise_level = 0.15;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Axis-aligned box in pixel coordinates (inclusive top/left, exclusive extent).
struct PixelBox {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  long area() const { return static_cast<long>(height) * width; }
  bool contains(int row, int col) const {
    return row >= top && row < top + height && col >= left && col < left + width;
  }
  bool operator==(const PixelBox&) const = default;
};

/// Circular scan sector with its apex near the top edge, opening downwards.
struct SectorGeometry {
  double apex_row = 0.0;
  double apex_col = 0.0;
  double radius = 0.0;
  double half_angle_deg = 0.0;

  bool contains(double row, double col) const;
};

/// Generator ground truth stored next to every phantom video.
struct PhantomTruth {
  SeverityLabel label = SeverityLabel::None;
  ViewTag view = ViewTag::PLAX;
  SectorGeometry sector;
  PixelBox septum_box;
  double heart_row = 0.0;
  double heart_col = 0.0;
  double heart_radius = 0.0;
  double heart_angle_deg = 0.0;
  /// Septum midpoint displacement towards the LV, in pixels (negative bows into the RV).
  double septum_bow = 0.0;
  double septum_half_length = 0.0;
};

/// Exact per-class patient counts: largest-remainder rounding of n * priors.
std::array<std::size_t, 3> phantom_class_counts(std::size_t n_patients, const std::array<double, 3>& priors);

/// Renders one phantom video with its ground truth; deterministic in `rng`.
std::pair<EchoVideo, PhantomTruth> render_phantom_video(const PhantomConfig& config, SeverityLabel label,
                                                        ViewTag view, std::mt19937_64& rng);

/// Writes videos/<patient>_<view>.echo plus a .json truth sidecar per video, and
/// manifest.tsv at `out_dir`. Returns the manifest.
DatasetManifest generate_phantom_dataset(const PhantomConfig& config, const std::filesystem::path& out_dir);

std::filesystem::path truth_path_for(const std::filesystem::path& video_path);
void write_phantom_truth(const PhantomTruth& truth, const std::filesystem::path& path);
PhantomTruth read_phantom_truth(const std::filesystem::path& path);

}  // namespace echopipe
