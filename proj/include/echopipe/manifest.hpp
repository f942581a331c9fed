#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "echopipe/labels.hpp"

namespace echopipe {

struct ManifestRecord {
  std::string patient_id;
  ViewTag view = ViewTag::PLAX;
  SeverityLabel label = SeverityLabel::None;
  std::filesystem::path video_path;  // relative to the manifest root

  bool operator==(const ManifestRecord&) const = default;
};

/// Tab-separated dataset listing: patient_id \t view \t label \t relative_path.
/// Lines starting with '#' are comments; the comment "# echopipe: canonical" marks
/// a manifest whose videos are already preprocessed.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;
  bool canonical = false;

  std::filesystem::path resolve(const ManifestRecord& r) const { return root / r.video_path; }

  /// Records of one view, in manifest order.
  DatasetManifest filter_view(ViewTag view) const;
  DatasetManifest filter_patients(const std::set<std::string>& patients) const;

  std::set<std::string> patient_ids() const;
  /// Stratification label per patient: the maximum severity over the patient's videos.
  std::map<std::string, SeverityLabel> patient_labels() const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);

/// Validates record-level invariants (uniqueness, non-empty, files decode).
void validate_manifest(const DatasetManifest& manifest, bool check_files = true);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace echopipe
