#include "echopipe/manifest.hpp"

#include <fstream>
#include <sstream>
#include <tuple>

#include "echopipe/error.hpp"
#include "echopipe/video.hpp"

namespace echopipe {
namespace {

constexpr std::string_view kCanonicalDirective = "# echopipe: canonical";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

DatasetManifest DatasetManifest::filter_view(ViewTag view) const {
  DatasetManifest out{root, {}, canonical};
  for (const auto& r : records) {
    if (r.view == view) out.records.push_back(r);
  }
  return out;
}

DatasetManifest DatasetManifest::filter_patients(const std::set<std::string>& patients) const {
  DatasetManifest out{root, {}, canonical};
  for (const auto& r : records) {
    if (patients.contains(r.patient_id)) out.records.push_back(r);
  }
  return out;
}

std::set<std::string> DatasetManifest::patient_ids() const {
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.patient_id);
  return ids;
}

std::map<std::string, SeverityLabel> DatasetManifest::patient_labels() const {
  std::map<std::string, SeverityLabel> labels;
  for (const auto& r : records) {
    auto [it, inserted] = labels.emplace(r.patient_id, r.label);
    if (!inserted && label_code(r.label) > label_code(it->second)) it->second = r.label;
  }
  return labels;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("manifest not found: " + path.string());
  DatasetManifest manifest;
  manifest.root = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

  std::set<std::tuple<std::string, ViewTag, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line == kCanonicalDirective) manifest.canonical = true;
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 4) {
      throw ParseError("expected 4 tab-separated fields, got " + std::to_string(fields.size()), line_no);
    }
    ManifestRecord record;
    record.patient_id = fields[0];
    if (record.patient_id.empty()) throw ParseError("empty patient id", line_no);
    const auto view = parse_view(fields[1]);
    if (!view) throw ParseError("unknown view '" + fields[1] + "'", line_no);
    record.view = *view;
    const auto label = parse_severity(fields[2]);
    if (!label) throw ParseError("unknown label '" + fields[2] + "'", line_no);
    record.label = *label;
    if (fields[3].empty()) throw ParseError("empty video path", line_no);
    record.video_path = fields[3];

    if (!seen.emplace(record.patient_id, record.view, record.video_path.generic_string()).second) {
      throw ParseError("duplicate record (" + record.patient_id + ", " + fields[1] + ", " + fields[3] + ")", line_no);
    }
    const auto full = manifest.root / record.video_path;
    if (!std::filesystem::exists(full)) throw ParseError("video file missing: " + full.string(), line_no);
    try {
      decode_echo1(read_file_bytes(full));
    } catch (const Error& e) {
      throw ParseError(std::string("video does not decode: ") + e.what(), line_no);
    }
    manifest.records.push_back(std::move(record));
  }
  if (manifest.records.empty()) throw Error("manifest has no records: " + path.string());
  return manifest;
}

void validate_manifest(const DatasetManifest& manifest, bool check_files) {
  if (manifest.records.empty()) throw Error("manifest has no records");
  std::set<std::tuple<std::string, ViewTag, std::string>> seen;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    if (!seen.emplace(r.patient_id, r.view, r.video_path.generic_string()).second) {
      throw ParseError("duplicate record (" + r.patient_id + ", " + std::string(to_string(r.view)) + ", " +
                           r.video_path.generic_string() + ")",
                       i + 1);
    }
    if (check_files) decode_echo1(read_file_bytes(manifest.resolve(r)));
  }
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << "# patient_id\tview\tlabel\tpath\n";
  if (manifest.canonical) out << kCanonicalDirective << '\n';
  for (const auto& r : manifest.records) {
    out << r.patient_id << '\t' << to_string(r.view) << '\t' << to_string(r.label) << '\t'
        << r.video_path.generic_string() << '\n';
  }
}

}  // namespace echopipe
