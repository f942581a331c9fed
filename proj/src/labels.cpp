#include "echopipe/labels.hpp"

namespace echopipe {

std::string_view to_string(SeverityLabel s) noexcept {
  switch (s) {
    case SeverityLabel::None: return "None";
    case SeverityLabel::Mild: return "Mild";
    case SeverityLabel::ModerateSevere: return "ModerateSevere";
  }
  return "?";
}

std::string_view to_string(ViewTag v) noexcept {
  switch (v) {
    case ViewTag::PLAX: return "PLAX";
    case ViewTag::A4C: return "A4C";
    case ViewTag::PSAX_P: return "PSAX_P";
    case ViewTag::PSAX_S: return "PSAX_S";
    case ViewTag::PSAX_A: return "PSAX_A";
  }
  return "?";
}

std::string_view to_string(TaskMode m) noexcept {
  return m == TaskMode::Binary ? "binary" : "severity";
}

std::optional<SeverityLabel> severity_from_code(int code) noexcept {
  if (code < 0 || code > 2) return std::nullopt;
  return static_cast<SeverityLabel>(code);
}

std::optional<SeverityLabel> parse_severity(std::string_view text) noexcept {
  for (SeverityLabel s : kAllSeverities) {
    if (text == to_string(s)) return s;
  }
  if (text == "0") return SeverityLabel::None;
  if (text == "1") return SeverityLabel::Mild;
  if (text == "2") return SeverityLabel::ModerateSevere;
  return std::nullopt;
}

std::optional<ViewTag> parse_view(std::string_view text) noexcept {
  for (ViewTag v : kAllViews) {
    if (text == to_string(v)) return v;
  }
  return std::nullopt;
}

std::optional<TaskMode> parse_task_mode(std::string_view text) noexcept {
  if (text == "severity") return TaskMode::Severity;
  if (text == "binary") return TaskMode::Binary;
  return std::nullopt;
}

}  // namespace echopipe
