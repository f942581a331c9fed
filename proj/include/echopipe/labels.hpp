#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace echopipe {

/// PH severity grade. Integer codes are stable and used in files and tensors.
enum class SeverityLabel : std::uint8_t { None = 0, Mild = 1, ModerateSevere = 2 };

/// Two-class projection used by the binary detection task.
enum class BinaryLabel : std::uint8_t { NoPH = 0, PH = 1 };

/// Which label space a model or evaluation works in.
enum class TaskMode { Severity, Binary };

enum class ViewTag : std::uint8_t { PLAX = 0, A4C = 1, PSAX_P = 2, PSAX_S = 3, PSAX_A = 4 };

inline constexpr std::array<SeverityLabel, 3> kAllSeverities = {
    SeverityLabel::None, SeverityLabel::Mild, SeverityLabel::ModerateSevere};

/// Fixed view order; also the deterministic tie-break order for multi-view probabilities.
inline constexpr std::array<ViewTag, 5> kAllViews = {ViewTag::PLAX, ViewTag::A4C, ViewTag::PSAX_P,
                                                     ViewTag::PSAX_S, ViewTag::PSAX_A};

inline constexpr BinaryLabel to_binary(SeverityLabel s) noexcept {
  return s == SeverityLabel::None ? BinaryLabel::NoPH : BinaryLabel::PH;
}

inline constexpr int label_code(SeverityLabel s) noexcept { return static_cast<int>(s); }

/// Class index of a label within the given task's label space.
inline constexpr int class_index(SeverityLabel s, TaskMode mode) noexcept {
  return mode == TaskMode::Binary ? static_cast<int>(to_binary(s)) : static_cast<int>(s);
}

inline constexpr int num_classes(TaskMode mode) noexcept { return mode == TaskMode::Binary ? 2 : 3; }

std::string_view to_string(SeverityLabel s) noexcept;
std::string_view to_string(ViewTag v) noexcept;
std::string_view to_string(TaskMode m) noexcept;

/// Strict parsers: exact, case-sensitive names; integer codes accepted for labels.
std::optional<SeverityLabel> parse_severity(std::string_view text) noexcept;
std::optional<ViewTag> parse_view(std::string_view text) noexcept;
std::optional<TaskMode> parse_task_mode(std::string_view text) noexcept;

std::optional<SeverityLabel> severity_from_code(int code) noexcept;

}  // namespace echopipe
