#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "echopipe/labels.hpp"
#include "echopipe/tensor.hpp"

namespace echopipe {

/// One grayscale echo video. Frames are [T, H, W] with intensities in [0, 1].
struct EchoVideo {
  std::string patient_id;
  ViewTag view = ViewTag::PLAX;
  SeverityLabel label = SeverityLabel::None;
  Tensor<float> frames;
  float fps = 25.0f;

  std::size_t num_frames() const { return frames.dim(0); }
  std::size_t height() const { return frames.dim(1); }
  std::size_t width() const { return frames.dim(2); }
};

/// Throws if the video breaks its invariants (rank 3, non-empty, intensities in [0,1], fps > 0).
void validate_video(const EchoVideo& video);

/// Round-half-up of 255*x, saturating to [0, 255].
std::uint8_t quantize8(float x) noexcept;
inline float dequantize8(std::uint8_t q) noexcept { return static_cast<float>(q) / 255.0f; }

// ECHO1 container, little-endian:
//   "ECHO" | version u8 | 3 reserved zero bytes | T u32 | H u32 | W u32 | fps f32 | payload
// version 1: u8 gray (T*H*W bytes), 2: u8 RGB (T*H*W*3 bytes), 3: f32 gray (T*H*W*4 bytes).
// Payload is frame-major, then row-major.
enum class Echo1Kind : std::uint8_t { Gray8 = 1, Rgb8 = 2, Float32 = 3 };

inline constexpr std::size_t kEcho1HeaderSize = 24;

struct Echo1Header {
  Echo1Kind kind = Echo1Kind::Gray8;
  std::uint32_t frames = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  float fps = 0.0f;

  std::uint64_t payload_bytes() const;
};

std::vector<std::uint8_t> encode_echo1(const Echo1Header& header, const std::vector<std::uint8_t>& payload);

struct Echo1Decoded {
  Echo1Header header;
  std::vector<std::uint8_t> payload;
};

/// Parses an ECHO1 byte buffer; throws DecodeError naming the failing offset.
Echo1Decoded decode_echo1(const std::vector<std::uint8_t>& bytes);

struct VideoFrames {
  Tensor<float> frames;
  float fps = 0.0f;
};

void write_video(const EchoVideo& video, const std::filesystem::path& path);
void write_frames(const Tensor<float>& frames, float fps, const std::filesystem::path& path);
VideoFrames read_video(const std::filesystem::path& path);

/// RGB overlay frames [T, H, W, 3].
void write_rgb_video(const Tensor<std::uint8_t>& rgb, float fps, const std::filesystem::path& path);
Tensor<std::uint8_t> read_rgb_video(const std::filesystem::path& path, float* fps = nullptr);

/// Unquantized float32 volume [T, H, W].
void write_float_volume(const Tensor<float>& volume, float fps, const std::filesystem::path& path);
Tensor<float> read_float_volume(const std::filesystem::path& path, float* fps = nullptr);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace echopipe
