#include "echopipe/video.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace echopipe {
namespace {

constexpr char kMagic[4] = {'E', 'C', 'H', 'O'};
// Guard against absurd headers before allocating anything.
constexpr std::uint64_t kMaxPayloadBytes = std::uint64_t{1} << 34;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

std::size_t bytes_per_voxel(Echo1Kind kind) {
  switch (kind) {
    case Echo1Kind::Gray8: return 1;
    case Echo1Kind::Rgb8: return 3;
    case Echo1Kind::Float32: return 4;
  }
  return 0;
}

Echo1Header header_for(const Tensor<float>& frames, float fps, Echo1Kind kind) {
  if (frames.rank() != 3) throw Error("video frames must be rank 3 [T, H, W], got " + shape_string(frames.shape()));
  for (std::size_t d : frames.shape()) {
    if (d == 0 || d > std::numeric_limits<std::uint32_t>::max()) {
      throw Error("video dimension out of range: " + shape_string(frames.shape()));
    }
  }
  return Echo1Header{kind, static_cast<std::uint32_t>(frames.dim(0)), static_cast<std::uint32_t>(frames.dim(1)),
                     static_cast<std::uint32_t>(frames.dim(2)), fps};
}

Echo1Decoded read_expecting(const std::filesystem::path& path, Echo1Kind kind) {
  Echo1Decoded decoded = decode_echo1(read_file_bytes(path));
  if (decoded.header.kind != kind) {
    throw DecodeError(path.string() + ": unexpected ECHO1 version " +
                          std::to_string(static_cast<int>(decoded.header.kind)),
                      4);
  }
  return decoded;
}

}  // namespace

void validate_video(const EchoVideo& video) {
  const auto& f = video.frames;
  if (f.rank() != 3) throw Error("video frames must be rank 3 [T, H, W], got " + shape_string(f.shape()));
  if (f.dim(0) < 1 || f.dim(1) < 1 || f.dim(2) < 1) throw Error("video has an empty dimension: " + shape_string(f.shape()));
  if (!(video.fps > 0.0f) || !std::isfinite(video.fps)) throw Error("video fps must be positive");
  for (float v : f.span()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw Error("video intensity outside [0, 1]: " + std::to_string(v));
  }
}

std::uint8_t quantize8(float x) noexcept {
  const double scaled = std::floor(255.0 * static_cast<double>(x) + 0.5);
  if (!(scaled > 0.0)) return 0;
  if (scaled >= 255.0) return 255;
  return static_cast<std::uint8_t>(scaled);
}

std::uint64_t Echo1Header::payload_bytes() const {
  return static_cast<std::uint64_t>(frames) * height * width * bytes_per_voxel(kind);
}

std::vector<std::uint8_t> encode_echo1(const Echo1Header& header, const std::vector<std::uint8_t>& payload) {
  if (payload.size() != header.payload_bytes()) {
    throw Error("ECHO1 payload size " + std::to_string(payload.size()) + " does not match header (" +
                std::to_string(header.payload_bytes()) + " bytes)");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kEcho1HeaderSize + payload.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(header.kind));
  out.insert(out.end(), 3, 0);
  put_u32(out, header.frames);
  put_u32(out, header.height);
  put_u32(out, header.width);
  put_f32(out, header.fps);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Echo1Decoded decode_echo1(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw DecodeError("truncated ECHO1 magic", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw DecodeError("bad ECHO1 magic", 0);
  if (bytes.size() < kEcho1HeaderSize) throw DecodeError("truncated ECHO1 header", bytes.size());
  const std::uint8_t version = bytes[4];
  if (version < 1 || version > 3) {
    throw DecodeError("unsupported ECHO1 version " + std::to_string(version), 4);
  }
  for (std::size_t i = 5; i < 8; ++i) {
    if (bytes[i] != 0) throw DecodeError("nonzero ECHO1 reserved byte", i);
  }
  Echo1Decoded decoded;
  Echo1Header& h = decoded.header;
  h.kind = static_cast<Echo1Kind>(version);
  h.frames = get_u32(bytes.data() + 8);
  h.height = get_u32(bytes.data() + 12);
  h.width = get_u32(bytes.data() + 16);
  h.fps = get_f32(bytes.data() + 20);
  if (h.frames == 0) throw DecodeError("ECHO1 frame count is zero", 8);
  if (h.height == 0) throw DecodeError("ECHO1 height is zero", 12);
  if (h.width == 0) throw DecodeError("ECHO1 width is zero", 16);
  if (!(h.fps > 0.0f) || !std::isfinite(h.fps)) throw DecodeError("ECHO1 fps is not positive", 20);
  // u32 * u32 * u32 * 4 fits in u64 without wrapping, so the product is exact.
  const std::uint64_t payload = h.payload_bytes();
  if (payload > kMaxPayloadBytes) throw DecodeError("ECHO1 dimensions overflow payload limit", 8);
  const std::uint64_t available = bytes.size() - kEcho1HeaderSize;
  if (available < payload) throw DecodeError("truncated ECHO1 payload", bytes.size());
  if (available > payload) throw DecodeError("trailing bytes after ECHO1 payload", kEcho1HeaderSize + payload);
  decoded.payload.assign(bytes.begin() + kEcho1HeaderSize, bytes.end());
  return decoded;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

void write_video(const EchoVideo& video, const std::filesystem::path& path) {
  validate_video(video);
  write_frames(video.frames, video.fps, path);
}

void write_frames(const Tensor<float>& frames, float fps, const std::filesystem::path& path) {
  const Echo1Header header = header_for(frames, fps, Echo1Kind::Gray8);
  std::vector<std::uint8_t> payload(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) payload[i] = quantize8(frames[i]);
  write_file_bytes(path, encode_echo1(header, payload));
}

VideoFrames read_video(const std::filesystem::path& path) {
  Echo1Decoded decoded = decode_echo1(read_file_bytes(path));
  const auto& h = decoded.header;
  if (h.kind == Echo1Kind::Float32) {
    Tensor<float> frames({h.frames, h.height, h.width});
    for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = get_f32(decoded.payload.data() + 4 * i);
    return {std::move(frames), h.fps};
  }
  if (h.kind != Echo1Kind::Gray8) {
    throw DecodeError(path.string() + ": expected a grayscale ECHO1 video, got version " +
                          std::to_string(static_cast<int>(h.kind)),
                      4);
  }
  Tensor<float> frames({h.frames, h.height, h.width});
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = dequantize8(decoded.payload[i]);
  return {std::move(frames), h.fps};
}

void write_rgb_video(const Tensor<std::uint8_t>& rgb, float fps, const std::filesystem::path& path) {
  if (rgb.rank() != 4 || rgb.dim(3) != 3) throw Error("RGB video must be [T, H, W, 3], got " + shape_string(rgb.shape()));
  const Echo1Header header{Echo1Kind::Rgb8, static_cast<std::uint32_t>(rgb.dim(0)),
                           static_cast<std::uint32_t>(rgb.dim(1)), static_cast<std::uint32_t>(rgb.dim(2)), fps};
  write_file_bytes(path, encode_echo1(header, rgb.storage()));
}

Tensor<std::uint8_t> read_rgb_video(const std::filesystem::path& path, float* fps) {
  Echo1Decoded decoded = read_expecting(path, Echo1Kind::Rgb8);
  const auto& h = decoded.header;
  if (fps) *fps = h.fps;
  return Tensor<std::uint8_t>({h.frames, h.height, h.width, 3}, std::move(decoded.payload));
}

void write_float_volume(const Tensor<float>& volume, float fps, const std::filesystem::path& path) {
  const Echo1Header header = header_for(volume, fps, Echo1Kind::Float32);
  std::vector<std::uint8_t> payload;
  payload.reserve(volume.size() * 4);
  for (float v : volume.span()) put_f32(payload, v);
  write_file_bytes(path, encode_echo1(header, payload));
}

Tensor<float> read_float_volume(const std::filesystem::path& path, float* fps) {
  Echo1Decoded decoded = read_expecting(path, Echo1Kind::Float32);
  const auto& h = decoded.header;
  if (fps) *fps = h.fps;
  Tensor<float> volume({h.frames, h.height, h.width});
  for (std::size_t i = 0; i < volume.size(); ++i) volume[i] = get_f32(decoded.payload.data() + 4 * i);
  return volume;
}

}  // namespace echopipe
