#include "echopipe/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "echopipe/config.hpp"
#include "echopipe/error.hpp"
#include "echopipe/video.hpp"

namespace echopipe {
namespace {

constexpr char kMagic[4] = {'E', 'C', 'K', 'P'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint64_t get_le(const std::uint8_t* p, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

struct Slot {
  std::string name;
  Tensor<float>* value;
};

std::vector<Slot> state_slots(Model<float>& model) {
  std::vector<Slot> slots;
  for (auto* p : model.parameters()) slots.push_back({p->name, &p->value});
  for (auto& b : model.buffers()) slots.push_back({b.name, b.value});
  return slots;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(Model<float>& model, const CheckpointMeta& meta) {
  const auto slots = state_slots(model);
  Json header;
  header["format"] = "echopipe-checkpoint";
  header["version"] = kCheckpointVersion;
  header["model"] = to_json(model.config());
  header["seed"] = meta.seed;
  header["epoch"] = meta.epoch;
  header["task"] = meta.task;
  header["view"] = meta.view;
  Json tensors = Json::array();
  for (const auto& s : slots) tensors.push_back({{"name", s.name}, {"shape", s.value->shape()}});
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& s : slots) {
    for (float v : s.value->storage()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

void save_checkpoint(Model<float>& model, const CheckpointMeta& meta, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_bytes(path, encode_checkpoint(model, meta));
}

LoadedCheckpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, std::optional<int> expected_num_classes) {
  if (bytes.size() < 16) throw DecodeError("checkpoint truncated", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw DecodeError("not an echopipe checkpoint (bad magic)", 0);
  const auto version = static_cast<std::uint32_t>(get_le(bytes.data() + 4, 4));
  if (version != kCheckpointVersion) {
    throw DecodeError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  const std::uint64_t header_len = get_le(bytes.data() + 8, 8);
  if (header_len > bytes.size() - 16) throw DecodeError("checkpoint header truncated", 8);
  Json header;
  try {
    header = Json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("checkpoint header is not valid JSON: ") + e.what(), 16);
  }

  LoadedCheckpoint out;
  ModelConfig config;
  try {
    config = model_config_from_json(header.at("model"));
    out.meta.seed = header.at("seed").get<std::uint64_t>();
    out.meta.epoch = header.at("epoch").get<std::size_t>();
    out.meta.task = header.at("task").get<std::string>();
    out.meta.view = header.at("view").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("checkpoint header is incomplete: ") + e.what(), 16);
  }
  if (expected_num_classes && config.num_classes != *expected_num_classes) {
    throw Error("checkpoint was trained for " + std::to_string(config.num_classes) + " classes, but " +
                std::to_string(*expected_num_classes) + " were requested");
  }

  out.model = std::make_unique<Model<float>>(config, out.meta.seed);
  const auto slots = state_slots(*out.model);
  const Json& tensors = header.at("tensors");
  if (tensors.size() != slots.size()) {
    throw DecodeError("checkpoint lists " + std::to_string(tensors.size()) + " tensors, model has " +
                          std::to_string(slots.size()),
                      16);
  }
  std::size_t offset = 16 + header_len;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto name = tensors[i].at("name").get<std::string>();
    const auto shape = tensors[i].at("shape").get<Shape>();
    if (name != slots[i].name || shape != slots[i].value->shape()) {
      throw DecodeError("checkpoint tensor '" + name + "' " + shape_string(shape) + " does not match model tensor '" +
                            slots[i].name + "' " + shape_string(slots[i].value->shape()),
                        offset);
    }
    const std::size_t n = slots[i].value->size();
    if (bytes.size() - offset < 4 * n) throw DecodeError("checkpoint tensor data truncated", bytes.size());
    for (std::size_t k = 0; k < n; ++k) {
      (*slots[i].value)[k] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes.data() + offset + 4 * k, 4)));
    }
    offset += 4 * n;
  }
  if (offset != bytes.size()) throw DecodeError("trailing bytes after checkpoint data", offset);
  out.model->set_training(false);
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_num_classes) {
  return decode_checkpoint(read_file_bytes(path), expected_num_classes);
}

}  // namespace echopipe
