#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "echopipe/nn/layers.hpp"

namespace echopipe {

/// 3D ResNet-18: stem (3x7x7 conv, temporal stride 1, then 3x3x3 max-pool with
/// temporal stride 1) followed by four stages of two basic blocks, global average
/// pooling over (t, h, w) and a linear head.
struct ModelConfig {
  int num_classes = 3;
  std::size_t input_channels = 1;
  double width_multiplier = 1.0;
  std::size_t clip_len = 12;
  std::size_t input_height = 224;
  std::size_t input_width = 224;
  /// Temporal stride of stages 2..4 (spatial stride is always 2 there).
  std::array<std::size_t, 3> stage_temporal_strides = {2, 2, 2};

  void validate() const;
  /// Channel widths of the stem and the four stages.
  std::array<std::size_t, 4> stage_channels() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Names of the top-level blocks, in order. "last_conv" aliases "layer4".
inline constexpr std::array<const char*, 7> kModelBlocks = {"stem", "layer1", "layer2", "layer3", "layer4", "pool", "fc"};

template <typename T>
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }
  nn::Sequential<T>& net() noexcept { return *net_; }

  /// batch [B, C, k, H, W] -> logits [B, num_classes]. Throws on a shape mismatch.
  Tensor<T> forward(const Tensor<T>& batch);
  /// Backpropagates d(loss)/d(logits); returns d(loss)/d(input) when `input_grad`.
  Tensor<T> backward(const Tensor<T>& grad_logits, bool input_grad = true);

  void set_training(bool training) { net_->set_training(training); }
  bool training() const noexcept { return net_->training(); }
  void zero_grad();

  std::vector<nn::Parameter<T>*> parameters();
  std::vector<nn::Buffer<T>> buffers();
  std::size_t parameter_count();

  /// Resolves a block name (or "last_conv") to its index in net(); throws if unknown.
  std::size_t block_index(const std::string& name) const;

  /// Copies parameters and buffers from a model with the same config.
  template <typename U>
  void copy_state_from(Model<U>& other);

  std::unique_ptr<Model> clone();

 private:
  ModelConfig config_;
  std::uint64_t seed_;
  std::unique_ptr<nn::Sequential<T>> net_;
  nn::Conv3d<T>* stem_conv_ = nullptr;
};

template <typename T>
std::unique_ptr<Model<T>> build_model(const ModelConfig& config, std::uint64_t seed) {
  return std::make_unique<Model<T>>(config, seed);
}

/// Row-wise softmax of [B, C] logits.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

template <typename T>
struct LossAndGrad {
  T loss;
  Tensor<T> grad;  // d(mean loss)/d(logits)
};

/// Mean categorical cross-entropy over the batch.
template <typename T>
LossAndGrad<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets);

/// Adam with L2 weight decay folded into the gradient (the classic formulation).
template <typename T>
class Adam {
 public:
  Adam(std::vector<nn::Parameter<T>*> params, double learning_rate, double weight_decay, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);
  void step();
  void zero_grad();
  std::uint64_t steps() const noexcept { return t_; }

 private:
  std::vector<nn::Parameter<T>*> params_;
  std::vector<std::vector<T>> m_, v_;
  double lr_, wd_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
};

template <typename T>
template <typename U>
void Model<T>::copy_state_from(Model<U>& other) {
  if (!(other.config() == config_)) throw Error("copy_state_from: model configs differ");
  auto dst = parameters();
  auto src = other.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    for (std::size_t j = 0; j < dst[i]->value.size(); ++j) dst[i]->value[j] = static_cast<T>(src[i]->value[j]);
  }
  auto dbuf = buffers();
  auto sbuf = other.buffers();
  for (std::size_t i = 0; i < dbuf.size(); ++i) {
    for (std::size_t j = 0; j < dbuf[i].value->size(); ++j) (*dbuf[i].value)[j] = static_cast<T>((*sbuf[i].value)[j]);
  }
}

}  // namespace echopipe
