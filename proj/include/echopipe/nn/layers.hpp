#pragma once

#include <array>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "echopipe/tensor.hpp"

namespace echopipe::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() { grad.fill(T{0}); }
};

/// Non-trainable state that still belongs in a checkpoint (BatchNorm running stats).
template <typename T>
struct Buffer {
  std::string name;
  Tensor<T>* value;
};

using Dims3 = std::array<std::size_t, 3>;

/// A differentiable block with explicit backward. `backward` consumes the state
/// cached by the most recent `forward`, accumulates parameter gradients, and
/// returns the gradient with respect to the block input.
template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;

  virtual void collect_parameters(std::vector<Parameter<T>*>& /*out*/) {}
  virtual void collect_buffers(std::vector<Buffer<T>>& /*out*/) {}
  /// Draws fresh parameters (and resets buffers) from `rng`.
  virtual void reset_parameters(std::mt19937_64& /*rng*/) {}
  virtual void set_training(bool training) { training_ = training; }

  const std::string& name() const noexcept { return name_; }
  bool training() const noexcept { return training_; }

 protected:
  std::string name_;
  bool training_ = false;
};

template <typename T>
class Conv3d final : public Layer<T> {
 public:
  Conv3d(std::string name, std::size_t in_channels, std::size_t out_channels, Dims3 kernel, Dims3 stride,
         Dims3 padding, bool bias = false);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void reset_parameters(std::mt19937_64& rng) override;

  /// Skip the input-gradient computation (first layer during training).
  void set_input_grad(bool enabled) noexcept { input_grad_ = enabled; }

  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>* bias() noexcept { return has_bias_ ? &bias_ : nullptr; }
  Dims3 output_dims(const Dims3& in) const;

 private:
  std::size_t in_channels_, out_channels_;
  Dims3 kernel_, stride_, padding_;
  bool has_bias_;
  bool input_grad_ = true;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
};

template <typename T>
class BatchNorm3d final : public Layer<T> {
 public:
  BatchNorm3d(std::string name, std::size_t channels, T momentum = T(0.1), T eps = T(1e-5));

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void collect_buffers(std::vector<Buffer<T>>& out) override;
  void reset_parameters(std::mt19937_64& rng) override;

  Tensor<T>& running_mean() noexcept { return running_mean_; }
  Tensor<T>& running_var() noexcept { return running_var_; }

 private:
  std::size_t channels_;
  T momentum_, eps_;
  Parameter<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  bool cached_training_ = false;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  std::vector<std::uint8_t> active_;
};

template <typename T>
class MaxPool3d final : public Layer<T> {
 public:
  MaxPool3d(std::string name, Dims3 kernel, Dims3 stride, Dims3 padding);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Dims3 kernel_, stride_, padding_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// [B, C, D, H, W] -> [B, C], mean over (D, H, W).
template <typename T>
class GlobalAvgPool3d final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Shape input_shape_;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::string name, std::size_t in_features, std::size_t out_features);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void reset_parameters(std::mt19937_64& rng) override;

  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }

 private:
  std::size_t in_features_, out_features_;
  Parameter<T> weight_, bias_;
  Tensor<T> input_;
};

/// Ordered container of named child blocks.
template <typename T>
class Sequential : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Layer<T>& add(std::unique_ptr<Layer<T>> layer);
  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    return static_cast<L&>(add(std::make_unique<L>(std::forward<Args>(args)...)));
  }

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void collect_buffers(std::vector<Buffer<T>>& out) override;
  void reset_parameters(std::mt19937_64& rng) override;
  void set_training(bool training) override;

  std::size_t size() const noexcept { return children_.size(); }
  Layer<T>& child(std::size_t i) { return *children_.at(i); }
  /// Index of the child named `name`, or size() if absent.
  std::size_t index_of(const std::string& name) const;

  /// Forward pass that also returns a copy of the output of child `capture`.
  Tensor<T> forward_capture(const Tensor<T>& x, std::size_t capture, Tensor<T>& captured);
  /// Backpropagates through children after `index`; returns the gradient with
  /// respect to the output of child `index`.
  Tensor<T> backward_to(const Tensor<T>& grad_out, std::size_t index);

 private:
  std::vector<std::unique_ptr<Layer<T>>> children_;
};

/// Two 3x3x3 convolutions with a residual shortcut (projection when the shape changes).
template <typename T>
class BasicBlock3d final : public Layer<T> {
 public:
  BasicBlock3d(std::string name, std::size_t in_channels, std::size_t out_channels, Dims3 stride);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void collect_buffers(std::vector<Buffer<T>>& out) override;
  void reset_parameters(std::mt19937_64& rng) override;
  void set_training(bool training) override;

 private:
  Sequential<T> main_;
  std::unique_ptr<Sequential<T>> shortcut_;
  ReLU<T> out_relu_;
};

}  // namespace echopipe::nn
