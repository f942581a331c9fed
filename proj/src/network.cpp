#include "echopipe/network.hpp"

#include <cmath>

#include "echopipe/error.hpp"

namespace echopipe {

void ModelConfig::validate() const {
  if (num_classes != 2 && num_classes != 3) throw ConfigError("model num_classes must be 2 or 3");
  if (input_channels < 1) throw ConfigError("model input_channels must be >= 1");
  if (!(width_multiplier > 0.0)) throw ConfigError("model width_multiplier must be > 0");
  if (clip_len < 1 || input_height < 1 || input_width < 1) throw ConfigError("model input dims must be positive");
  for (std::size_t s : stage_temporal_strides) {
    if (s != 1 && s != 2) throw ConfigError("model stage temporal strides must be 1 or 2");
  }
}

std::array<std::size_t, 4> ModelConfig::stage_channels() const {
  std::array<std::size_t, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double c = std::round(64.0 * static_cast<double>(1u << i) * width_multiplier);
    out[i] = std::max<std::size_t>(1, static_cast<std::size_t>(c));
  }
  return out;
}

template <typename T>
Model<T>::Model(const ModelConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  config_.validate();
  using nn::Dims3;
  const auto ch = config_.stage_channels();
  net_ = std::make_unique<nn::Sequential<T>>("net");

  auto stem = std::make_unique<nn::Sequential<T>>("stem");
  stem_conv_ = &stem->template emplace<nn::Conv3d<T>>("stem.conv", config_.input_channels, ch[0], Dims3{3, 7, 7},
                                                      Dims3{1, 2, 2}, Dims3{1, 3, 3});
  stem->template emplace<nn::BatchNorm3d<T>>("stem.bn", ch[0]);
  stem->template emplace<nn::ReLU<T>>("stem.relu");
  stem->template emplace<nn::MaxPool3d<T>>("stem.pool", Dims3{3, 3, 3}, Dims3{1, 2, 2}, Dims3{1, 1, 1});
  net_->add(std::move(stem));

  std::size_t in = ch[0];
  for (std::size_t stage = 0; stage < 4; ++stage) {
    const std::string name = "layer" + std::to_string(stage + 1);
    const Dims3 stride = stage == 0 ? Dims3{1, 1, 1} : Dims3{config_.stage_temporal_strides[stage - 1], 2, 2};
    auto layer = std::make_unique<nn::Sequential<T>>(name);
    layer->template emplace<nn::BasicBlock3d<T>>(name + ".0", in, ch[stage], stride);
    layer->template emplace<nn::BasicBlock3d<T>>(name + ".1", ch[stage], ch[stage], Dims3{1, 1, 1});
    net_->add(std::move(layer));
    in = ch[stage];
  }
  net_->template emplace<nn::GlobalAvgPool3d<T>>("pool");
  net_->template emplace<nn::Linear<T>>("fc", ch[3], static_cast<std::size_t>(config_.num_classes));

  std::mt19937_64 rng(seed);
  net_->reset_parameters(rng);
  zero_grad();
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& batch) {
  const Shape& s = batch.shape();
  const bool ok = s.size() == 5 && s[0] >= 1 && s[1] == config_.input_channels && s[2] == config_.clip_len &&
                  s[3] == config_.input_height && s[4] == config_.input_width;
  if (!ok) {
    throw Error("model input shape mismatch: expected [B, " + std::to_string(config_.input_channels) + ", " +
                std::to_string(config_.clip_len) + ", " + std::to_string(config_.input_height) + ", " +
                std::to_string(config_.input_width) + "], got " + shape_string(s));
  }
  return net_->forward(batch);
}

template <typename T>
Tensor<T> Model<T>::backward(const Tensor<T>& grad_logits, bool input_grad) {
  stem_conv_->set_input_grad(input_grad);
  return net_->backward(grad_logits);
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
std::vector<nn::Parameter<T>*> Model<T>::parameters() {
  std::vector<nn::Parameter<T>*> out;
  net_->collect_parameters(out);
  return out;
}

template <typename T>
std::vector<nn::Buffer<T>> Model<T>::buffers() {
  std::vector<nn::Buffer<T>> out;
  net_->collect_buffers(out);
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value.size();
  return n;
}

template <typename T>
std::size_t Model<T>::block_index(const std::string& name) const {
  const std::string resolved = name == "last_conv" ? "layer4" : name;
  const std::size_t idx = net_->index_of(resolved);
  if (idx == net_->size()) throw Error("unknown model layer '" + name + "'");
  return idx;
}

template <typename T>
std::unique_ptr<Model<T>> Model<T>::clone() {
  auto copy = std::make_unique<Model<T>>(config_, seed_);
  copy->copy_state_from(*this);
  copy->set_training(training());
  return copy;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  Tensor<T> out(logits.shape());
  for (std::size_t b = 0; b < B; ++b) {
    const T* row = logits.data() + b * C;
    T peak = row[0];
    for (std::size_t c = 1; c < C; ++c) peak = std::max(peak, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) sum += std::exp(static_cast<double>(row[c] - peak));
    for (std::size_t c = 0; c < C; ++c) out[b * C + c] = static_cast<T>(std::exp(static_cast<double>(row[c] - peak)) / sum);
  }
  return out;
}

template <typename T>
LossAndGrad<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets) {
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  if (targets.size() != B) throw Error("cross_entropy: target count does not match batch");
  LossAndGrad<T> out{T{0}, softmax_rows(logits)};
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const auto t = static_cast<std::size_t>(targets[b]);
    if (t >= C) throw Error("cross_entropy: target out of range");
    const T* row = logits.data() + b * C;
    T peak = row[0];
    for (std::size_t c = 1; c < C; ++c) peak = std::max(peak, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) sum += std::exp(static_cast<double>(row[c] - peak));
    loss += std::log(sum) - static_cast<double>(row[t] - peak);
    out.grad[b * C + t] -= T{1};
  }
  for (auto& g : out.grad.storage()) g /= static_cast<T>(B);
  out.loss = static_cast<T>(loss / static_cast<double>(B));
  return out;
}

template <typename T>
Adam<T>::Adam(std::vector<nn::Parameter<T>*> params, double learning_rate, double weight_decay, double beta1,
              double beta2, double eps)
    : params_(std::move(params)), lr_(learning_rate), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.size(), T{0});
    v_.emplace_back(p->value.size(), T{0});
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
  const T step = static_cast<T>(lr_ / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T wd = static_cast<T>(wd_), eps = static_cast<T>(eps_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& value = params_[i]->value;
    const auto& grad = params_[i]->grad;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const T g = grad[j] + wd * value[j];
      m[j] = b1 * m[j] + (T{1} - b1) * g;
      v[j] = b2 * v[j] + (T{1} - b2) * g * g;
      value[j] -= step * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template class Model<float>;
template class Model<double>;
template Tensor<float> softmax_rows(const Tensor<float>&);
template Tensor<double> softmax_rows(const Tensor<double>&);
template LossAndGrad<float> cross_entropy(const Tensor<float>&, const std::vector<int>&);
template LossAndGrad<double> cross_entropy(const Tensor<double>&, const std::vector<int>&);
template class Adam<float>;
template class Adam<double>;

}  // namespace echopipe
