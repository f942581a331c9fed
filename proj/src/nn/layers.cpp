#include "echopipe/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "echopipe/error.hpp"

namespace echopipe::nn {
namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatRM<T>>;

void require_rank(const Shape& shape, std::size_t rank, const std::string& who) {
  if (shape.size() != rank) {
    throw Error(who + ": expected rank " + std::to_string(rank) + " input, got " + shape_string(shape));
  }
}

struct ConvGeometry {
  std::size_t C, D, H, W;
  std::size_t Do, Ho, Wo;
  Dims3 k, s, p;

  std::size_t rows() const { return C * k[0] * k[1] * k[2]; }
  std::size_t cols() const { return Do * Ho * Wo; }
};

// First output index whose input coordinate o*s - p + kk lands inside [0, in).
inline std::size_t first_valid(std::size_t kk, std::size_t s, std::size_t p) {
  return kk >= p ? 0 : (p - kk + s - 1) / s;
}
// One past the last valid output index.
inline std::size_t end_valid(std::size_t kk, std::size_t s, std::size_t p, std::size_t in, std::size_t out) {
  if (in + p <= kk) return 0;
  return std::min(out, (in + p - kk - 1) / s + 1);
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t N = g.cols();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.C; ++c) {
    for (std::size_t a = 0; a < g.k[0]; ++a) {
      for (std::size_t b = 0; b < g.k[1]; ++b) {
        for (std::size_t e = 0; e < g.k[2]; ++e, ++row) {
          T* dst = col + row * N;
          const std::size_t ow0 = first_valid(e, g.s[2], g.p[2]);
          const std::size_t ow1 = std::max(ow0, end_valid(e, g.s[2], g.p[2], g.W, g.Wo));
          for (std::size_t od = 0; od < g.Do; ++od) {
            const long id = static_cast<long>(od * g.s[0] + a) - static_cast<long>(g.p[0]);
            for (std::size_t oh = 0; oh < g.Ho; ++oh) {
              T* out = dst + (od * g.Ho + oh) * g.Wo;
              const long ih = static_cast<long>(oh * g.s[1] + b) - static_cast<long>(g.p[1]);
              if (id < 0 || id >= static_cast<long>(g.D) || ih < 0 || ih >= static_cast<long>(g.H)) {
                std::fill(out, out + g.Wo, T{0});
                continue;
              }
              const T* src = x + ((c * g.D + static_cast<std::size_t>(id)) * g.H + static_cast<std::size_t>(ih)) * g.W;
              std::fill(out, out + ow0, T{0});
              if (g.s[2] == 1) {
                const T* base = src + (ow0 + e - g.p[2]);
                std::copy(base, base + (ow1 - ow0), out + ow0);
              } else {
                for (std::size_t ow = ow0; ow < ow1; ++ow) out[ow] = src[ow * g.s[2] + e - g.p[2]];
              }
              std::fill(out + ow1, out + g.Wo, T{0});
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* dx) {
  const std::size_t N = g.cols();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.C; ++c) {
    for (std::size_t a = 0; a < g.k[0]; ++a) {
      for (std::size_t b = 0; b < g.k[1]; ++b) {
        for (std::size_t e = 0; e < g.k[2]; ++e, ++row) {
          const T* src_row = col + row * N;
          const std::size_t ow0 = first_valid(e, g.s[2], g.p[2]);
          const std::size_t ow1 = std::max(ow0, end_valid(e, g.s[2], g.p[2], g.W, g.Wo));
          for (std::size_t od = 0; od < g.Do; ++od) {
            const long id = static_cast<long>(od * g.s[0] + a) - static_cast<long>(g.p[0]);
            if (id < 0 || id >= static_cast<long>(g.D)) continue;
            for (std::size_t oh = 0; oh < g.Ho; ++oh) {
              const long ih = static_cast<long>(oh * g.s[1] + b) - static_cast<long>(g.p[1]);
              if (ih < 0 || ih >= static_cast<long>(g.H)) continue;
              const T* in = src_row + (od * g.Ho + oh) * g.Wo;
              T* dst = dx + ((c * g.D + static_cast<std::size_t>(id)) * g.H + static_cast<std::size_t>(ih)) * g.W;
              for (std::size_t ow = ow0; ow < ow1; ++ow) dst[ow * g.s[2] + e - g.p[2]] += in[ow];
            }
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv3d

template <typename T>
Conv3d<T>::Conv3d(std::string name, std::size_t in_channels, std::size_t out_channels, Dims3 kernel, Dims3 stride,
                  Dims3 padding, bool bias)
    : Layer<T>(std::move(name)),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      has_bias_(bias) {
  const Shape wshape{out_channels, in_channels, kernel[0], kernel[1], kernel[2]};
  weight_ = Parameter<T>{this->name_ + ".weight", Tensor<T>(wshape), Tensor<T>(wshape)};
  if (has_bias_) bias_ = Parameter<T>{this->name_ + ".bias", Tensor<T>({out_channels}), Tensor<T>({out_channels})};
}

template <typename T>
Dims3 Conv3d<T>::output_dims(const Dims3& in) const {
  Dims3 out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (in[i] + 2 * padding_[i] < kernel_[i]) {
      throw Error(this->name_ + ": input extent " + std::to_string(in[i]) + " smaller than kernel");
    }
    out[i] = (in[i] + 2 * padding_[i] - kernel_[i]) / stride_[i] + 1;
  }
  return out;
}

template <typename T>
Tensor<T> Conv3d<T>::forward(const Tensor<T>& x) {
  require_rank(x.shape(), 5, this->name_);
  if (x.dim(1) != in_channels_) {
    throw Error(this->name_ + ": expected " + std::to_string(in_channels_) + " input channels, got " +
                shape_string(x.shape()));
  }
  const std::size_t B = x.dim(0);
  const Dims3 od = output_dims({x.dim(2), x.dim(3), x.dim(4)});
  const ConvGeometry g{in_channels_, x.dim(2), x.dim(3), x.dim(4), od[0], od[1], od[2], kernel_, stride_, padding_};
  const std::size_t K = g.rows(), N = g.cols();
  input_ = x;

  Tensor<T> y({B, out_channels_, od[0], od[1], od[2]});
  std::vector<T> col(K * N);
  const ConstMapRM<T> w(weight_.value.data(), static_cast<Eigen::Index>(out_channels_), static_cast<Eigen::Index>(K));
  const std::size_t in_stride = x.size() / B, out_stride = y.size() / B;
  for (std::size_t b = 0; b < B; ++b) {
    im2col(x.data() + b * in_stride, g, col.data());
    const ConstMapRM<T> colm(col.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N));
    MapRM<T> out(y.data() + b * out_stride, static_cast<Eigen::Index>(out_channels_), static_cast<Eigen::Index>(N));
    out.noalias() = w * colm;
    if (has_bias_) {
      for (std::size_t c = 0; c < out_channels_; ++c) out.row(static_cast<Eigen::Index>(c)).array() += bias_.value[c];
    }
  }
  return y;
}

template <typename T>
Tensor<T> Conv3d<T>::backward(const Tensor<T>& grad_out) {
  const Tensor<T>& x = input_;
  const std::size_t B = x.dim(0);
  const ConvGeometry g{in_channels_, x.dim(2), x.dim(3), x.dim(4), grad_out.dim(2), grad_out.dim(3), grad_out.dim(4),
                       kernel_, stride_, padding_};
  const std::size_t K = g.rows(), N = g.cols();
  const auto Co = static_cast<Eigen::Index>(out_channels_);

  Tensor<T> dx = input_grad_ ? Tensor<T>(x.shape(), T{0}) : Tensor<T>();
  std::vector<T> col(K * N), dcol(input_grad_ ? K * N : 0);
  const ConstMapRM<T> w(weight_.value.data(), Co, static_cast<Eigen::Index>(K));
  MapRM<T> dw(weight_.grad.data(), Co, static_cast<Eigen::Index>(K));
  const std::size_t in_stride = x.size() / B, out_stride = grad_out.size() / B;
  for (std::size_t b = 0; b < B; ++b) {
    const ConstMapRM<T> gy(grad_out.data() + b * out_stride, Co, static_cast<Eigen::Index>(N));
    im2col(x.data() + b * in_stride, g, col.data());
    const ConstMapRM<T> colm(col.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N));
    dw.noalias() += gy * colm.transpose();
    if (has_bias_) {
      for (std::size_t c = 0; c < out_channels_; ++c) bias_.grad[c] += gy.row(static_cast<Eigen::Index>(c)).sum();
    }
    if (input_grad_) {
      MapRM<T> dcolm(dcol.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N));
      dcolm.noalias() = w.transpose() * gy;
      col2im(dcol.data(), g, dx.data() + b * in_stride);
    }
  }
  return dx;
}

template <typename T>
void Conv3d<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

template <typename T>
void Conv3d<T>::reset_parameters(std::mt19937_64& rng) {
  // Kaiming normal, fan_out, ReLU gain.
  const double fan_out = static_cast<double>(out_channels_ * kernel_[0] * kernel_[1] * kernel_[2]);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_out));
  for (auto& v : weight_.value.storage()) v = static_cast<T>(dist(rng));
  if (has_bias_) bias_.value.fill(T{0});
}

// ---------------------------------------------------------------- BatchNorm3d

template <typename T>
BatchNorm3d<T>::BatchNorm3d(std::string name, std::size_t channels, T momentum, T eps)
    : Layer<T>(std::move(name)),
      channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_{this->name_ + ".weight", Tensor<T>({channels}, T{1}), Tensor<T>({channels})},
      beta_{this->name_ + ".bias", Tensor<T>({channels}), Tensor<T>({channels})},
      running_mean_({channels}, T{0}),
      running_var_({channels}, T{1}) {}

template <typename T>
Tensor<T> BatchNorm3d<T>::forward(const Tensor<T>& x) {
  require_rank(x.shape(), 5, this->name_);
  if (x.dim(1) != channels_) throw Error(this->name_ + ": channel mismatch, got " + shape_string(x.shape()));
  const std::size_t B = x.dim(0), C = channels_, S = x.size() / (B * C);
  const double count = static_cast<double>(B * S);
  Tensor<T> y(x.shape());
  xhat_ = Tensor<T>(x.shape());
  inv_std_.assign(C, T{0});
  cached_training_ = this->training_;
  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (this->training_) {
      double sum = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const T* p = x.data() + (b * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) sum += p[i];
      }
      mean = sum / count;
      double sq = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const T* p = x.data() + (b * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / count;
      const double unbiased = count > 1.0 ? sq / (count - 1.0) : var;
      running_mean_[c] = static_cast<T>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
      running_var_[c] = static_cast<T>((1.0 - momentum_) * running_var_[c] + momentum_ * unbiased);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + eps_));
    const T m = static_cast<T>(mean);
    inv_std_[c] = inv;
    const T g = gamma_.value[c], bt = beta_.value[c];
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t off = (b * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        const T xh = (x[off + i] - m) * inv;
        xhat_[off + i] = xh;
        y[off + i] = g * xh + bt;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm3d<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t B = grad_out.dim(0), C = channels_, S = grad_out.size() / (B * C);
  const double count = static_cast<double>(B * S);
  Tensor<T> dx(grad_out.shape());
  for (std::size_t c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t off = (b * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xhat += grad_out[off + i] * xhat_[off + i];
      }
    }
    gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
    beta_.grad[c] += static_cast<T>(sum_dy);
    const T g = gamma_.value[c], inv = inv_std_[c];
    if (cached_training_) {
      const T mean_dy = static_cast<T>(sum_dy / count), mean_dy_xhat = static_cast<T>(sum_dy_xhat / count);
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t off = (b * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) {
          dx[off + i] = g * inv * (grad_out[off + i] - mean_dy - xhat_[off + i] * mean_dy_xhat);
        }
      }
    } else {
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t off = (b * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) dx[off + i] = g * inv * grad_out[off + i];
      }
    }
  }
  return dx;
}

template <typename T>
void BatchNorm3d<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

template <typename T>
void BatchNorm3d<T>::collect_buffers(std::vector<Buffer<T>>& out) {
  out.push_back({this->name_ + ".running_mean", &running_mean_});
  out.push_back({this->name_ + ".running_var", &running_var_});
}

template <typename T>
void BatchNorm3d<T>::reset_parameters(std::mt19937_64& /*rng*/) {
  gamma_.value.fill(T{1});
  beta_.value.fill(T{0});
  running_mean_.fill(T{0});
  running_var_.fill(T{1});
}

// ---------------------------------------------------------------- ReLU

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  active_.assign(x.size(), 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > T{0}) {
      active_[i] = 1;
    } else {
      y[i] = T{0};
    }
  }
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!active_[i]) dx[i] = T{0};
  }
  return dx;
}

// ---------------------------------------------------------------- MaxPool3d

template <typename T>
MaxPool3d<T>::MaxPool3d(std::string name, Dims3 kernel, Dims3 stride, Dims3 padding)
    : Layer<T>(std::move(name)), kernel_(kernel), stride_(stride), padding_(padding) {}

template <typename T>
Tensor<T> MaxPool3d<T>::forward(const Tensor<T>& x) {
  require_rank(x.shape(), 5, this->name_);
  input_shape_ = x.shape();
  const std::size_t B = x.dim(0), C = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
  Dims3 out{};
  const Dims3 in{D, H, W};
  for (std::size_t i = 0; i < 3; ++i) out[i] = (in[i] + 2 * padding_[i] - kernel_[i]) / stride_[i] + 1;
  Tensor<T> y({B, C, out[0], out[1], out[2]});
  argmax_.assign(y.size(), 0);
  std::size_t o = 0;
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const T* src = x.data() + bc * D * H * W;
    for (std::size_t od = 0; od < out[0]; ++od) {
      for (std::size_t oh = 0; oh < out[1]; ++oh) {
        for (std::size_t ow = 0; ow < out[2]; ++ow, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t a = 0; a < kernel_[0]; ++a) {
            const long id = static_cast<long>(od * stride_[0] + a) - static_cast<long>(padding_[0]);
            if (id < 0 || id >= static_cast<long>(D)) continue;
            for (std::size_t b = 0; b < kernel_[1]; ++b) {
              const long ih = static_cast<long>(oh * stride_[1] + b) - static_cast<long>(padding_[1]);
              if (ih < 0 || ih >= static_cast<long>(H)) continue;
              for (std::size_t e = 0; e < kernel_[2]; ++e) {
                const long iw = static_cast<long>(ow * stride_[2] + e) - static_cast<long>(padding_[2]);
                if (iw < 0 || iw >= static_cast<long>(W)) continue;
                const std::size_t idx = (static_cast<std::size_t>(id) * H + static_cast<std::size_t>(ih)) * W +
                                        static_cast<std::size_t>(iw);
                if (src[idx] > best) {
                  best = src[idx];
                  best_idx = idx;
                }
              }
            }
          }
          y[o] = best;
          argmax_[o] = bc * D * H * W + best_idx;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool3d<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx(input_shape_, T{0});
  for (std::size_t o = 0; o < grad_out.size(); ++o) dx[argmax_[o]] += grad_out[o];
  return dx;
}

// ---------------------------------------------------------------- GlobalAvgPool3d

template <typename T>
Tensor<T> GlobalAvgPool3d<T>::forward(const Tensor<T>& x) {
  require_rank(x.shape(), 5, this->name_);
  input_shape_ = x.shape();
  const std::size_t B = x.dim(0), C = x.dim(1), S = x.size() / (B * C);
  Tensor<T> y({B, C});
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    double sum = 0.0;
    const T* p = x.data() + bc * S;
    for (std::size_t i = 0; i < S; ++i) sum += p[i];
    y[bc] = static_cast<T>(sum / static_cast<double>(S));
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool3d<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx(input_shape_);
  const std::size_t BC = input_shape_[0] * input_shape_[1], S = dx.size() / BC;
  for (std::size_t bc = 0; bc < BC; ++bc) {
    const T g = grad_out[bc] / static_cast<T>(S);
    std::fill(dx.data() + bc * S, dx.data() + (bc + 1) * S, g);
  }
  return dx;
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::string name, std::size_t in_features, std::size_t out_features)
    : Layer<T>(std::move(name)),
      in_features_(in_features),
      out_features_(out_features),
      weight_{this->name_ + ".weight", Tensor<T>({out_features, in_features}), Tensor<T>({out_features, in_features})},
      bias_{this->name_ + ".bias", Tensor<T>({out_features}), Tensor<T>({out_features})} {}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  require_rank(x.shape(), 2, this->name_);
  if (x.dim(1) != in_features_) throw Error(this->name_ + ": feature mismatch, got " + shape_string(x.shape()));
  input_ = x;
  const auto B = static_cast<Eigen::Index>(x.dim(0));
  const auto In = static_cast<Eigen::Index>(in_features_), Out = static_cast<Eigen::Index>(out_features_);
  Tensor<T> y({x.dim(0), out_features_});
  MapRM<T> ym(y.data(), B, Out);
  ym.noalias() = ConstMapRM<T>(x.data(), B, In) * ConstMapRM<T>(weight_.value.data(), Out, In).transpose();
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index o = 0; o < Out; ++o) ym(b, o) += bias_.value[static_cast<std::size_t>(o)];
  }
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_out) {
  const auto B = static_cast<Eigen::Index>(input_.dim(0));
  const auto In = static_cast<Eigen::Index>(in_features_), Out = static_cast<Eigen::Index>(out_features_);
  const ConstMapRM<T> gy(grad_out.data(), B, Out);
  MapRM<T>(weight_.grad.data(), Out, In).noalias() += gy.transpose() * ConstMapRM<T>(input_.data(), B, In);
  for (Eigen::Index o = 0; o < Out; ++o) bias_.grad[static_cast<std::size_t>(o)] += gy.col(o).sum();
  Tensor<T> dx(input_.shape());
  MapRM<T>(dx.data(), B, In).noalias() = gy * ConstMapRM<T>(weight_.value.data(), Out, In);
  return dx;
}

template <typename T>
void Linear<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
void Linear<T>::reset_parameters(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features_));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : weight_.value.storage()) v = static_cast<T>(dist(rng));
  for (auto& v : bias_.value.storage()) v = static_cast<T>(dist(rng));
}

// ---------------------------------------------------------------- Sequential

template <typename T>
Layer<T>& Sequential<T>::add(std::unique_ptr<Layer<T>> layer) {
  layer->set_training(this->training_);
  children_.push_back(std::move(layer));
  return *children_.back();
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x) {
  Tensor<T> h = x;
  for (auto& c : children_) h = c->forward(h);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (auto it = children_.rbegin(); it != children_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
Tensor<T> Sequential<T>::forward_capture(const Tensor<T>& x, std::size_t capture, Tensor<T>& captured) {
  Tensor<T> h = x;
  for (std::size_t i = 0; i < children_.size(); ++i) {
    h = children_[i]->forward(h);
    if (i == capture) captured = h;
  }
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward_to(const Tensor<T>& grad_out, std::size_t index) {
  Tensor<T> g = grad_out;
  for (std::size_t i = children_.size(); i-- > index + 1;) g = children_[i]->backward(g);
  return g;
}

template <typename T>
std::size_t Sequential<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < children_.size(); ++i) {
    if (children_[i]->name() == name) return i;
  }
  return children_.size();
}

template <typename T>
void Sequential<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  for (auto& c : children_) c->collect_parameters(out);
}

template <typename T>
void Sequential<T>::collect_buffers(std::vector<Buffer<T>>& out) {
  for (auto& c : children_) c->collect_buffers(out);
}

template <typename T>
void Sequential<T>::reset_parameters(std::mt19937_64& rng) {
  for (auto& c : children_) c->reset_parameters(rng);
}

template <typename T>
void Sequential<T>::set_training(bool training) {
  this->training_ = training;
  for (auto& c : children_) c->set_training(training);
}

// ---------------------------------------------------------------- BasicBlock3d

template <typename T>
BasicBlock3d<T>::BasicBlock3d(std::string name, std::size_t in_channels, std::size_t out_channels, Dims3 stride)
    : Layer<T>(name), main_(name + ".main"), out_relu_(name + ".relu") {
  main_.template emplace<Conv3d<T>>(name + ".conv1", in_channels, out_channels, Dims3{3, 3, 3}, stride, Dims3{1, 1, 1});
  main_.template emplace<BatchNorm3d<T>>(name + ".bn1", out_channels);
  main_.template emplace<ReLU<T>>(name + ".relu1");
  main_.template emplace<Conv3d<T>>(name + ".conv2", out_channels, out_channels, Dims3{3, 3, 3}, Dims3{1, 1, 1},
                                    Dims3{1, 1, 1});
  main_.template emplace<BatchNorm3d<T>>(name + ".bn2", out_channels);
  const bool project = in_channels != out_channels || stride != Dims3{1, 1, 1};
  if (project) {
    shortcut_ = std::make_unique<Sequential<T>>(name + ".downsample");
    shortcut_->template emplace<Conv3d<T>>(name + ".downsample.0", in_channels, out_channels, Dims3{1, 1, 1}, stride,
                                           Dims3{0, 0, 0});
    shortcut_->template emplace<BatchNorm3d<T>>(name + ".downsample.1", out_channels);
  }
}

template <typename T>
Tensor<T> BasicBlock3d<T>::forward(const Tensor<T>& x) {
  Tensor<T> out = main_.forward(x);
  const Tensor<T> skip = shortcut_ ? shortcut_->forward(x) : x;
  if (skip.shape() != out.shape()) throw Error(this->name_ + ": residual shape mismatch");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += skip[i];
  return out_relu_.forward(out);
}

template <typename T>
Tensor<T> BasicBlock3d<T>::backward(const Tensor<T>& grad_out) {
  const Tensor<T> g = out_relu_.backward(grad_out);
  Tensor<T> dx = main_.backward(g);
  const Tensor<T> dskip = shortcut_ ? shortcut_->backward(g) : g;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dskip[i];
  return dx;
}

template <typename T>
void BasicBlock3d<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  main_.collect_parameters(out);
  if (shortcut_) shortcut_->collect_parameters(out);
}

template <typename T>
void BasicBlock3d<T>::collect_buffers(std::vector<Buffer<T>>& out) {
  main_.collect_buffers(out);
  if (shortcut_) shortcut_->collect_buffers(out);
}

template <typename T>
void BasicBlock3d<T>::reset_parameters(std::mt19937_64& rng) {
  main_.reset_parameters(rng);
  if (shortcut_) shortcut_->reset_parameters(rng);
}

template <typename T>
void BasicBlock3d<T>::set_training(bool training) {
  this->training_ = training;
  main_.set_training(training);
  if (shortcut_) shortcut_->set_training(training);
}

#define ECHOPIPE_INSTANTIATE_LAYERS(T) \
  template class Conv3d<T>;            \
  template class BatchNorm3d<T>;       \
  template class ReLU<T>;              \
  template class MaxPool3d<T>;         \
  template class GlobalAvgPool3d<T>;   \
  template class Linear<T>;            \
  template class Sequential<T>;        \
  template class BasicBlock3d<T>;

ECHOPIPE_INSTANTIATE_LAYERS(float)
ECHOPIPE_INSTANTIATE_LAYERS(double)

}  // namespace echopipe::nn
