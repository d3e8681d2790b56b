#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "psoctseg/nn/tensor.hpp"

namespace psoctseg::nn {

/// A trainable array with its gradient accumulator.
template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  Buffer<T> value;
  Buffer<T> grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> s);

  [[nodiscard]] std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// Glorot-uniform fill with the given fan sizes.
template <typename T>
void glorot_uniform(Parameter<T>& p, int fan_in, int fan_out, std::mt19937_64& rng);

/// 2-D convolution with odd square kernel and stride 1. The output keeps the
/// input size: zero padding on the radial (H) axis, circular padding on the
/// angular (W) axis.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel);

  [[nodiscard]] Tensor<T> forward(const Tensor<T>& x) const;

  /// Back-propagates `dy` given the forward input `x`. Parameter gradients are
  /// accumulated when `param_grads` is set; the input gradient is returned when
  /// `input_grad` is set (otherwise an empty tensor).
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, bool param_grads, bool input_grad);
  /// Input gradient only; leaves the parameter gradients alone.
  [[nodiscard]] Tensor<T> backward_input(const Tensor<T>& x, const Tensor<T>& dy) const;

  [[nodiscard]] int in_channels() const { return in_; }
  [[nodiscard]] int out_channels() const { return out_; }
  [[nodiscard]] int kernel() const { return k_; }

  Parameter<T> weight;  // (out, in, k, k)
  Parameter<T> bias;    // (out)

 private:
  int in_ = 0;
  int out_ = 0;
  int k_ = 1;
};

/// Fully connected layer on flattened samples: y = W x + b.
template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, int in_features, int out_features);

  /// x is (n, in_features) stored as a Tensor with c=in_features, h=w=1 or
  /// any tensor whose sample_size() equals in_features.
  [[nodiscard]] Tensor<T> forward(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, bool param_grads, bool input_grad);
  [[nodiscard]] Tensor<T> backward_input(const Tensor<T>& x, const Tensor<T>& dy) const;

  [[nodiscard]] int in_features() const { return in_; }
  [[nodiscard]] int out_features() const { return out_; }

  Parameter<T> weight;  // (out, in)
  Parameter<T> bias;    // (out)

 private:
  int in_ = 0;
  int out_ = 0;
};

/// Leaky rectifier; slope 0 gives the plain rectifier.
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
/// Backward through leaky_relu from its output `y`.
template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& y, const Tensor<T>& dy, T slope);

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& y, const Tensor<T>& dy);

/// Per-pixel softmax over channels.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x);
template <typename T>
Tensor<T> softmax_channels_backward(const Tensor<T>& y, const Tensor<T>& dy);

/// 2x2 max pooling, stride 2, ceil mode (a trailing odd row/column is pooled
/// over the available pixels). Ties resolve to the first maximum in
/// row-major window order.
template <typename T>
struct MaxPoolResult {
  Tensor<T> y;
  std::vector<std::int32_t> argmax;  // flat index into the input plane
};

template <typename T>
MaxPoolResult<T> max_pool2(const Tensor<T>& x);
template <typename T>
Tensor<T> max_pool2_backward(const Tensor<T>& x, const MaxPoolResult<T>& fwd, const Tensor<T>& dy);

/// Fixed bilinear 2x upsampling with half-pixel centres; the angular axis
/// wraps, the radial axis clamps at the edges.
template <typename T>
Tensor<T> upsample2(const Tensor<T>& x);
template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dy, int in_h, int in_w);

/// Channel concatenation of two tensors with equal n, h, w.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
/// Splits a gradient of concat_channels back into its two parts.
template <typename T>
void split_channels(const Tensor<T>& dy, int ca, Tensor<T>& da, Tensor<T>& db);

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x);

}  // namespace psoctseg::nn
