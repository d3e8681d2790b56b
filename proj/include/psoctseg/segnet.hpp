#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

#include "psoctseg/nn/layers.hpp"
#include "psoctseg/types.hpp"

namespace psoctseg {

/// Residual block of three 3x3 convolutions with leaky rectifiers. The block
/// input is added to the output, through a 1x1 projection when the channel
/// counts differ.
template <typename T>
class ConvComplex {
 public:
  ConvComplex() = default;
  ConvComplex(const std::string& name, int in_channels, int features, T slope);

  struct Cache {
    nn::Tensor<T> x, y1, y2, y3;
  };

  nn::Tensor<T> forward(const nn::Tensor<T>& x, Cache* cache = nullptr) const;
  nn::Tensor<T> backward(const Cache& cache, const nn::Tensor<T>& dy, bool input_grad);

  [[nodiscard]] bool has_projection() const { return has_proj_; }
  void collect(std::vector<nn::Parameter<T>*>& out);

  nn::Conv2d<T> c1, c2, c3, proj;

 private:
  bool has_proj_ = false;
  T slope_ = T(0.3);
};

struct SegNetConfig {
  std::array<int, 3> features{8, 8, 16};
  int latent_features = 16;
  double lrelu_slope = 0.3;

  [[nodiscard]] nlohmann::json to_json() const;
  static SegNetConfig from_json(const nlohmann::json& j);
};

/// Three-scale residual U-Net with two latent complexes, concatenating skip
/// connections and a per-pixel softmax over the six classes. Input images
/// are standardised per channel with stored statistics.
template <typename T>
class SegNet {
 public:
  SegNet() = default;
  explicit SegNet(const SegNetConfig& cfg, std::uint64_t seed = 0);

  struct Cache {
    nn::Tensor<T> x;  // standardised input
    std::array<typename ConvComplex<T>::Cache, 3> enc;
    std::array<nn::Tensor<T>, 2> skip;  // encoder outputs at full and half scale
    std::array<nn::MaxPoolResult<T>, 2> pool;
    std::array<typename ConvComplex<T>::Cache, 2> lat;
    std::array<typename ConvComplex<T>::Cache, 3> dec;  // quarter, half, full scale
    std::array<nn::Tensor<T>, 2> up;                     // upsampled inputs of the up-convolutions
    nn::Tensor<T> features;                              // input of the output 1x1 convolution
    nn::Tensor<T> probs;
  };

  /// (n, 3, R, A) raw images to (n, 6, R, A) probabilities. Throws
  /// ShapeMismatch unless R and A are multiples of 4.
  nn::Tensor<T> forward(const nn::Tensor<T>& images, Cache* cache = nullptr) const;

  /// Accumulates parameter gradients for dL/dprobs.
  void backward(const Cache& cache, const nn::Tensor<T>& dprobs);

  std::vector<nn::Parameter<T>*> parameters();
  [[nodiscard]] std::vector<const nn::Parameter<T>*> parameters() const;
  [[nodiscard]] std::size_t parameter_count() const;
  void zero_grad();

  /// Per-channel mean and standard deviation over the given images.
  void fit_normalization(std::span<const PolarImage> images);
  std::array<float, kNumChannels> mean{0.0f, 0.0f, 0.0f};
  std::array<float, kNumChannels> stddev{1.0f, 1.0f, 1.0f};

  [[nodiscard]] const SegNetConfig& config() const { return cfg_; }

  template <typename U>
  [[nodiscard]] SegNet<U> cast() const;

 private:
  template <typename>
  friend class SegNet;

  SegNetConfig cfg_;
  std::array<ConvComplex<T>, 3> enc_;
  std::array<ConvComplex<T>, 2> lat_;
  std::array<ConvComplex<T>, 3> dec_;
  std::array<nn::Conv2d<T>, 2> upconv_;
  nn::Conv2d<T> head_;
};

template <typename T>
nn::Tensor<T> image_tensor(std::span<const PolarImage> images);

/// (n, 6, R, A) probabilities to ProbMaps, and ProbMap-shaped gradients back.
template <typename T>
std::vector<ProbMap> to_probmaps(const nn::Tensor<T>& probs);
template <typename T>
nn::Tensor<T> from_probmaps(std::span<const ProbMap> maps);

void save_segnet(const std::filesystem::path& path, const SegNet<float>& net, const nlohmann::json& extra_header = {});
SegNet<float> load_segnet(const std::filesystem::path& path);

/// Runs the network over images in chunks of `batch`.
std::vector<ProbMap> predict(const SegNet<float>& net, std::span<const PolarImage> images, int batch = 20);

}  // namespace psoctseg
