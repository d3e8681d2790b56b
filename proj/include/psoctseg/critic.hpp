#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

#include "psoctseg/losses.hpp"
#include "psoctseg/nn/layers.hpp"
#include "psoctseg/record_io.hpp"
#include "psoctseg/types.hpp"

namespace psoctseg {

inline constexpr int kCritiqueChannels = kNumChannels + kNumClasses;

struct CriticConfig {
  int R = 64;
  int A = 128;
  std::array<int, 3> features{32, 64, 128};
  std::array<int, 3> dense{1024, 256, 128};

  /// Spatial size after the three ceil-mode 2x2 pools.
  [[nodiscard]] int pooled_R() const { return half(half(half(R))); }
  [[nodiscard]] int pooled_A() const { return half(half(half(A))); }
  [[nodiscard]] nlohmann::json to_json() const;
  static CriticConfig from_json(const nlohmann::json& j);

 private:
  static int half(int v) { return (v + 1) / 2; }
};

/// Image-conditioned label critic: three blocks of (3x3 conv, relu, 3x3 conv,
/// relu, 2x2 max-pool), flatten, three relu dense layers and a tanh output.
template <typename T>
class Critic {
 public:
  Critic() = default;
  explicit Critic(const CriticConfig& cfg, std::uint64_t seed = 0);

  struct Cache {
    std::array<nn::Tensor<T>, 3> in, a, b;
    std::array<nn::MaxPoolResult<T>, 3> pool;
    std::array<nn::Tensor<T>, 3> hidden;
    nn::Tensor<T> score;  // (n, 1, 1, 1), after tanh
  };

  /// Scores for an (n, 9, R, A) batch. Throws ShapeMismatch on other sizes.
  std::vector<T> forward(const nn::Tensor<T>& x, Cache* cache = nullptr) const;

  /// Back-propagates per-sample score gradients through a cached forward
  /// pass, accumulating parameter gradients. Returns the input gradient when
  /// `input_grad` is set.
  nn::Tensor<T> backward(const Cache& cache, std::span<const T> dscore, bool input_grad);

  /// Input gradient of sum_n w_n f(x_n) without touching parameter gradients.
  nn::Tensor<T> input_gradient(const nn::Tensor<T>& x, std::span<const T> weights) const;

  std::vector<nn::Parameter<T>*> parameters();
  [[nodiscard]] std::vector<const nn::Parameter<T>*> parameters() const;
  [[nodiscard]] std::size_t parameter_count() const;
  void zero_grad();
  /// Zeroes the output layer so every score is tanh(0) = 0.
  void zero_output_layer();

  [[nodiscard]] const CriticConfig& config() const { return cfg_; }

  template <typename U>
  [[nodiscard]] Critic<U> cast() const;

 private:
  template <typename>
  friend class Critic;

  CriticConfig cfg_;
  std::array<nn::Conv2d<T>, 3> conv_a_, conv_b_;
  std::array<nn::Dense<T>, 3> hidden_;
  nn::Dense<T> out_;
};

/// Closed-form parameter count of the architecture.
std::size_t critic_parameter_count(const CriticConfig& cfg);

/// Concatenates image channels and class probabilities into a
/// (n, 9, R, A) batch.
template <typename T>
nn::Tensor<T> critique_input(std::span<const PolarImage> images, std::span<const ProbMap> labels);
template <typename T>
nn::Tensor<T> critique_input(std::span<const PolarImage> images, std::span<const LabelMap> labels);

struct PenaltyResult {
  double value = 0.0;            // mean_n (||g_n|| - 1)^2
  std::vector<double> norms;     // ||g_n||
  nn::Tensor<double> gradients;  // g_n, shaped like the inputs
};

/// Gradient penalty at x_n = alpha_n real_n + (1 - alpha_n) fake_n.
/// `grad_fn(x)` must return the input gradient of the critic at each sample.
template <typename T, typename GradFn>
PenaltyResult gradient_penalty(const nn::Tensor<T>& real, const nn::Tensor<T>& fake, std::span<const double> alpha,
                               GradFn&& grad_fn) {
  if (!real.same_shape(fake)) throw std::invalid_argument("gradient_penalty: batch shapes differ");
  if (alpha.size() != static_cast<std::size_t>(real.n)) throw std::invalid_argument("gradient_penalty: one alpha per pair");
  nn::Tensor<T> x(real.n, real.c, real.h, real.w);
  for (int n = 0; n < real.n; ++n) {
    auto xs = x.sample(n);
    auto rs = real.sample(n);
    auto fs = fake.sample(n);
    for (std::size_t i = 0; i < xs.size(); ++i)
      xs[i] = static_cast<T>(alpha[n] * rs[i] + (1.0 - alpha[n]) * fs[i]);
  }
  const nn::Tensor<T> g = grad_fn(x);
  PenaltyResult out;
  out.gradients = g.template cast<double>();
  for (int n = 0; n < real.n; ++n) {
    double s = 0.0;
    for (T v : g.sample(n)) s += static_cast<double>(v) * static_cast<double>(v);
    out.norms.push_back(std::sqrt(s));
    out.value += (out.norms.back() - 1.0) * (out.norms.back() - 1.0);
  }
  if (real.n > 0) out.value /= real.n;
  return out;
}

/// L_AP = mean_n -f(image_n, yhat_n). Gradients reach yhat only; the critic
/// is read-only here.
template <typename T>
double ap_loss(const Critic<T>& critic, std::span<const PolarImage> images, std::span<const ProbMap> yhat,
               GradBatch* grad = nullptr);

struct CriticTrainConfig {
  int steps = 300;
  int batch_pairs = 8;
  double lr = 1e-4;
  double gp_weight = 10.0;
  double severity_high = 0.0;  // label degradation on the "good" side
  double severity_low = 0.5;   // label degradation on the "poor" side
  double fd_step = 1e-2;       // finite-difference step of the penalty's parameter gradient
  int log_every = 5;
  std::uint64_t seed = 0;
};

struct CriticLogEntry {
  int step = 0;
  double wasserstein = 0.0;  // mean f(high) - mean f(low) on the step's batch
  double penalty = 0.0;
  double loss = 0.0;
};

struct CriticTrainResult {
  Critic<float> critic;
  std::vector<CriticLogEntry> log;
};

/// Trains a critic to score the high-quality side above the low-quality side
/// of paired labels, with the gradient penalty. Every record needs labels.
/// Throws Divergence after 100 consecutive non-finite steps.
CriticTrainResult train_critic(std::span<const Record> data, const CriticConfig& arch, const CriticTrainConfig& cfg);

/// Scores hard label maps with their images, one score per pair.
std::vector<double> score_labels(const Critic<float>& critic, std::span<const PolarImage> images,
                                 std::span<const LabelMap> labels, int batch = 16);

/// Area under the ROC curve for "positives score higher"; ties count half.
double roc_auc(std::span<const double> positives, std::span<const double> negatives);

void save_critic(const std::filesystem::path& path, const Critic<float>& critic);
Critic<float> load_critic(const std::filesystem::path& path);

}  // namespace psoctseg
