#include "psoctseg/critic.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <type_traits>

#include "psoctseg/errors.hpp"
#include "psoctseg/nn/checkpoint.hpp"
#include "psoctseg/nn/optim.hpp"
#include "psoctseg/phantom.hpp"

namespace psoctseg {

using nn::Tensor;

nlohmann::json CriticConfig::to_json() const {
  return {{"R", R}, {"A", A}, {"features", features}, {"dense", dense}};
}

CriticConfig CriticConfig::from_json(const nlohmann::json& j) {
  CriticConfig c;
  c.R = j.at("R").get<int>();
  c.A = j.at("A").get<int>();
  c.features = j.at("features").get<std::array<int, 3>>();
  c.dense = j.at("dense").get<std::array<int, 3>>();
  return c;
}

std::size_t critic_parameter_count(const CriticConfig& cfg) {
  std::size_t n = 0;
  int in = kCritiqueChannels;
  for (int f : cfg.features) {
    n += static_cast<std::size_t>(f) * in * 9 + f;
    n += static_cast<std::size_t>(f) * f * 9 + f;
    in = f;
  }
  std::size_t width = static_cast<std::size_t>(in) * cfg.pooled_R() * cfg.pooled_A();
  for (int d : cfg.dense) {
    n += width * d + d;
    width = d;
  }
  return n + width + 1;
}

template <typename T>
Critic<T>::Critic(const CriticConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.R < 1 || cfg.A < 1) throw ConfigError("critic: empty input size");
  std::mt19937_64 rng(seed);
  int in = kCritiqueChannels;
  for (int k = 0; k < 3; ++k) {
    const int f = cfg.features[k];
    const std::string block = "block" + std::to_string(k + 1);
    conv_a_[k] = nn::Conv2d<T>(block + ".conv1", in, f, 3);
    conv_b_[k] = nn::Conv2d<T>(block + ".conv2", f, f, 3);
    nn::glorot_uniform(conv_a_[k].weight, in * 9, f * 9, rng);
    nn::glorot_uniform(conv_b_[k].weight, f * 9, f * 9, rng);
    in = f;
  }
  int width = in * cfg.pooled_R() * cfg.pooled_A();
  for (int k = 0; k < 3; ++k) {
    hidden_[k] = nn::Dense<T>("dense" + std::to_string(k + 1), width, cfg.dense[k]);
    nn::glorot_uniform(hidden_[k].weight, width, cfg.dense[k], rng);
    width = cfg.dense[k];
  }
  out_ = nn::Dense<T>("output", width, 1);
  nn::glorot_uniform(out_.weight, width, 1, rng);
}

template <typename T>
std::vector<T> Critic<T>::forward(const Tensor<T>& x, Cache* cache) const {
  if (x.c != kCritiqueChannels || x.h != cfg_.R || x.w != cfg_.A)
    throw ShapeMismatch("critic: input must be (n, 9, " + std::to_string(cfg_.R) + ", " + std::to_string(cfg_.A) +
                        "), got (n, " + std::to_string(x.c) + ", " + std::to_string(x.h) + ", " +
                        std::to_string(x.w) + ")");
  Cache local;
  Cache& c = cache ? *cache : local;
  const Tensor<T>* h = &x;
  for (int k = 0; k < 3; ++k) {
    c.in[k] = *h;
    c.a[k] = nn::leaky_relu(conv_a_[k].forward(c.in[k]), T(0));
    c.b[k] = nn::leaky_relu(conv_b_[k].forward(c.a[k]), T(0));
    c.pool[k] = nn::max_pool2(c.b[k]);
    h = &c.pool[k].y;
  }
  for (int k = 0; k < 3; ++k) {
    c.hidden[k] = nn::leaky_relu(hidden_[k].forward(*h), T(0));
    h = &c.hidden[k];
  }
  c.score = nn::tanh_forward(out_.forward(*h));
  return {c.score.data.begin(), c.score.data.end()};
}

namespace {

// Shared reverse pass. With a const critic only input gradients flow.
template <typename T, typename Convs, typename Denses, typename Dense>
Tensor<T> critic_backprop(Convs& conv_a, Convs& conv_b, Denses& hidden, Dense& out,
                          const typename Critic<T>::Cache& c, std::span<const T> dscore, bool input_grad) {
  constexpr bool params = !std::is_const_v<Convs>;
  auto back = [](auto& layer, const Tensor<T>& x, const Tensor<T>& dy, bool need_input) {
    if constexpr (params) return layer.backward(x, dy, true, need_input);
    else return need_input ? layer.backward_input(x, dy) : Tensor<T>();
  };
  Tensor<T> g(c.score.n, 1, 1, 1);
  for (int n = 0; n < c.score.n; ++n) g.data[n] = dscore[n];
  g = nn::tanh_backward(c.score, g);
  g = back(out, c.hidden[2], g, true);
  for (int k = 2; k >= 0; --k) {
    g = nn::leaky_relu_backward(c.hidden[k], g, T(0));
    g = back(hidden[k], k == 0 ? c.pool[2].y : c.hidden[k - 1], g, true);
  }
  for (int k = 2; k >= 0; --k) {
    g = nn::max_pool2_backward(c.b[k], c.pool[k], g);
    g = nn::leaky_relu_backward(c.b[k], g, T(0));
    g = back(conv_b[k], c.a[k], g, true);
    g = nn::leaky_relu_backward(c.a[k], g, T(0));
    g = back(conv_a[k], c.in[k], g, k > 0 || input_grad);
  }
  return g;
}

}  // namespace

template <typename T>
Tensor<T> Critic<T>::backward(const Cache& cache, std::span<const T> dscore, bool input_grad) {
  return critic_backprop<T>(conv_a_, conv_b_, hidden_, out_, cache, dscore, input_grad);
}

template <typename T>
Tensor<T> Critic<T>::input_gradient(const Tensor<T>& x, std::span<const T> weights) const {
  Cache cache;
  forward(x, &cache);
  return critic_backprop<T>(conv_a_, conv_b_, hidden_, out_, cache, weights, true);
}

template <typename T>
std::vector<nn::Parameter<T>*> Critic<T>::parameters() {
  std::vector<nn::Parameter<T>*> p;
  for (int k = 0; k < 3; ++k)
    for (auto* l : {&conv_a_[k], &conv_b_[k]}) {
      p.push_back(&l->weight);
      p.push_back(&l->bias);
    }
  for (auto& l : hidden_) {
    p.push_back(&l.weight);
    p.push_back(&l.bias);
  }
  p.push_back(&out_.weight);
  p.push_back(&out_.bias);
  return p;
}

template <typename T>
std::vector<const nn::Parameter<T>*> Critic<T>::parameters() const {
  auto p = const_cast<Critic*>(this)->parameters();
  return {p.begin(), p.end()};
}

template <typename T>
std::size_t Critic<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

template <typename T>
void Critic<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
void Critic<T>::zero_output_layer() {
  std::fill(out_.weight.value.begin(), out_.weight.value.end(), T(0));
  std::fill(out_.bias.value.begin(), out_.bias.value.end(), T(0));
}

template <typename T>
template <typename U>
Critic<U> Critic<T>::cast() const {
  Critic<U> out(cfg_);
  auto src = parameters();
  auto dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value.assign(src[i]->value.begin(), src[i]->value.end());
  return out;
}

template class Critic<float>;
template class Critic<double>;
template Critic<double> Critic<float>::cast<double>() const;
template Critic<float> Critic<double>::cast<float>() const;

// ------------------------------------------------------------ inputs

namespace {

template <typename T>
Tensor<T> image_batch(std::span<const PolarImage> images) {
  if (images.empty()) return {};
  const int R = images[0].R, A = images[0].A;
  Tensor<T> x(static_cast<int>(images.size()), kCritiqueChannels, R, A);
  for (int n = 0; n < x.n; ++n) {
    if (images[n].R != R || images[n].A != A) throw ShapeMismatch("critique_input: image sizes differ");
    std::copy(images[n].data.begin(), images[n].data.end(), x.sample(n).begin());
  }
  return x;
}

}  // namespace

template <typename T>
Tensor<T> critique_input(std::span<const PolarImage> images, std::span<const ProbMap> labels) {
  if (images.size() != labels.size()) throw ShapeMismatch("critique_input: batch sizes differ");
  Tensor<T> x = image_batch<T>(images);
  for (int n = 0; n < x.n; ++n) {
    if (labels[n].R != x.h || labels[n].A != x.w) throw ShapeMismatch("critique_input: label shape differs");
    for (int r = 0; r < x.h; ++r)
      for (int a = 0; a < x.w; ++a)
        for (int c = 0; c < kNumClasses; ++c) x(n, kNumChannels + c, r, a) = static_cast<T>(labels[n].at(r, a, c));
  }
  return x;
}

template <typename T>
Tensor<T> critique_input(std::span<const PolarImage> images, std::span<const LabelMap> labels) {
  if (images.size() != labels.size()) throw ShapeMismatch("critique_input: batch sizes differ");
  Tensor<T> x = image_batch<T>(images);
  for (int n = 0; n < x.n; ++n) {
    if (labels[n].R != x.h || labels[n].A != x.w) throw ShapeMismatch("critique_input: label shape differs");
    for (int r = 0; r < x.h; ++r)
      for (int a = 0; a < x.w; ++a) x(n, kNumChannels + class_index(labels[n].at(r, a)), r, a) = T(1);
  }
  return x;
}

template Tensor<float> critique_input<float>(std::span<const PolarImage>, std::span<const ProbMap>);
template Tensor<double> critique_input<double>(std::span<const PolarImage>, std::span<const ProbMap>);
template Tensor<float> critique_input<float>(std::span<const PolarImage>, std::span<const LabelMap>);
template Tensor<double> critique_input<double>(std::span<const PolarImage>, std::span<const LabelMap>);

template <typename T>
double ap_loss(const Critic<T>& critic, std::span<const PolarImage> images, std::span<const ProbMap> yhat,
               GradBatch* grad) {
  const Tensor<T> x = critique_input<T>(images, yhat);
  typename Critic<T>::Cache cache;
  const auto scores = critic.forward(x, &cache);
  const int n = x.n;
  double loss = 0.0;
  for (T s : scores) loss -= static_cast<double>(s);
  loss /= std::max(1, n);
  if (grad) {
    grad->clear();
    const std::vector<T> w(n, static_cast<T>(-1.0 / n));
    const Tensor<T> dx = critic.input_gradient(x, w);
    for (int k = 0; k < n; ++k) {
      ProbMap g(x.h, x.w);
      for (int r = 0; r < x.h; ++r)
        for (int a = 0; a < x.w; ++a)
          for (int c = 0; c < kNumClasses; ++c) g.at(r, a, c) = static_cast<double>(dx(k, kNumChannels + c, r, a));
      grad->push_back(std::move(g));
    }
  }
  return loss;
}

template double ap_loss<float>(const Critic<float>&, std::span<const PolarImage>, std::span<const ProbMap>,
                               GradBatch*);
template double ap_loss<double>(const Critic<double>&, std::span<const PolarImage>, std::span<const ProbMap>,
                                GradBatch*);

// ------------------------------------------------------------ training

CriticTrainResult train_critic(std::span<const Record> data, const CriticConfig& arch, const CriticTrainConfig& cfg) {
  if (data.empty()) throw ConfigError("train_critic: no training records");
  for (const auto& r : data)
    if (!r.labels) throw ConfigError("train_critic: every record needs labels");
  if (cfg.batch_pairs < 1 || cfg.steps < 0) throw ConfigError("train_critic: invalid batch size or step count");

  CriticTrainResult res{Critic<float>(arch, cfg.seed), {}};
  Critic<float>& critic = res.critic;
  nn::RMSprop opt(critic.parameters(), {cfg.lr, 0.9, 1e-7});
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const int N = cfg.batch_pairs;
  const double h = cfg.fd_step;
  int bad_streak = 0;
  std::vector<PolarImage> images(N);
  std::vector<LabelMap> high(N), low(N);
  for (int step = 0; step < cfg.steps; ++step) {
    for (int n = 0; n < N; ++n) {
      const Record& rec = data[pick(rng)];
      images[n] = rec.image;
      high[n] = perturb_labels(*rec.labels, cfg.severity_high, rng());
      low[n] = perturb_labels(*rec.labels, cfg.severity_low, rng());
    }
    const Tensor<float> real = critique_input<float>(images, high);
    const Tensor<float> fake = critique_input<float>(images, low);
    std::vector<double> alpha(N);
    for (auto& a : alpha) a = u01(rng);
    const std::vector<float> ones(N, 1.0f);
    const PenaltyResult pen = gradient_penalty(real, fake, alpha, [&](const Tensor<float>& x) {
      return critic.input_gradient(x, ones);
    });

    // One pass over [real, fake, x~ + h v, x~ - h v]: the last two give the
    // parameter gradient of the directional derivative along v = g / |g|.
    const std::size_t S = real.sample_size();
    Tensor<float> big(4 * N, real.c, real.h, real.w);
    for (int n = 0; n < N; ++n) {
      std::copy(real.sample(n).begin(), real.sample(n).end(), big.sample(n).begin());
      std::copy(fake.sample(n).begin(), fake.sample(n).end(), big.sample(N + n).begin());
      const double norm = pen.norms[n];
      auto plus = big.sample(2 * N + n);
      auto minus = big.sample(3 * N + n);
      for (std::size_t i = 0; i < S; ++i) {
        const double xt = alpha[n] * real.data[n * S + i] + (1.0 - alpha[n]) * fake.data[n * S + i];
        const double v = norm > 0.0 ? pen.gradients.data[n * S + i] / norm : 0.0;
        plus[i] = static_cast<float>(xt + h * v);
        minus[i] = static_cast<float>(xt - h * v);
      }
    }
    Critic<float>::Cache cache;
    const auto scores = critic.forward(big, &cache);
    double w = 0.0;
    for (int n = 0; n < N; ++n) w += (scores[n] - scores[N + n]) / N;
    const double loss = -w + cfg.gp_weight * pen.value;

    if (!std::isfinite(loss)) {
      if (++bad_streak >= 100) throw Divergence("train_critic: 100 consecutive non-finite steps");
      continue;
    }
    bad_streak = 0;

    std::vector<float> dscore(4 * N, 0.0f);
    for (int n = 0; n < N; ++n) {
      dscore[n] = static_cast<float>(-1.0 / N);
      dscore[N + n] = static_cast<float>(1.0 / N);
      if (pen.norms[n] > 0.0) {
        const double c = cfg.gp_weight * 2.0 * (pen.norms[n] - 1.0) / N / (2.0 * h);
        dscore[2 * N + n] = static_cast<float>(c);
        dscore[3 * N + n] = static_cast<float>(-c);
      }
    }
    critic.zero_grad();
    critic.backward(cache, dscore, false);
    opt.step();

    if (cfg.log_every > 0 && ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.steps))
      res.log.push_back({step + 1, w, pen.value, loss});
  }
  return res;
}

std::vector<double> score_labels(const Critic<float>& critic, std::span<const PolarImage> images,
                                 std::span<const LabelMap> labels, int batch) {
  if (images.size() != labels.size()) throw ShapeMismatch("score_labels: batch sizes differ");
  std::vector<double> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += batch) {
    const std::size_t len = std::min<std::size_t>(batch, images.size() - start);
    const auto x = critique_input<float>(images.subspan(start, len), labels.subspan(start, len));
    for (float s : critic.forward(x)) out.push_back(s);
  }
  return out;
}

double roc_auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) throw std::invalid_argument("roc_auc: empty class");
  std::vector<std::pair<double, int>> all;
  all.reserve(positives.size() + negatives.size());
  for (double v : positives) all.emplace_back(v, 1);
  for (double v : negatives) all.emplace_back(v, 0);
  std::sort(all.begin(), all.end());
  // Mann-Whitney U with mid-ranks for ties.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum += mid;
    i = j;
  }
  const double np = static_cast<double>(positives.size()), nn_ = static_cast<double>(negatives.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn_);
}

void save_critic(const std::filesystem::path& path, const Critic<float>& critic) {
  nlohmann::json header = critic.config().to_json();
  header["kind"] = "critic";
  header["version"] = 1;
  header["input_channels"] = kCritiqueChannels;
  header["param_count"] = critic.parameter_count();
  nn::save_checkpoint(path, header, critic.parameters());
}

Critic<float> load_critic(const std::filesystem::path& path) {
  const auto ck = nn::read_checkpoint(path);
  if (ck.header.value("kind", "") != "critic") throw FormatError(path.string() + " is not a critic checkpoint");
  Critic<float> critic(CriticConfig::from_json(ck.header));
  nn::assign_parameters(ck, critic.parameters());
  return critic;
}

}  // namespace psoctseg
