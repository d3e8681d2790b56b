#include <filesystem>
#include <random>

#include "doctest.h"

#include "../fd_helpers.hpp"
#include "../oracles.hpp"
#include "psoctseg/critic.hpp"
#include "psoctseg/errors.hpp"
#include "psoctseg/phantom.hpp"

using namespace psoctseg;
using nn::Tensor;

namespace {

std::vector<PolarImage> random_images(std::mt19937_64& rng, int n, int R, int A) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<PolarImage> out;
  for (int i = 0; i < n; ++i) {
    PolarImage im(R, A);
    for (auto& v : im.data) v = u(rng);
    out.push_back(im);
  }
  return out;
}

CriticConfig tiny(int R, int A) {
  CriticConfig c;
  c.R = R;
  c.A = A;
  c.features = {4, 6, 8};
  c.dense = {16, 8, 8};
  return c;
}

}  // namespace

TEST_CASE("critic output range and zero layer") {
  Critic<double> critic(tiny(8, 16), 3);
  std::mt19937_64 rng(1);
  Tensor<double> x(4, kCritiqueChannels, 8, 16);
  std::normal_distribution<double> g(0.0, 5.0);
  for (auto& v : x.data) v = g(rng);
  for (double s : critic.forward(x)) CHECK((s > -1.0 && s < 1.0));

  critic.zero_output_layer();
  Tensor<double> zero(2, kCritiqueChannels, 8, 16);
  for (double s : critic.forward(zero)) CHECK(s == 0.0);
  CHECK_THROWS_AS(critic.forward(Tensor<double>(1, 3, 8, 16)), ShapeMismatch);

  const auto imgs = random_images(rng, 2, 8, 16);
  std::vector<ProbMap> yhat{oracle::random_probs(rng, 8, 16), oracle::random_probs(rng, 8, 16)};
  GradBatch grad;
  CHECK(ap_loss(critic, std::span<const PolarImage>(imgs), yhat, &grad) == 0.0);
  for (const auto& m : grad)
    for (double v : m.probs) CHECK(v == 0.0);
}

TEST_CASE("critic parameter count") {
  CriticConfig cfg;  // 64 x 128 input, default widths
  // conv layers: k*k*in*out + out
  std::size_t expect = 0;
  int in = 9;
  for (int f : {32, 64, 128}) {
    expect += 9 * in * f + f;
    expect += 9 * f * f + f;
    in = f;
  }
  // 64x128 -> 32x64 -> 16x32 -> 8x16 after three pools
  int width = 128 * 8 * 16;
  for (int d : {1024, 256, 128}) {
    expect += static_cast<std::size_t>(width) * d + d;
    width = d;
  }
  expect += width + 1;
  CHECK(critic_parameter_count(cfg) == expect);
  CHECK(Critic<float>(tiny(64, 128)).parameter_count() == critic_parameter_count(tiny(64, 128)));
}

TEST_CASE("gradient penalty on linear critics") {
  for (double norm : {1.0, 3.0}) {
    Tensor<double> real(3, 2, 2, 2), fake(3, 2, 2, 2);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    for (auto& v : real.data) v = g(rng);
    for (auto& v : fake.data) v = g(rng);
    std::vector<double> w(real.sample_size());
    double s = 0;
    for (auto& v : w) s += (v = g(rng)) * v;
    for (auto& v : w) v *= norm / std::sqrt(s);
    const std::vector<double> alpha{0.1, 0.5, 0.9};
    const auto pen = gradient_penalty(real, fake, std::span<const double>(alpha), [&](const Tensor<double>& x) {
      Tensor<double> out(x.n, x.c, x.h, x.w);
      for (int n = 0; n < x.n; ++n) std::copy(w.begin(), w.end(), out.sample(n).begin());
      return out;
    });
    CHECK(pen.value == doctest::Approx((norm - 1) * (norm - 1)).epsilon(1e-12));
  }
}

TEST_CASE("penalty norms agree with finite differences") {
  Critic<double> critic(tiny(8, 8), 7);
  std::mt19937_64 rng(3);
  Tensor<double> real(2, kCritiqueChannels, 8, 8), fake(2, kCritiqueChannels, 8, 8);
  std::uniform_real_distribution<double> u;
  for (auto& v : real.data) v = u(rng);
  for (auto& v : fake.data) v = u(rng);
  const std::vector<double> alpha{0.3, 0.6};
  const auto pen = gradient_penalty(real, fake, std::span<const double>(alpha), [&](const Tensor<double>& x) {
    return critic.input_gradient(x, std::vector<double>(x.n, 1.0));
  });
  for (int n = 0; n < 2; ++n) {
    Tensor<double> x(1, kCritiqueChannels, 8, 8);
    for (std::size_t i = 0; i < x.data.size(); ++i)
      x.data[i] = alpha[n] * real.sample(n)[i] + (1 - alpha[n]) * fake.sample(n)[i];
    double s = 0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      const double d = oracle::central_diff([&] { return critic.forward(x)[0]; }, x.data[i], 1e-6);
      s += d * d;
    }
    CHECK(oracle::rel_err(std::sqrt(s), pen.norms[n]) < 1e-3);
  }
}

TEST_CASE("ap_loss gradient") {
  Critic<double> critic(tiny(4, 8), 11);
  std::mt19937_64 rng(4);
  const auto imgs = random_images(rng, 2, 4, 8);
  std::vector<ProbMap> yhat{oracle::random_probs(rng, 4, 8), oracle::random_probs(rng, 4, 8)};
  GradBatch grad;
  const double v = ap_loss(critic, std::span<const PolarImage>(imgs), yhat, &grad);
  CHECK((v > -1 && v < 1));
  int checked = 0;
  for (std::size_t i = 0; i < yhat[0].probs.size(); i += 3)
    for (std::size_t n = 0; n < 2; ++n) {
      if (!fdcheck::ap_pattern_stable(critic, std::span<const PolarImage>(imgs), yhat, n, i, 1e-5)) continue;
      const double fd = oracle::central_diff(
          [&] { return ap_loss(critic, std::span<const PolarImage>(imgs), yhat); }, yhat[n].probs[i], 1e-5);
      CHECK(oracle::rel_err(grad[n].probs[i], fd, 1e-6) < 1e-4);
      ++checked;
    }
  CHECK(checked > 50);
}

TEST_CASE("roc auc") {
  const std::vector<double> pos{3, 4, 5}, neg{0, 1, 2};
  CHECK(roc_auc(pos, neg) == 1.0);
  CHECK(roc_auc(neg, pos) == 0.0);
  const std::vector<double> same{1, 1};
  CHECK(roc_auc(same, same) == 0.5);
}

TEST_CASE("short critic training and checkpoint round trip") {
  std::vector<Record> data;
  for (int i = 0; i < 6; ++i) {
    PhantomConfig cfg;
    cfg.R = 32;
    cfg.A = 64;
    cfg.lumen_radius_range = {6, 10};
    cfg.intima_thickness_range = {5.5, 6.5};
    cfg.media_thickness_range = {5, 6};
    cfg.seed = i;
    const auto ph = generate(cfg);
    data.push_back({ph.image, ph.labels, "p" + std::to_string(i)});
  }
  CriticTrainConfig tc;
  tc.steps = 4;
  tc.batch_pairs = 2;
  const auto res = train_critic(data, tiny(32, 64), tc);
  CHECK_FALSE(res.log.empty());
  const auto path = std::filesystem::temp_directory_path() / "psoctseg_critic_test.ckpt";
  save_critic(path, res.critic);
  const auto back = load_critic(path);
  std::vector<PolarImage> im{data[0].image};
  std::vector<LabelMap> y{*data[0].labels};
  CHECK(score_labels(back, im, y) == score_labels(res.critic, im, y));
  std::filesystem::remove(path);
}
