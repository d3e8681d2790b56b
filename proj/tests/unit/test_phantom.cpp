#include <cmath>
#include <random>

#include "doctest.h"

#include "psoctseg/errors.hpp"
#include "psoctseg/metrics.hpp"
#include "psoctseg/phantom.hpp"
#include "psoctseg/postprocess.hpp"

using namespace psoctseg;

TEST_CASE("phantoms are deterministic") {
  PhantomConfig cfg;
  cfg.seed = 42;
  const auto a = generate(cfg), b = generate(cfg);
  CHECK(a.image.data == b.image.data);
  CHECK(a.labels == b.labels);
  cfg.seed = 43;
  CHECK_FALSE(generate(cfg).labels == a.labels);
}

TEST_CASE("noise-free phantom is separable by nearest class mean") {
  PhantomConfig cfg;
  cfg.noise_level = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    cfg.seed = s;
    const auto ph = generate(cfg);
    const auto& mu = cfg.channel_contrast;
    for (int r = 0; r < cfg.R; ++r)
      for (int a = 0; a < cfg.A; ++a) {
        int best = 0;
        double best_d = 1e30;
        for (int c = 0; c < kNumClasses; ++c) {
          double d = 0;
          for (int ch = 0; ch < kNumChannels; ++ch) d += std::pow(ph.image.at(ch, r, a) - mu[c][ch], 2);
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        REQUIRE(label_from_index(best) == ph.labels.at(r, a));
      }
  }
}

TEST_CASE("phantom invariants over random configs") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> ra(0, 2);
  for (int t = 0; t < 100; ++t) {
    PhantomConfig cfg;
    cfg.seed = rng();
    cfg.A = 64 << ra(rng);
    cfg.noise_level = 0.5 * ra(rng);
    const auto ph = generate(cfg);
    CHECK_NOTHROW(ph.image.validate());
    ph.labels.validate();
    REQUIRE(verify_topology(ph.labels).valid());
    for (int r = 0; r < cfg.R; ++r)
      for (int a = 0; a < cfg.A; ++a) {
        const float d = ph.image.at(Channel::Depolarization, r, a);
        REQUIRE((d >= 0.0f && d <= 1.0f));
      }
  }
}

TEST_CASE("phantom config validation") {
  PhantomConfig cfg;
  cfg.R = 20;
  cfg.lumen_radius_range = {15, 18};
  CHECK_THROWS_AS(generate(cfg), InfeasibleGeometry);
  PhantomConfig neg;
  neg.noise_level = -1;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
}

TEST_CASE("perturbed labels") {
  PhantomConfig cfg;
  cfg.seed = 5;
  const auto ph = generate(cfg);
  CHECK(perturb_labels(ph.labels, 0.0, 1) == ph.labels);
  double moved = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto y = perturb_labels(ph.labels, s % 2 ? 1.0 : 0.5, s);
    REQUIRE(verify_topology(y).valid());
    if (s % 2) {
      const auto a = extract_boundary(ph.labels, Interface::OuterLumen);
      const auto b = extract_boundary(y, Interface::OuterLumen);
      moved += ade_radial(b, a);
    }
  }
  CHECK(moved > 0.0);
}
