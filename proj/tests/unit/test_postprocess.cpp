#include <random>

#include "doctest.h"

#include "../oracles.hpp"
#include "psoctseg/errors.hpp"
#include "psoctseg/labels.hpp"
#include "psoctseg/phantom.hpp"
#include "psoctseg/postprocess.hpp"

using namespace psoctseg;

namespace {

LabelMap layered(int R, int A) {
  AnnotationSet ann;
  ann.lumen.assign(A, 5);
  ann.iel.assign(A, 9);
  ann.eel.assign(A, 14);
  ann.wedges.push_back({ShadowKind::Guidewire, 3, 10});
  return contours_to_labels(ann, R, A);
}

ProbMap noisy(const LabelMap& y, std::mt19937_64& rng, double sd) {
  ProbMap p(y.R, y.A);
  std::normal_distribution<double> g(0.0, sd);
  for (int r = 0; r < y.R; ++r)
    for (int a = 0; a < y.A; ++a) {
      double z[kNumClasses], s = 0;
      for (int c = 0; c < kNumClasses; ++c) {
        z[c] = std::exp((c == class_index(y.at(r, a)) ? 2.0 : 0.0) + g(rng));
        s += z[c];
      }
      for (int c = 0; c < kNumClasses; ++c) p.at(r, a, c) = z[c] / s;
    }
  return p;
}

}  // namespace

TEST_CASE("topology counterexamples") {
  auto y = layered(24, 32);
  CHECK(verify_topology(y).valid());

  auto two = y;
  for (int a = 20; a < 23; ++a) two.set(12, a, Label::Lumen);  // detached lumen blob
  const auto t = verify_topology(two);
  CHECK_FALSE(t.lumen_single_component);
  CHECK_FALSE(t.valid());

  LabelMap bad(8, 4, Label::Lumen);
  for (int a = 0; a < 4; ++a) {
    bad.set(2, a, Label::Media);
    bad.set(3, a, Label::Intima);
    for (int r = 4; r < 8; ++r) bad.set(r, a, Label::Outside);
  }
  CHECK_FALSE(verify_topology(bad).layer_order_valid);
}

TEST_CASE("clean keeps a valid hard map") {
  const auto y = layered(24, 32);
  CHECK(clean(ProbMap::from_labels(y)) == y);
}

TEST_CASE("clean output is valid and idempotent") {
  std::mt19937_64 rng(21);
  const auto base = layered(24, 32);
  for (int t = 0; t < 60; ++t) {
    const ProbMap p = t % 3 == 0 ? oracle::random_probs(rng, 24, 32, 1.5) : noisy(base, rng, 0.6 + 0.1 * (t % 7));
    const auto z = clean(p);
    const auto rep = verify_topology(z);
    REQUIRE(rep.valid());
    CHECK(clean_labels(z) == z);
  }
}

TEST_CASE("no lumen gives an all-outside map") {
  LabelMap y(16, 16, Label::Media);
  const auto z = clean_labels(y);
  CHECK(z == LabelMap(16, 16, Label::Outside));
}

TEST_CASE("small corruptions of phantom labels are undone") {
  int ok = 0;
  const int N = 40;
  for (int s = 0; s < N; ++s) {
    PhantomConfig cfg;
    cfg.seed = 700 + s;
    const auto ph = generate(cfg);
    std::mt19937_64 rng(s);
    auto y = ph.labels;
    std::uniform_int_distribution<std::size_t> pix(0, y.size() - 1);
    std::uniform_int_distribution<int> shift(1, 5);
    for (int k = 0; k < 3; ++k) {
      auto& c = y.codes[pix(rng)];
      c = static_cast<std::uint8_t>((c - 1 + shift(rng)) % 6 + 1);
    }
    ok += clean_labels(y) == ph.labels;
  }
  CHECK(ok >= N - 2);
}

TEST_CASE("angular mode filter") {
  LabelMap y(1, 9, Label::Lumen);
  y.set(0, 4, Label::Media);
  CHECK(angular_mode_filter(y, 2) == LabelMap(1, 9, Label::Lumen));
  // a 2-vs-3 split is not a clear enough majority to flip the centre
  LabelMap z(1, 5, Label::Lumen);
  z.set(0, 0, Label::Media);
  z.set(0, 1, Label::Media);
  CHECK(angular_mode_filter(z, 2) == z);
}

TEST_CASE("boundary extraction") {
  AnnotationSet ann;
  const int R = 20, A = 12;
  for (int a = 0; a < A; ++a) {
    ann.lumen.push_back(3 + a % 3);
    ann.iel.push_back(8 + a % 2);
    ann.eel.push_back(13 + a % 4);
  }
  ann.wedges.push_back({ShadowKind::Plaque, 9, 11});
  const auto y = contours_to_labels(ann, R, A);
  const auto lum = extract_boundary(y, Interface::OuterLumen);
  const auto iel = extract_boundary(y, Interface::OuterIntima);
  for (int a = 0; a < A; ++a) {
    const bool in_wedge = a == 9 || a == 10;
    CHECK(std::count(lum.points.begin(), lum.points.end(), BoundaryPoint{static_cast<int>(ann.lumen[a]), a}) == 1);
    if (!in_wedge)
      CHECK(std::count(iel.points.begin(), iel.points.end(), BoundaryPoint{static_cast<int>(ann.iel[a]), a}) == 1);
  }
  for (Interface i : kInterfaces) CHECK_THROWS_AS(extract_boundary(LabelMap(5, 5), i), MissingInterface);

  std::mt19937_64 rng(22);
  for (int t = 0; t < 30; ++t) {
    const auto yy = oracle::random_labels(rng, 16, 12);
    for (Interface i : kInterfaces) {
      auto expect = oracle::scan_boundary(yy, i);
      if (expect.empty()) {
        CHECK_THROWS_AS(extract_boundary(yy, i), MissingInterface);
        continue;
      }
      auto got = extract_boundary(yy, i).points;
      std::sort(expect.begin(), expect.end());
      std::sort(got.begin(), got.end());
      CHECK(got == expect);
    }
  }
}
