#include "psoctseg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "psoctseg/errors.hpp"

namespace psoctseg {

AugmentPlan sample_plan(std::uint64_t seed, int A, const AugmentRanges& ranges) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution include(ranges.probability);
  std::uniform_real_distribution<double> gain(ranges.gain_min, ranges.gain_max);
  std::uniform_real_distribution<double> offset(-ranges.offset_fraction, ranges.offset_fraction);
  std::uniform_real_distribution<double> zoom(ranges.zoom_min, ranges.zoom_max);
  std::uniform_int_distribution<int> shift(0, std::max(0, A - 1));

  AugmentPlan p;
  p.rotate = include(rng);
  p.mirror = include(rng);
  p.intensity = include(rng);
  p.scale = include(rng);
  // Parameters are drawn whether or not the transform is included so that
  // the random stream does not depend on the inclusion pattern.
  p.shift = shift(rng);
  for (int c = 0; c < kNumChannels; ++c) {
    p.gain[c] = gain(rng);
    p.offset[c] = offset(rng);
  }
  p.zoom = zoom(rng);
  return p;
}

namespace {

// Nearest-neighbour source row of output row r under zoom z.
int zoom_source(int r, double z) { return static_cast<int>(std::floor(r / z + 0.5)); }

int geometric_column(const AugmentPlan& p, int a, int A) {
  if (p.mirror) a = A - 1 - a;
  if (p.rotate) a = (a + p.shift) % A;
  return a;
}

}  // namespace

std::pair<PolarImage, LabelMap> apply(const AugmentPlan& plan, const PolarImage& image, const LabelMap& labels) {
  const int R = image.R, A = image.A;
  if (labels.R != R || labels.A != A) throw ShapeMismatch("augment: image and label shapes differ");
  PolarImage img = image;
  LabelMap lab = labels;

  if (plan.scale && plan.zoom != 1.0) {
    const double z = plan.zoom;
    for (int a = 0; a < A; ++a) {
      const bool had_outside = labels.at(R - 1, a) == Label::Outside;
      for (int r = 0; r < R; ++r) {
        const int src = std::min(zoom_source(r, z), R - 1);
        lab.set(r, a, labels.at(src, a));
        const double s = std::min(r / z, static_cast<double>(R - 1));
        const int s0 = static_cast<int>(std::floor(s));
        const int s1 = std::min(s0 + 1, R - 1);
        const double f = s - s0;
        for (int c = 0; c < kNumChannels; ++c)
          img.at(c, r, a) = static_cast<float>((1.0 - f) * image.at(c, s0, a) + f * image.at(c, s1, a));
      }
      if (had_outside && lab.at(R - 1, a) != Label::Outside)
        throw ScaleOutOfRange("augment: zoom " + std::to_string(z) + " pushes the EEL past R on A-line " +
                              std::to_string(a));
    }
  }

  if (plan.mirror || plan.rotate) {
    const PolarImage src_img = img;
    const LabelMap src_lab = lab;
    for (int a = 0; a < A; ++a) {
      const int to = geometric_column(plan, a, A);
      for (int r = 0; r < R; ++r) {
        lab.set(r, to, src_lab.at(r, a));
        for (int c = 0; c < kNumChannels; ++c) img.at(c, r, to) = src_img.at(c, r, a);
      }
    }
  }

  if (plan.intensity) {
    const std::size_t plane = static_cast<std::size_t>(R) * A;
    for (int c = 0; c < kNumChannels; ++c) {
      float* p = img.data.data() + c * plane;
      const auto [lo, hi] = std::minmax_element(p, p + plane);
      const double range = static_cast<double>(*hi - *lo);
      for (std::size_t i = 0; i < plane; ++i) {
        double v = plan.gain[c] * p[i] + plan.offset[c] * range;
        if (c == static_cast<int>(Channel::Depolarization)) v = std::clamp(v, 0.0, 1.0);
        p[i] = static_cast<float>(v);
      }
    }
  }
  return {std::move(img), std::move(lab)};
}

std::pair<PolarImage, LabelMap> apply_resampling(AugmentPlan plan, const PolarImage& image, const LabelMap& labels,
                                                 std::uint64_t seed, const AugmentRanges& ranges) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> zoom(ranges.zoom_min, std::max(ranges.zoom_min, 1.0));
  for (int attempt = 0;; ++attempt) {
    try {
      return apply(plan, image, labels);
    } catch (const ScaleOutOfRange&) {
      if (attempt >= 4) plan.scale = false;
      else plan.zoom = zoom(rng);
    }
  }
}

BoundarySet augment_boundary(const AugmentPlan& plan, const BoundarySet& b, int R, int A) {
  BoundarySet out = b;
  out.points.clear();
  for (const auto& p : b.points) {
    int r = p.r;
    if (plan.scale && plan.zoom != 1.0) {
      // first output row whose nearest-neighbour source is at or past p.r
      int q = 0;
      while (q < R && std::min(zoom_source(q, plan.zoom), R - 1) < p.r) ++q;
      if (q >= R) continue;
      r = q;
    }
    out.points.push_back({r, geometric_column(plan, p.a, A)});
  }
  std::sort(out.points.begin(), out.points.end());
  return out;
}

}  // namespace psoctseg
