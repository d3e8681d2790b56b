#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "psoctseg/postprocess.hpp"
#include "psoctseg/types.hpp"

namespace psoctseg {

struct AugmentRanges {
  double probability = 0.5;  // inclusion probability of each transform
  double gain_min = 0.8;
  double gain_max = 1.25;
  double offset_fraction = 0.1;  // offset limit as a fraction of the channel range
  double zoom_min = 0.9;
  double zoom_max = 1.1;
};

struct AugmentPlan {
  bool rotate = false;
  int shift = 0;  // A-lines, in [0, A)
  bool mirror = false;
  bool intensity = false;
  std::array<double, kNumChannels> gain{1.0, 1.0, 1.0};
  std::array<double, kNumChannels> offset{0.0, 0.0, 0.0};  // fraction of channel range
  bool scale = false;
  double zoom = 1.0;

  [[nodiscard]] bool empty() const { return !rotate && !mirror && !intensity && !scale; }
};

/// Each transform is included independently with `ranges.probability`; its
/// parameters are uniform over the configured ranges. Deterministic in seed.
AugmentPlan sample_plan(std::uint64_t seed, int A, const AugmentRanges& ranges = {});

/// Applies radial zoom, mirror, rotation and intensity change in that order.
/// Rotation is a circular shift of whole A-lines, mirroring reverses the
/// A-line index, zoom resamples each A-line about r = 0 (nearest neighbour for
/// labels, linear for the image). Intensity changes touch only the image;
/// depolarization stays clamped to [0, 1].
///
/// Throws ScaleOutOfRange if the zoom pushes the outer media boundary past
/// the last radial sample on some A-line.
std::pair<PolarImage, LabelMap> apply(const AugmentPlan& plan, const PolarImage& image, const LabelMap& labels);

/// apply(), redrawing the zoom factor up to four times on ScaleOutOfRange and
/// then dropping the zoom.
std::pair<PolarImage, LabelMap> apply_resampling(AugmentPlan plan, const PolarImage& image, const LabelMap& labels,
                                                 std::uint64_t seed, const AugmentRanges& ranges = {});

/// Maps a boundary set through the geometric part of the plan, using the same
/// nearest-neighbour radial rule as apply().
BoundarySet augment_boundary(const AugmentPlan& plan, const BoundarySet& b, int R, int A);

}  // namespace psoctseg
