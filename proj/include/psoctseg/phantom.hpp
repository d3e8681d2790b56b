#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "psoctseg/types.hpp"

namespace psoctseg {

using Range = std::pair<double, double>;
using IntRange = std::pair<int, int>;

/// Mean (intensity, birefringence, depolarization) per class, indexed by
/// class_index().
using ChannelContrast = std::array<std::array<float, kNumChannels>, kNumClasses>;

ChannelContrast default_channel_contrast();

struct PhantomConfig {
  int R = 64;
  int A = 128;
  Range lumen_radius_range{12.0, 22.0};
  Range intima_thickness_range{5.5, 9.0};
  Range media_thickness_range{6.0, 10.0};
  IntRange wedge_count_range{1, 3};
  double guidewire_probability = 0.8;
  double noise_level = 0.25;
  double shadow_attenuation = 0.15;
  double pixel_pitch_um = 4.2;
  ChannelContrast channel_contrast = default_channel_contrast();
  std::uint64_t seed = 0;

  /// Throws ConfigError when a range is empty or negative, or noise < 0.
  void validate() const;
};

struct Phantom {
  PolarImage image;
  LabelMap labels;
  AnnotationSet annotation;
};

/// Synthetic layered vessel cross-section. Contours are integer-valued, built
/// from a few low-order circular harmonics and then flattened to roots of the
/// 7-tap angular median so the label map is already a fixed point of the
/// post-processing smoother. Deterministic in `cfg.seed`.
///
/// Throws InfeasibleGeometry when the thickness ranges cannot fit inside R.
Phantom generate(const PhantomConfig& cfg);

/// Degraded copy of `labels`: every contour gets an independent per-A-line
/// radial jitter of up to 4*severity pixels and every wedge edge an angular
/// jitter of up to 3*severity A-lines. Ordering is clamped and the result is
/// re-rasterised. If the jittered map breaks a topology rule the jitter is
/// halved and retried. severity = 0 returns `labels` unchanged.
LabelMap perturb_labels(const LabelMap& labels, double severity, std::uint64_t seed);

}  // namespace psoctseg
