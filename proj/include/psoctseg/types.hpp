#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace psoctseg {

inline constexpr int kNumClasses = 6;
inline constexpr int kNumChannels = 3;

/// Exclusive class codes, stored on disk as these integers.
enum class Label : std::uint8_t {
  Outside = 1,
  Lumen = 2,
  Intima = 3,
  Media = 4,
  GShadow = 5,
  PShadow = 6,
};

/// Zero-based channel index of a label in one-hot and probability fields.
constexpr int class_index(Label l) { return static_cast<int>(l) - 1; }
constexpr Label label_from_index(int c) { return static_cast<Label>(c + 1); }
constexpr bool is_shadow(Label l) { return l == Label::GShadow || l == Label::PShadow; }
std::string_view label_name(Label l);

enum class Channel : int { Intensity = 0, Birefringence = 1, Depolarization = 2 };

/// Three-channel polar cross-section, R radial samples by A A-lines.
/// Storage is channel-major, then radial, then angular.
struct PolarImage {
  int R = 0;
  int A = 0;
  double pixel_pitch_um = 1.0;
  std::vector<float> data;

  PolarImage() = default;
  PolarImage(int r, int a, double pitch = 1.0)
      : R(r), A(a), pixel_pitch_um(pitch), data(static_cast<std::size_t>(kNumChannels) * r * a, 0.0f) {}

  float& at(int c, int r, int a) { return data[(static_cast<std::size_t>(c) * R + r) * A + a]; }
  [[nodiscard]] float at(int c, int r, int a) const { return data[(static_cast<std::size_t>(c) * R + r) * A + a]; }
  float& at(Channel c, int r, int a) { return at(static_cast<int>(c), r, a); }
  [[nodiscard]] float at(Channel c, int r, int a) const { return at(static_cast<int>(c), r, a); }

  /// Throws std::invalid_argument when a structural invariant is broken.
  void validate() const;
};

/// Per-pixel exclusive class map.
struct LabelMap {
  int R = 0;
  int A = 0;
  std::vector<std::uint8_t> codes;

  LabelMap() = default;
  LabelMap(int r, int a, Label fill = Label::Outside)
      : R(r), A(a), codes(static_cast<std::size_t>(r) * a, static_cast<std::uint8_t>(fill)) {}

  [[nodiscard]] Label at(int r, int a) const { return static_cast<Label>(codes[static_cast<std::size_t>(r) * A + a]); }
  void set(int r, int a, Label l) { codes[static_cast<std::size_t>(r) * A + a] = static_cast<std::uint8_t>(l); }
  [[nodiscard]] std::size_t size() const { return codes.size(); }

  /// Binary (R, A, 6) field, pixel-major.
  [[nodiscard]] std::vector<double> one_hot() const;
  [[nodiscard]] std::array<std::size_t, kNumClasses> class_counts() const;

  void validate() const;
  bool operator==(const LabelMap&) const = default;
};

/// Per-pixel categorical distribution over the six classes, pixel-major:
/// probs[(r * A + a) * 6 + c].
struct ProbMap {
  int R = 0;
  int A = 0;
  std::vector<double> probs;

  ProbMap() = default;
  ProbMap(int r, int a) : R(r), A(a), probs(static_cast<std::size_t>(r) * a * kNumClasses, 0.0) {}

  double& at(int r, int a, int c) { return probs[(static_cast<std::size_t>(r) * A + a) * kNumClasses + c]; }
  [[nodiscard]] double at(int r, int a, int c) const {
    return probs[(static_cast<std::size_t>(r) * A + a) * kNumClasses + c];
  }
  [[nodiscard]] std::size_t pixels() const { return static_cast<std::size_t>(R) * A; }

  static ProbMap from_labels(const LabelMap& y);
  /// Hard argmax; ties resolve to the lowest class code.
  [[nodiscard]] LabelMap argmax() const;
  /// Throws std::invalid_argument unless each pixel is a distribution within `tol`.
  void validate(double tol = 1e-5) const;
};

enum class ShadowKind : std::uint8_t { Guidewire, Plaque };

constexpr Label shadow_label(ShadowKind k) { return k == ShadowKind::Guidewire ? Label::GShadow : Label::PShadow; }

/// Half-open circular angular range [a_start, a_end) of A-lines.
struct ShadowWedge {
  ShadowKind kind = ShadowKind::Guidewire;
  int a_start = 0;
  int a_end = 0;

  [[nodiscard]] bool contains(int a, int A) const;
  [[nodiscard]] int width(int A) const { return ((a_end - a_start) % A + A) % A; }
  bool operator==(const ShadowWedge&) const = default;
};

/// Boundary-contour annotation: per-A-line radial positions of the outer
/// lumen, IEL and EEL, plus shadow wedges.
struct AnnotationSet {
  std::vector<double> lumen;
  std::vector<double> iel;
  std::vector<double> eel;
  std::vector<ShadowWedge> wedges;

  [[nodiscard]] int A() const { return static_cast<int>(lumen.size()); }
};

}  // namespace psoctseg
