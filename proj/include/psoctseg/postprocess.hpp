#pragma once

#include <array>
#include <optional>
#include <vector>

#include "psoctseg/types.hpp"

namespace psoctseg {

/// Outcome of the topology rules. Connectivity uses 4-neighbourhoods with the
/// angular axis wrapping; a "void" is a component of the complement that
/// touches neither the first nor the last radial row.
struct TopologyReport {
  bool lumen_single_component = true;
  bool gshadow_single_component = true;
  bool outside_single_component = true;
  bool shadows_confined = true;
  bool layer_order_valid = true;
  std::vector<int> shadow_violations;  // A-lines with a misplaced shadow
  std::vector<int> order_violations;   // shadow-free A-lines out of order

  [[nodiscard]] bool valid() const {
    return lumen_single_component && gshadow_single_component && outside_single_component && shadows_confined &&
           layer_order_valid;
  }
};

/// True when `y` has at most one 4-connected component of `cls` and that
/// component encloses no void.
bool single_component_without_voids(const LabelMap& y, Label cls);

TopologyReport verify_topology(const LabelMap& y);

struct CleanOptions {
  int min_object_px = 16;
  int smooth_radius = 3;
  int max_iterations = 8;

  /// Defaults scaled from the 64x128 reference grid: object size with image
  /// area, smoothing radius with the A-line count.
  static CleanOptions for_grid(int R, int A);
};

/// Hard labels from `yhat` followed by the topology clean-up: small-object
/// removal, void filling, angular interface smoothing, largest-component
/// rules, then per-A-line projection onto the nearest valid layer sequence
/// (which also completes shadow wedges). The sequence repeats until the map
/// stops changing or `max_iterations` is hit; the result always passes
/// verify_topology. A map without lumen pixels comes back all Outside.
LabelMap clean(const ProbMap& yhat, const CleanOptions& opts = {});
LabelMap clean_labels(const LabelMap& y, const CleanOptions& opts = {});

/// Majority filter along the angular axis with window 2*radius+1. The centre
/// pixel only changes when another class out-votes its own class by two.
LabelMap angular_mode_filter(const LabelMap& y, int radius);

// ------------------------------------------------------------ boundaries

enum class Interface { OuterLumen = 0, OuterIntima = 1, OuterMedia = 2 };
inline constexpr std::array<Interface, 3> kInterfaces = {Interface::OuterLumen, Interface::OuterIntima,
                                                         Interface::OuterMedia};
const char* interface_name(Interface i);

struct BoundaryPoint {
  int r = 0;
  int a = 0;
  bool operator==(const BoundaryPoint&) const = default;
  auto operator<=>(const BoundaryPoint&) const = default;
};

/// Pixels where a radial class transition occurs for one interface. The
/// radial coordinate is that of the first pixel past the boundary, which
/// equals the rasterised contour.
struct BoundarySet {
  Interface iface = Interface::OuterLumen;
  double pixel_pitch_um = 1.0;
  std::vector<BoundaryPoint> points;  // sorted by (r, a)
};

/// Transition rule per interface at pixel (r, a) with predecessor (r-1, a):
///   outer lumen  Lumen -> anything else
///   outer intima {Lumen, Intima} -> {Media, Outside}
///   outer media  {Lumen, Intima, Media} -> Outside
/// Throws MissingInterface when no A-line carries the interface.
BoundarySet extract_boundary(const LabelMap& y, Interface iface, double pixel_pitch_um = 1.0);

/// All three interfaces; an absent interface is returned as nullopt.
std::array<std::optional<BoundarySet>, 3> extract_boundaries(const LabelMap& y, double pixel_pitch_um = 1.0);

}  // namespace psoctseg
