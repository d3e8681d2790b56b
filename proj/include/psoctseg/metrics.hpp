#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "psoctseg/postprocess.hpp"
#include "psoctseg/types.hpp"

namespace psoctseg {

/// counts[t][p]: pixels of true class index t predicted as class index p.
struct Confusion {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  void add(const LabelMap& y, const LabelMap& yhat, const std::vector<char>* exclude_alines = nullptr);
  Confusion& operator+=(const Confusion& o);

  [[nodiscard]] std::size_t total() const;
  [[nodiscard]] std::size_t true_count(int c) const;
  [[nodiscard]] std::size_t predicted_count(int c) const;
};

/// Mean over all six classes of (N - |Y_c xor Yhat_c|) / N.
double accuracy(const LabelMap& y, const LabelMap& yhat);
double accuracy(const Confusion& m);

/// 2 |Y_c and Yhat_c| / (|Y_c| + |Yhat_c|); nullopt when the class is absent
/// from both maps.
std::optional<double> class_dice(const Confusion& m, int c);
/// Mean of class_dice over the classes where it is defined; 1 if none is.
double dice_coef(const LabelMap& y, const LabelMap& yhat);
double dice_coef(const Confusion& m);

/// One-vs-rest rates; nullopt when the class (or its complement) is empty in
/// the ground truth.
struct Rates {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};
Rates sensitivity_specificity(const Confusion& m, int c);
Rates sensitivity_specificity(const LabelMap& y, const LabelMap& yhat, Label c);

/// Mean over `from` of the distance to `to`: the radial offset to the
/// nearest point of `to` on the same A-line when there is one, otherwise the
/// 2-D Euclidean nearest-neighbour distance. Pixels. Throws EmptyBoundary.
double ade_radial(const BoundarySet& from, const BoundarySet& to);
/// Mean 2-D Euclidean nearest-neighbour distance from `from` to `to` in pixel
/// coordinates, without angular wrap. Throws EmptyBoundary.
double ade_2d(const BoundarySet& from, const BoundarySet& to);
/// max(ade_2d(a, b), ade_2d(b, a)).
double mhd(const BoundarySet& a, const BoundarySet& b);

struct InterfaceMetrics {
  double ade_px = 0.0;          // ade_radial(pred, gt)
  double ade_reverse_px = 0.0;  // ade_radial(gt, pred)
  double ade2d_px = 0.0;        // ade_2d(pred, gt)
  double ade2d_reverse_px = 0.0;
  double mhd_px = 0.0;
};

struct FrameMetrics {
  std::string id;
  double pixel_pitch_um = 1.0;
  Confusion confusion;
  double accuracy = 0.0;
  double dice = 0.0;
  /// nullopt when the interface is missing from the ground truth or the
  /// prediction.
  std::array<std::optional<InterfaceMetrics>, 3> interfaces;
  TopologyReport topology;  // of the prediction
};

/// Metrics of one cross-section. A-lines flagged in `exclude_alines` are
/// left out of every pixel count and boundary set.
FrameMetrics evaluate_frame(const LabelMap& y, const LabelMap& yhat, double pixel_pitch_um, std::string id = {},
                            const std::vector<char>* exclude_alines = nullptr);

struct ClassReport {
  std::optional<double> sensitivity, specificity, dice;
  double accuracy = 0.0;  // one-vs-rest pixel accuracy
};

struct InterfaceReport {
  std::size_t frames = 0;  // frames where the interface is present on both sides
  std::size_t missing = 0;
  double ade_px = 0.0, ade_reverse_px = 0.0, ade2d_px = 0.0, mhd_px = 0.0;
  double ade_um = 0.0, mhd_um = 0.0;
};

/// Split-level summary. Pixel metrics pool the confusion counts of every
/// frame; distances are means over frames (and, for the aggregate MHD, over
/// interfaces too).
struct EvalReport {
  std::array<ClassReport, kNumClasses> classes;
  double accuracy = 0.0;
  double dice = 0.0;
  double mhd_px = 0.0;
  double mhd_um = 0.0;
  std::array<InterfaceReport, 3> interfaces;
  std::size_t frames = 0;
  std::size_t topology_valid = 0;
  bool excluded_alines = false;

  [[nodiscard]] nlohmann::json to_json() const;
};

EvalReport summarize(const std::vector<FrameMetrics>& frames);

/// One row per frame and interface.
void write_frame_csv(std::ostream& os, const std::vector<FrameMetrics>& frames);

/// A-lines where the ground-truth wall (lumen to EEL) is thicker than
/// `max_wall_px`.
std::vector<char> thick_wall_alines(const LabelMap& y, int max_wall_px);

}  // namespace psoctseg
