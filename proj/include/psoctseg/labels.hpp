#pragma once

#include "psoctseg/types.hpp"

namespace psoctseg {

/// Rounds a real-valued contour to a radial index, half-up.
int rasterize_contour(double contour);

/// Rasterises boundary contours into exclusive labels. Along each A-line:
/// Lumen for r < lumen, Intima for lumen <= r < IEL, Media for IEL <= r < EEL,
/// Outside for r >= EEL. Inside a shadow wedge the span [lumen, EEL) takes the
/// wedge's shadow class. When wedges overlap the later one wins.
///
/// Throws ContourOrderViolation if lumen > IEL or IEL > EEL on any A-line,
/// OutOfBounds if a contour leaves [0, R] or a wedge index leaves [0, A).
LabelMap contours_to_labels(const AnnotationSet& ann, int R, int A);

/// Recovers contours and wedges from a label map. Exact inverse of
/// contours_to_labels on topology-valid maps for the lumen and EEL, and for
/// the IEL on wedge-free A-lines; inside wedges the IEL is not observable and
/// is placed at the EEL.
AnnotationSet labels_to_contours(const LabelMap& y);

}  // namespace psoctseg
