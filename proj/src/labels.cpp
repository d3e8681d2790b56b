#include "psoctseg/labels.hpp"

#include <cmath>
#include <string>

#include "psoctseg/errors.hpp"

namespace psoctseg {

int rasterize_contour(double contour) { return static_cast<int>(std::floor(contour + 0.5)); }

LabelMap contours_to_labels(const AnnotationSet& ann, int R, int A) {
  if (ann.A() != A || static_cast<int>(ann.iel.size()) != A || static_cast<int>(ann.eel.size()) != A)
    throw ShapeMismatch("contours_to_labels: contour length differs from A");
  for (int a = 0; a < A; ++a) {
    const double l = ann.lumen[a], i = ann.iel[a], e = ann.eel[a];
    if (!(l <= i) || !(i <= e))
      throw ContourOrderViolation("contours_to_labels: lumen <= IEL <= EEL violated at A-line " + std::to_string(a));
    if (l < 0.0 || e > static_cast<double>(R))
      throw OutOfBounds("contours_to_labels: contour outside [0, R] at A-line " + std::to_string(a));
  }
  for (const auto& w : ann.wedges)
    if (w.a_start < 0 || w.a_start >= A || w.a_end < 0 || w.a_end >= A)
      throw OutOfBounds("contours_to_labels: wedge index outside [0, A)");

  LabelMap y(R, A);
  for (int a = 0; a < A; ++a) {
    const int l = rasterize_contour(ann.lumen[a]);
    const int i = rasterize_contour(ann.iel[a]);
    const int e = rasterize_contour(ann.eel[a]);
    Label shadow = Label::Outside;
    for (const auto& w : ann.wedges)
      if (w.contains(a, A)) shadow = shadow_label(w.kind);
    for (int r = 0; r < R; ++r) {
      Label c;
      if (r < l) c = Label::Lumen;
      else if (r >= e) c = Label::Outside;
      else if (shadow != Label::Outside) c = shadow;
      else c = r < i ? Label::Intima : Label::Media;
      y.set(r, a, c);
    }
  }
  return y;
}

AnnotationSet labels_to_contours(const LabelMap& y) {
  const int R = y.R, A = y.A;
  AnnotationSet ann;
  ann.lumen.resize(A);
  ann.iel.resize(A);
  ann.eel.resize(A);
  std::vector<int> shadow(A, 0);  // 0 none, else label code
  for (int a = 0; a < A; ++a) {
    int l = 0;
    while (l < R && y.at(l, a) == Label::Lumen) ++l;
    int e = R;
    while (e > l && y.at(e - 1, a) == Label::Outside) --e;
    int g = 0, p = 0;
    for (int r = l; r < e; ++r) {
      if (y.at(r, a) == Label::GShadow) ++g;
      if (y.at(r, a) == Label::PShadow) ++p;
    }
    int i = l;
    if (g + p > 0) {
      shadow[a] = static_cast<int>(g >= p ? Label::GShadow : Label::PShadow);
      i = e;
    } else {
      while (i < e && y.at(i, a) == Label::Intima) ++i;
    }
    ann.lumen[a] = l;
    ann.iel[a] = i;
    ann.eel[a] = e;
  }

  // Wedges are maximal circular runs of A-lines sharing a shadow kind.
  int seam = -1;
  for (int a = 0; a < A; ++a)
    if (shadow[a] != shadow[(a + A - 1) % A]) {
      seam = a;
      break;
    }
  if (seam < 0) {
    if (shadow[0] != 0) {
      // Every A-line shadowed by one kind: a full-circle wedge cannot be
      // expressed as a half-open range, so split it in two.
      const auto kind = shadow[0] == static_cast<int>(Label::GShadow) ? ShadowKind::Guidewire : ShadowKind::Plaque;
      ann.wedges.push_back({kind, 0, A / 2});
      ann.wedges.push_back({kind, A / 2, 0});
    }
    return ann;
  }
  for (int k = 0; k < A;) {
    const int a = (seam + k) % A;
    int len = 1;
    while (len < A - k && shadow[(a + len) % A] == shadow[a]) ++len;
    if (shadow[a] != 0) {
      const auto kind = shadow[a] == static_cast<int>(Label::GShadow) ? ShadowKind::Guidewire : ShadowKind::Plaque;
      ann.wedges.push_back({kind, a, (a + len) % A});
    }
    k += len;
  }
  return ann;
}

}  // namespace psoctseg
