#include "psoctseg/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace psoctseg {

std::string_view label_name(Label l) {
  switch (l) {
    case Label::Outside: return "Outside";
    case Label::Lumen: return "Lumen";
    case Label::Intima: return "Intima";
    case Label::Media: return "Media";
    case Label::GShadow: return "G-Shadow";
    case Label::PShadow: return "P-Shadow";
  }
  return "?";
}

void PolarImage::validate() const {
  if (R < 8 || A < 8) throw std::invalid_argument("PolarImage: R and A must be >= 8");
  if (data.size() != static_cast<std::size_t>(kNumChannels) * R * A)
    throw std::invalid_argument("PolarImage: payload size does not match shape");
  for (float v : data)
    if (!std::isfinite(v)) throw std::invalid_argument("PolarImage: non-finite value");
  for (int r = 0; r < R; ++r)
    for (int a = 0; a < A; ++a) {
      const float d = at(Channel::Depolarization, r, a);
      if (d < 0.0f || d > 1.0f) throw std::invalid_argument("PolarImage: depolarization outside [0, 1]");
    }
}

std::vector<double> LabelMap::one_hot() const {
  std::vector<double> out(codes.size() * kNumClasses, 0.0);
  for (std::size_t i = 0; i < codes.size(); ++i) out[i * kNumClasses + codes[i] - 1] = 1.0;
  return out;
}

std::array<std::size_t, kNumClasses> LabelMap::class_counts() const {
  std::array<std::size_t, kNumClasses> n{};
  for (auto c : codes) ++n[c - 1];
  return n;
}

void LabelMap::validate() const {
  if (codes.size() != static_cast<std::size_t>(R) * A) throw std::invalid_argument("LabelMap: size mismatch");
  for (auto c : codes)
    if (c < 1 || c > kNumClasses) throw std::invalid_argument("LabelMap: class code outside 1..6");
}

ProbMap ProbMap::from_labels(const LabelMap& y) {
  ProbMap p(y.R, y.A);
  for (std::size_t i = 0; i < y.codes.size(); ++i) p.probs[i * kNumClasses + y.codes[i] - 1] = 1.0;
  return p;
}

LabelMap ProbMap::argmax() const {
  LabelMap y(R, A);
  for (std::size_t i = 0; i < pixels(); ++i) {
    const double* p = probs.data() + i * kNumClasses;
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c)
      if (p[c] > p[best]) best = c;
    y.codes[i] = static_cast<std::uint8_t>(best + 1);
  }
  return y;
}

void ProbMap::validate(double tol) const {
  if (probs.size() != pixels() * kNumClasses) throw std::invalid_argument("ProbMap: size mismatch");
  for (std::size_t i = 0; i < pixels(); ++i) {
    double s = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      const double v = probs[i * kNumClasses + c];
      if (!(v >= 0.0)) throw std::invalid_argument("ProbMap: negative or NaN probability");
      s += v;
    }
    if (std::abs(s - 1.0) > tol) throw std::invalid_argument("ProbMap: pixel does not sum to 1");
  }
}

bool ShadowWedge::contains(int a, int A) const {
  const int off = ((a - a_start) % A + A) % A;
  return off < width(A);
}

}  // namespace psoctseg
