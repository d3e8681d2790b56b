#include "psoctseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "psoctseg/errors.hpp"
#include "psoctseg/labels.hpp"
#include "psoctseg/postprocess.hpp"

namespace psoctseg {

ChannelContrast default_channel_contrast() {
  ChannelContrast c{};
  c[class_index(Label::Outside)] = {0.45f, 0.45f, 0.30f};
  c[class_index(Label::Lumen)] = {0.05f, 0.00f, 0.05f};
  c[class_index(Label::Intima)] = {0.80f, 0.25f, 0.15f};
  c[class_index(Label::Media)] = {0.50f, 0.80f, 0.10f};
  c[class_index(Label::GShadow)] = {0.10f, 0.05f, 0.60f};
  c[class_index(Label::PShadow)] = {0.30f, 0.10f, 0.85f};
  return c;
}

namespace {

// Peak-to-peak budget of the harmonic terms, per contour.
constexpr std::array<double, 3> kLumenHarmonics = {1.0, 0.4, 0.2};
constexpr std::array<double, 3> kLayerHarmonics = {0.4, 0.2, 0.1};
constexpr int kMinLayerPx = 3;

double harmonic_budget(const std::array<double, 3>& h) { return h[0] + h[1] + h[2]; }

void check_range(const Range& r, const char* name) {
  if (!(r.first >= 0.0) || !(r.first <= r.second))
    throw ConfigError(std::string("phantom: invalid ") + name + " range");
}

std::vector<double> harmonic_contour(double base, const std::array<double, 3>& amp, int A, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> out(A, base);
  for (int k = 1; k <= 3; ++k) {
    const double a = amp[k - 1] * u01(rng);
    const double phase = 2.0 * std::numbers::pi * u01(rng);
    for (int j = 0; j < A; ++j) out[j] += a * std::cos(2.0 * std::numbers::pi * k * j / A + phase);
  }
  return out;
}

// Iterates a circular running median until nothing changes.
std::vector<int> median_root(std::vector<int> v, int radius) {
  const int A = static_cast<int>(v.size());
  std::vector<int> next(A), window(2 * radius + 1);
  for (int it = 0; it < 200; ++it) {
    for (int a = 0; a < A; ++a) {
      for (int d = -radius; d <= radius; ++d) window[d + radius] = v[(a + d + A) % A];
      std::nth_element(window.begin(), window.begin() + radius, window.end());
      next[a] = window[radius];
    }
    if (next == v) break;
    v.swap(next);
  }
  return v;
}

std::vector<int> rounded(const std::vector<double>& v) {
  std::vector<int> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return rasterize_contour(x); });
  return out;
}

std::vector<ShadowWedge> sample_wedges(const PhantomConfig& cfg, std::mt19937_64& rng) {
  const int A = cfg.A;
  const int min_w = 7;
  const int gap = std::max(7, A / 18);
  std::uniform_int_distribution<int> count(cfg.wedge_count_range.first, cfg.wedge_count_range.second);
  std::bernoulli_distribution guidewire(cfg.guidewire_probability);
  const int n = count(rng);

  std::vector<ShadowWedge> out;
  std::vector<std::pair<int, int>> taken;  // (start, width)
  for (int k = 0; k < n; ++k) {
    const bool gw = k == 0 && guidewire(rng);
    const int lo = std::max(min_w, gw ? A * 6 / 100 : A * 8 / 100);
    const int hi = std::max(lo, gw ? A * 12 / 100 : A * 20 / 100);
    std::uniform_int_distribution<int> width(lo, hi);
    std::uniform_int_distribution<int> start(0, A - 1);
    for (int attempt = 0; attempt < 50; ++attempt) {
      const int w = width(rng), s = start(rng);
      bool clear = true;
      for (const auto& [ts, tw] : taken) {
        // circular distance between the two intervals, padded by the gap
        const int d1 = ((ts - (s + w)) % A + A) % A;
        const int d2 = ((s - (ts + tw)) % A + A) % A;
        if (d1 < gap || d2 < gap || d1 + d2 + w + tw != A) clear = false;
      }
      if (w + gap > A) clear = false;
      if (!clear) continue;
      taken.emplace_back(s, w);
      out.push_back({gw ? ShadowKind::Guidewire : ShadowKind::Plaque, s, (s + w) % A});
      break;
    }
  }
  return out;
}

}  // namespace

void PhantomConfig::validate() const {
  if (R < 8 || A < 8) throw ConfigError("phantom: R and A must be at least 8");
  check_range(lumen_radius_range, "lumen_radius");
  check_range(intima_thickness_range, "intima_thickness");
  check_range(media_thickness_range, "media_thickness");
  if (wedge_count_range.first < 0 || wedge_count_range.first > wedge_count_range.second)
    throw ConfigError("phantom: invalid wedge_count range");
  if (!(noise_level >= 0.0)) throw ConfigError("phantom: noise_level must be >= 0");
  if (!(shadow_attenuation >= 0.0)) throw ConfigError("phantom: shadow_attenuation must be >= 0");
}

Phantom generate(const PhantomConfig& cfg) {
  cfg.validate();
  const int R = cfg.R, A = cfg.A;
  const double lumen_slack = harmonic_budget(kLumenHarmonics);
  const double layer_slack = harmonic_budget(kLayerHarmonics);
  if (cfg.lumen_radius_range.first - lumen_slack < 1.0 ||
      cfg.intima_thickness_range.first - layer_slack - 1.0 < kMinLayerPx ||
      cfg.media_thickness_range.first - layer_slack - 1.0 < kMinLayerPx)
    throw InfeasibleGeometry("phantom: minimum radius or thickness too small for the contour ripple");
  if (cfg.lumen_radius_range.second + cfg.intima_thickness_range.second + cfg.media_thickness_range.second +
          lumen_slack + 2 * layer_slack + 1.0 >
      R - 2)
    throw InfeasibleGeometry("phantom: sampled thicknesses can exceed R = " + std::to_string(R));

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto draw = [&](const Range& r) { return r.first + (r.second - r.first) * u01(rng); };
  const int radius = CleanOptions::for_grid(R, A).smooth_radius;

  Phantom ph;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 200) throw InfeasibleGeometry("phantom: no smoother-stable geometry after 200 draws");
    const auto lumen = harmonic_contour(draw(cfg.lumen_radius_range), kLumenHarmonics, A, rng);
    const auto t_i = harmonic_contour(draw(cfg.intima_thickness_range), kLayerHarmonics, A, rng);
    const auto t_m = harmonic_contour(draw(cfg.media_thickness_range), kLayerHarmonics, A, rng);
    std::vector<double> iel(A), eel(A);
    for (int a = 0; a < A; ++a) {
      iel[a] = lumen[a] + t_i[a];
      eel[a] = iel[a] + t_m[a];
    }
    const auto l = median_root(rounded(lumen), radius);
    const auto i = median_root(rounded(iel), radius);
    const auto e = median_root(rounded(eel), radius);
    bool ok = true;
    for (int a = 0; a < A && ok; ++a)
      ok = l[a] >= 1 && i[a] - l[a] >= kMinLayerPx && e[a] - i[a] >= kMinLayerPx && e[a] <= R - 2;
    if (!ok) continue;

    AnnotationSet ann;
    ann.lumen.assign(l.begin(), l.end());
    ann.iel.assign(i.begin(), i.end());
    ann.eel.assign(e.begin(), e.end());
    ann.wedges = sample_wedges(cfg, rng);
    LabelMap y = contours_to_labels(ann, R, A);
    if (angular_mode_filter(y, radius) != y) continue;
    ph.labels = std::move(y);
    ph.annotation = std::move(ann);
    break;
  }

  ph.image = PolarImage(R, A, cfg.pixel_pitch_um);
  std::vector<char> shadowed(A, 0);
  for (int a = 0; a < A; ++a)
    for (const auto& w : ph.annotation.wedges) shadowed[a] |= w.contains(a, A) ? 1 : 0;

  std::exponential_distribution<double> speckle(1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double pol_sd = 0.3 * cfg.noise_level;
  for (int r = 0; r < R; ++r) {
    for (int a = 0; a < A; ++a) {
      const Label k = ph.labels.at(r, a);
      const auto& m = cfg.channel_contrast[class_index(k)];
      double inten = m[0];
      if (shadowed[a] && k == Label::Outside) inten *= cfg.shadow_attenuation;
      if (cfg.noise_level > 0.0) {
        inten *= std::max(0.0, 1.0 + cfg.noise_level * (speckle(rng) - 1.0));
        ph.image.at(Channel::Birefringence, r, a) = static_cast<float>(m[1] + pol_sd * gauss(rng));
        ph.image.at(Channel::Depolarization, r, a) =
            static_cast<float>(std::clamp(m[2] + pol_sd * gauss(rng), 0.0, 1.0));
      } else {
        ph.image.at(Channel::Birefringence, r, a) = m[1];
        ph.image.at(Channel::Depolarization, r, a) = std::clamp(m[2], 0.0f, 1.0f);
      }
      ph.image.at(Channel::Intensity, r, a) = static_cast<float>(inten);
    }
  }
  return ph;
}

LabelMap perturb_labels(const LabelMap& labels, double severity, std::uint64_t seed) {
  if (!(severity > 0.0)) return labels;
  const int R = labels.R, A = labels.A;
  const AnnotationSet base = labels_to_contours(labels);
  std::mt19937_64 rng(seed);

  double scale = 1.0;
  for (int attempt = 0; attempt < 8; ++attempt, scale *= 0.5) {
    const int jr = static_cast<int>(std::lround(4.0 * severity * scale));
    const int ja = static_cast<int>(std::lround(3.0 * severity * scale));
    if (jr == 0 && ja == 0) break;
    std::uniform_int_distribution<int> dr(-jr, jr), da(-ja, ja);

    AnnotationSet ann = base;
    for (int a = 0; a < A; ++a) {
      const double lo = std::min(1.0, base.lumen[a]);
      const double hi = base.eel[a] >= R ? static_cast<double>(R) : R - 1.0;
      const double l = std::clamp(base.lumen[a] + dr(rng), lo, hi);
      const double i = std::clamp(base.iel[a] + dr(rng), l, hi);
      const double e = std::clamp(base.eel[a] + dr(rng), i, hi);
      ann.lumen[a] = l;
      ann.iel[a] = i;
      ann.eel[a] = e;
    }
    for (auto& w : ann.wedges) {
      const int width = w.width(A) == 0 ? A : w.width(A);
      const int ds = da(rng), de = da(rng);
      const int new_width = std::clamp(width - ds + de, 1, A - 1);
      w.a_start = ((w.a_start + ds) % A + A) % A;
      w.a_end = (w.a_start + new_width) % A;
    }
    LabelMap y = contours_to_labels(ann, R, A);
    if (verify_topology(y).valid()) return y;
  }
  return labels;
}

}  // namespace psoctseg
