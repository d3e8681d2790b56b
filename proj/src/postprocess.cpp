#include "psoctseg/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>

#include "psoctseg/errors.hpp"

namespace psoctseg {

namespace {

struct Components {
  std::vector<int> id;       // -1 outside the mask
  std::vector<int> size;     // per component
  std::vector<bool> border;  // touches the first or last radial row
};

// 4-connected components of a binary mask; the angular axis wraps.
Components label_components(const std::vector<char>& mask, int R, int A) {
  Components c;
  c.id.assign(mask.size(), -1);
  std::vector<int> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || c.id[start] >= 0) continue;
    const int cid = static_cast<int>(c.size.size());
    c.size.push_back(0);
    c.border.push_back(false);
    c.id[start] = cid;
    stack.push_back(static_cast<int>(start));
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++c.size[cid];
      const int r = p / A, a = p % A;
      if (r == 0 || r == R - 1) c.border[cid] = true;
      const int nb[4] = {r > 0 ? p - A : -1, r < R - 1 ? p + A : -1, r * A + (a + 1) % A, r * A + (a + A - 1) % A};
      for (int q : nb) {
        if (q < 0 || !mask[q] || c.id[q] >= 0) continue;
        c.id[q] = cid;
        stack.push_back(q);
      }
    }
  }
  return c;
}

std::vector<char> class_mask(const LabelMap& y, Label cls, bool invert = false) {
  std::vector<char> m(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) m[i] = (y.codes[i] == static_cast<std::uint8_t>(cls)) != invert;
  return m;
}

// Most frequent class among 4-neighbours outside the component `cid`.
// Ties resolve to the lower class code. Returns 0 when there are none.
std::uint8_t surrounding_majority(const LabelMap& y, const Components& comp, int cid) {
  const int R = y.R, A = y.A;
  std::array<int, kNumClasses + 1> votes{};
  for (std::size_t p = 0; p < comp.id.size(); ++p) {
    if (comp.id[p] != cid) continue;
    const int r = static_cast<int>(p) / A, a = static_cast<int>(p) % A;
    const int nb[4] = {r > 0 ? static_cast<int>(p) - A : -1, r < R - 1 ? static_cast<int>(p) + A : -1,
                       r * A + (a + 1) % A, r * A + (a + A - 1) % A};
    for (int q : nb)
      if (q >= 0 && comp.id[q] != cid) ++votes[y.codes[q]];
  }
  std::uint8_t best = 0;
  for (int k = 1; k <= kNumClasses; ++k)
    if (votes[k] > (best ? votes[best] : 0)) best = static_cast<std::uint8_t>(k);
  return best;
}

void reassign_component(LabelMap& y, const Components& comp, int cid) {
  const std::uint8_t to = surrounding_majority(y, comp, cid);
  if (to == 0) return;
  for (std::size_t p = 0; p < comp.id.size(); ++p)
    if (comp.id[p] == cid) y.codes[p] = to;
}

void remove_small_objects(LabelMap& y, int min_px) {
  for (int k = 1; k <= kNumClasses; ++k) {
    const auto comp = label_components(class_mask(y, static_cast<Label>(k)), y.R, y.A);
    for (int cid = 0; cid < static_cast<int>(comp.size.size()); ++cid)
      if (comp.size[cid] < min_px) reassign_component(y, comp, cid);
  }
}

void fill_voids(LabelMap& y, Label cls) {
  const auto comp = label_components(class_mask(y, cls, true), y.R, y.A);
  for (std::size_t p = 0; p < comp.id.size(); ++p)
    if (comp.id[p] >= 0 && !comp.border[comp.id[p]]) y.codes[p] = static_cast<std::uint8_t>(cls);
}

void keep_largest(LabelMap& y, Label cls) {
  const auto comp = label_components(class_mask(y, cls), y.R, y.A);
  if (comp.size.size() <= 1) return;
  const int keep = static_cast<int>(std::max_element(comp.size.begin(), comp.size.end()) - comp.size.begin());
  for (int cid = 0; cid < static_cast<int>(comp.size.size()); ++cid)
    if (cid != keep) reassign_component(y, comp, cid);
}

// Valid per-A-line sequences are monotone walks along one of these chains.
constexpr std::array<std::array<Label, 4>, 3> kChains = {{
    {Label::Lumen, Label::Intima, Label::Media, Label::Outside},
    {Label::Lumen, Label::GShadow, Label::Outside, Label::Outside},
    {Label::Lumen, Label::PShadow, Label::Outside, Label::Outside},
}};
constexpr std::array<int, 3> kChainLength = {4, 3, 3};

using ClassMask = std::uint8_t;  // bit k-1 set when class k is allowed
constexpr ClassMask kAllClasses = 0x3F;
constexpr ClassMask bit(Label l) { return static_cast<ClassMask>(1u << (static_cast<int>(l) - 1)); }

// Rewrites A-line `a` of `out` with the valid sequence closest to `target`
// (fewest changed pixels). Near-ties prefer agreement with the neighbouring
// A-lines of `target`; the neighbour term can never outweigh one pixel.
void project_column(const LabelMap& target, int a, ClassMask allowed, LabelMap& out) {
  const int R = target.R, A = target.A;
  const double tie = 1.0 / (2.0 * R + 1.0);
  const int left = (a + A - 1) % A, right = (a + 1) % A;
  auto cost = [&](int r, Label k) {
    double c = target.at(r, a) == k ? 0.0 : 1.0;
    c += tie * ((target.at(r, left) == k ? 0.0 : 0.5) + (target.at(r, right) == k ? 0.0 : 0.5));
    return c;
  };

  double best_total = std::numeric_limits<double>::infinity();
  std::vector<Label> best_seq(R, Label::Outside);
  std::vector<double> dp(4), next(4);
  std::vector<std::array<int, 4>> from(R);
  for (std::size_t ci = 0; ci < kChains.size(); ++ci) {
    const auto& chain = kChains[ci];
    const int n = kChainLength[ci];
    std::array<bool, 4> ok{};
    bool any = false;
    for (int s = 0; s < n; ++s) any |= (ok[s] = (allowed & bit(chain[s])) != 0);
    if (!any) continue;
    const double inf = std::numeric_limits<double>::infinity();
    for (int s = 0; s < n; ++s) dp[s] = ok[s] ? cost(0, chain[s]) : inf;
    for (int r = 1; r < R; ++r) {
      double run_best = inf;
      int run_arg = -1;
      for (int s = 0; s < n; ++s) {
        if (dp[s] < run_best) {
          run_best = dp[s];
          run_arg = s;
        }
        from[r][s] = run_arg;
        next[s] = ok[s] && run_arg >= 0 ? run_best + cost(r, chain[s]) : inf;
      }
      std::swap(dp, next);
    }
    int s = -1;
    double total = inf;
    for (int k = 0; k < n; ++k)
      if (dp[k] < total) {
        total = dp[k];
        s = k;
      }
    if (s < 0 || !(total < best_total)) continue;
    best_total = total;
    for (int r = R - 1; r >= 0; --r) {
      best_seq[r] = chain[s];
      if (r > 0) s = from[r][s];
    }
  }
  for (int r = 0; r < R; ++r) out.set(r, a, best_seq[r]);
}

// Circular runs of A-lines where `has[a]` holds; each run as (start, length).
std::vector<std::pair<int, int>> circular_runs(const std::vector<char>& has) {
  const int A = static_cast<int>(has.size());
  std::vector<std::pair<int, int>> runs;
  int seam = -1;
  for (int a = 0; a < A; ++a)
    if (has[a] && !has[(a + A - 1) % A]) {
      seam = a;
      break;
    }
  if (seam < 0) {
    if (A > 0 && has[0]) runs.emplace_back(0, A);
    return runs;
  }
  for (int k = 0; k < A;) {
    const int a = (seam + k) % A;
    if (!has[a]) {
      ++k;
      continue;
    }
    int len = 0;
    while (k + len < A && has[(a + len) % A]) ++len;
    runs.emplace_back(a, len);
    k += len;
  }
  return runs;
}

// Projects every A-line, then repeatedly bans Lumen, Outside or G-Shadow from
// A-lines holding a minor component of that class and re-projects them. Each
// pass only shrinks the allowed sets, so the loop terminates; on exit every
// rule of verify_topology holds.
LabelMap project_and_connect(const LabelMap& target) {
  const int R = target.R, A = target.A;
  std::vector<ClassMask> allowed(A, kAllClasses);
  LabelMap out = target;
  for (int a = 0; a < A; ++a) project_column(target, a, allowed[a], out);

  auto ban_minor_runs = [&](Label cls) {
    std::vector<char> has(A, 0);
    std::vector<int> mass(A, 0);
    for (int a = 0; a < A; ++a)
      for (int r = 0; r < R; ++r)
        if (out.at(r, a) == cls) {
          has[a] = 1;
          ++mass[a];
        }
    const auto runs = circular_runs(has);
    if (runs.size() <= 1) return false;
    std::size_t keep = 0;
    long keep_mass = -1;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      long m = 0;
      for (int k = 0; k < runs[i].second; ++k) m += mass[(runs[i].first + k) % A];
      if (m > keep_mass) {
        keep_mass = m;
        keep = i;
      }
    }
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (i == keep) continue;
      for (int k = 0; k < runs[i].second; ++k) {
        const int a = (runs[i].first + k) % A;
        allowed[a] &= static_cast<ClassMask>(~bit(cls));
        project_column(target, a, allowed[a], out);
      }
    }
    return true;
  };

  auto ban_minor_gshadow = [&]() {
    const auto comp = label_components(class_mask(out, Label::GShadow), R, A);
    if (comp.size.size() <= 1) return false;
    const int keep = static_cast<int>(std::max_element(comp.size.begin(), comp.size.end()) - comp.size.begin());
    std::vector<char> ban(A, 0);
    for (std::size_t p = 0; p < comp.id.size(); ++p)
      if (comp.id[p] >= 0 && comp.id[p] != keep) ban[p % A] = 1;
    for (int a = 0; a < A; ++a)
      if (ban[a]) {
        allowed[a] &= static_cast<ClassMask>(~bit(Label::GShadow));
        project_column(target, a, allowed[a], out);
      }
    return true;
  };

  for (;;) {
    bool changed = ban_minor_runs(Label::Lumen);
    changed |= ban_minor_runs(Label::Outside);
    changed |= ban_minor_gshadow();
    if (!changed) break;
  }
  return out;
}

LabelMap clean_once(const LabelMap& y, const CleanOptions& opts) {
  LabelMap z = y;
  remove_small_objects(z, opts.min_object_px);
  for (Label l : {Label::Lumen, Label::GShadow, Label::Outside}) fill_voids(z, l);
  if (opts.smooth_radius > 0) z = angular_mode_filter(z, opts.smooth_radius);
  for (Label l : {Label::Lumen, Label::Outside, Label::GShadow}) keep_largest(z, l);
  return project_and_connect(z);
}

bool column_valid(const LabelMap& y, int a, bool& has_shadow) {
  has_shadow = false;
  Label shadow_kind = Label::Outside;
  for (int r = 0; r < y.R; ++r)
    if (is_shadow(y.at(r, a))) {
      if (has_shadow && y.at(r, a) != shadow_kind) return false;
      has_shadow = true;
      shadow_kind = y.at(r, a);
    }
  // rank along the matching chain; must never decrease
  auto rank = [&](Label l) {
    if (has_shadow) {
      if (l == Label::Lumen) return 0;
      if (l == shadow_kind) return 1;
      if (l == Label::Outside) return 2;
      return -1;
    }
    switch (l) {
      case Label::Lumen: return 0;
      case Label::Intima: return 1;
      case Label::Media: return 2;
      case Label::Outside: return 3;
      default: return -1;
    }
  };
  int prev = 0;
  for (int r = 0; r < y.R; ++r) {
    const int k = rank(y.at(r, a));
    if (k < prev) return false;
    prev = k;
  }
  return true;
}

}  // namespace

bool single_component_without_voids(const LabelMap& y, Label cls) {
  const auto comp = label_components(class_mask(y, cls), y.R, y.A);
  if (comp.size.size() > 1) return false;
  if (comp.size.empty()) return true;
  const auto rest = label_components(class_mask(y, cls, true), y.R, y.A);
  return std::all_of(rest.border.begin(), rest.border.end(), [](bool b) { return b; });
}

TopologyReport verify_topology(const LabelMap& y) {
  TopologyReport rep;
  rep.lumen_single_component = single_component_without_voids(y, Label::Lumen);
  rep.gshadow_single_component = single_component_without_voids(y, Label::GShadow);
  rep.outside_single_component = single_component_without_voids(y, Label::Outside);
  for (int a = 0; a < y.A; ++a) {
    bool shadow = false;
    if (column_valid(y, a, shadow)) continue;
    if (shadow) rep.shadow_violations.push_back(a);
    else rep.order_violations.push_back(a);
  }
  rep.shadows_confined = rep.shadow_violations.empty();
  rep.layer_order_valid = rep.order_violations.empty();
  return rep;
}

CleanOptions CleanOptions::for_grid(int R, int A) {
  CleanOptions o;
  const double area = static_cast<double>(R) * A / (64.0 * 128.0);
  o.min_object_px = std::max(1, static_cast<int>(std::lround(16.0 * area)));
  o.smooth_radius = std::max(1, static_cast<int>(std::lround(3.0 * A / 128.0)));
  return o;
}

LabelMap angular_mode_filter(const LabelMap& y, int radius) {
  LabelMap out = y;
  const int A = y.A;
  for (int r = 0; r < y.R; ++r) {
    for (int a = 0; a < A; ++a) {
      std::array<int, kNumClasses + 1> votes{};
      for (int d = -radius; d <= radius; ++d) ++votes[y.codes[static_cast<std::size_t>(r) * A + (a + d + A) % A]];
      const std::uint8_t centre = y.codes[static_cast<std::size_t>(r) * A + a];
      std::uint8_t best = centre;
      for (int k = 1; k <= kNumClasses; ++k)
        if (votes[k] > votes[best]) best = static_cast<std::uint8_t>(k);
      if (votes[best] >= votes[centre] + 2) out.codes[static_cast<std::size_t>(r) * A + a] = best;
    }
  }
  return out;
}

namespace {

bool has_lumen(const LabelMap& y) {
  return std::any_of(y.codes.begin(), y.codes.end(),
                     [](std::uint8_t c) { return c == static_cast<std::uint8_t>(Label::Lumen); });
}

}  // namespace

LabelMap clean_labels(const LabelMap& y, const CleanOptions& opts) {
  LabelMap cur = y;
  for (int it = 0; it < std::max(1, opts.max_iterations); ++it) {
    // small-object removal can eat a scattered lumen, so check every pass
    if (!has_lumen(cur)) {
      std::cerr << "warning: clean: no lumen pixels in the prediction; returning an all-Outside map\n";
      return LabelMap(y.R, y.A, Label::Outside);
    }
    LabelMap next = clean_once(cur, opts);
    const bool done = next == cur;
    cur = std::move(next);
    if (done) break;
  }
  if (!has_lumen(cur)) return LabelMap(y.R, y.A, Label::Outside);
  return cur;
}

LabelMap clean(const ProbMap& yhat, const CleanOptions& opts) { return clean_labels(yhat.argmax(), opts); }

// ------------------------------------------------------------ boundaries

const char* interface_name(Interface i) {
  switch (i) {
    case Interface::OuterLumen: return "outer_lumen";
    case Interface::OuterIntima: return "outer_intima";
    case Interface::OuterMedia: return "outer_media";
  }
  return "?";
}

namespace {

bool is_transition(Interface iface, Label before, Label after) {
  auto in = [](Label l, std::initializer_list<Label> set) { return std::find(set.begin(), set.end(), l) != set.end(); };
  switch (iface) {
    case Interface::OuterLumen: return before == Label::Lumen && after != Label::Lumen;
    case Interface::OuterIntima:
      return in(before, {Label::Lumen, Label::Intima}) && in(after, {Label::Media, Label::Outside});
    case Interface::OuterMedia:
      return in(before, {Label::Lumen, Label::Intima, Label::Media}) && after == Label::Outside;
  }
  return false;
}

}  // namespace

BoundarySet extract_boundary(const LabelMap& y, Interface iface, double pixel_pitch_um) {
  BoundarySet b;
  b.iface = iface;
  b.pixel_pitch_um = pixel_pitch_um;
  for (int r = 1; r < y.R; ++r)
    for (int a = 0; a < y.A; ++a)
      if (is_transition(iface, y.at(r - 1, a), y.at(r, a))) b.points.push_back({r, a});
  if (b.points.empty()) throw MissingInterface(std::string("no A-line carries the ") + interface_name(iface));
  return b;
}

std::array<std::optional<BoundarySet>, 3> extract_boundaries(const LabelMap& y, double pixel_pitch_um) {
  std::array<std::optional<BoundarySet>, 3> out;
  for (Interface i : kInterfaces) {
    try {
      out[static_cast<int>(i)] = extract_boundary(y, i, pixel_pitch_um);
    } catch (const MissingInterface&) {
    }
  }
  return out;
}

}  // namespace psoctseg
