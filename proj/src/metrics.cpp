#include "psoctseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "psoctseg/errors.hpp"

namespace psoctseg {

void Confusion::add(const LabelMap& y, const LabelMap& yhat, const std::vector<char>* exclude) {
  if (y.R != yhat.R || y.A != yhat.A) throw ShapeMismatch("confusion: map shapes differ");
  for (int r = 0; r < y.R; ++r)
    for (int a = 0; a < y.A; ++a) {
      if (exclude && (*exclude)[a]) continue;
      ++counts[class_index(y.at(r, a))][class_index(yhat.at(r, a))];
    }
}

Confusion& Confusion::operator+=(const Confusion& o) {
  for (int t = 0; t < kNumClasses; ++t)
    for (int p = 0; p < kNumClasses; ++p) counts[t][p] += o.counts[t][p];
  return *this;
}

std::size_t Confusion::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (auto v : row) n += v;
  return n;
}

std::size_t Confusion::true_count(int c) const {
  std::size_t n = 0;
  for (auto v : counts[c]) n += v;
  return n;
}

std::size_t Confusion::predicted_count(int c) const {
  std::size_t n = 0;
  for (const auto& row : counts) n += row[c];
  return n;
}

double accuracy(const Confusion& m) {
  const double N = static_cast<double>(m.total());
  if (N == 0.0) return 1.0;
  double sum = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    // |Y_c xor Yhat_c| = false negatives + false positives of class c
    const double sym = static_cast<double>(m.true_count(c) + m.predicted_count(c) - 2 * m.counts[c][c]);
    sum += (N - sym) / N;
  }
  return sum / kNumClasses;
}

double accuracy(const LabelMap& y, const LabelMap& yhat) {
  Confusion m;
  m.add(y, yhat);
  return accuracy(m);
}

std::optional<double> class_dice(const Confusion& m, int c) {
  const std::size_t denom = m.true_count(c) + m.predicted_count(c);
  if (denom == 0) return std::nullopt;
  return 2.0 * static_cast<double>(m.counts[c][c]) / static_cast<double>(denom);
}

double dice_coef(const Confusion& m) {
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < kNumClasses; ++c)
    if (auto d = class_dice(m, c)) {
      sum += *d;
      ++n;
    }
  return n ? sum / n : 1.0;
}

double dice_coef(const LabelMap& y, const LabelMap& yhat) {
  Confusion m;
  m.add(y, yhat);
  return dice_coef(m);
}

Rates sensitivity_specificity(const Confusion& m, int c) {
  const std::size_t pos = m.true_count(c);
  const std::size_t neg = m.total() - pos;
  const std::size_t tp = m.counts[c][c];
  const std::size_t fp = m.predicted_count(c) - tp;
  Rates r;
  if (pos > 0) r.sensitivity = static_cast<double>(tp) / static_cast<double>(pos);
  if (neg > 0) r.specificity = static_cast<double>(neg - fp) / static_cast<double>(neg);
  return r;
}

Rates sensitivity_specificity(const LabelMap& y, const LabelMap& yhat, Label c) {
  Confusion m;
  m.add(y, yhat);
  return sensitivity_specificity(m, class_index(c));
}

// ------------------------------------------------------------ distances

namespace {

// Points of a boundary set bucketed by A-line for pruned nearest-neighbour
// queries.
class ColumnIndex {
 public:
  explicit ColumnIndex(const BoundarySet& b) {
    int max_a = 0;
    for (const auto& p : b.points) max_a = std::max(max_a, p.a);
    rows_.resize(static_cast<std::size_t>(max_a) + 1);
    for (const auto& p : b.points) rows_[p.a].push_back(p.r);
    for (auto& v : rows_) std::sort(v.begin(), v.end());
  }

  // Smallest |r - r'| among points on A-line a, or nullopt.
  [[nodiscard]] std::optional<double> radial(int r, int a) const {
    if (a < 0 || a >= static_cast<int>(rows_.size()) || rows_[a].empty()) return std::nullopt;
    return static_cast<double>(closest(rows_[a], r));
  }

  [[nodiscard]] double euclidean(int r, int a) const {
    double best2 = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(rows_.size());
    for (int d = 0;; ++d) {
      if (static_cast<double>(d) * d >= best2) break;
      const int lo = a - d, hi = a + d;
      if (lo < 0 && hi >= n) break;
      for (int col : {lo, hi}) {
        if (col < 0 || col >= n || rows_[col].empty()) continue;
        const double dr = closest(rows_[col], r);
        best2 = std::min(best2, dr * dr + static_cast<double>(d) * d);
        if (d == 0) break;
      }
    }
    return std::sqrt(best2);
  }

 private:
  static int closest(const std::vector<int>& sorted, int r) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), r);
    int best = std::numeric_limits<int>::max();
    if (it != sorted.end()) best = *it - r;
    if (it != sorted.begin()) best = std::min(best, r - *std::prev(it));
    return best;
  }

  std::vector<std::vector<int>> rows_;
};

void require_points(const BoundarySet& a, const BoundarySet& b) {
  if (a.points.empty() || b.points.empty()) throw EmptyBoundary("boundary distance needs two nonempty sets");
}

}  // namespace

double ade_radial(const BoundarySet& from, const BoundarySet& to) {
  require_points(from, to);
  const ColumnIndex idx(to);
  double sum = 0.0;
  for (const auto& p : from.points) {
    const auto d = idx.radial(p.r, p.a);
    sum += d ? *d : idx.euclidean(p.r, p.a);
  }
  return sum / static_cast<double>(from.points.size());
}

double ade_2d(const BoundarySet& from, const BoundarySet& to) {
  require_points(from, to);
  const ColumnIndex idx(to);
  double sum = 0.0;
  for (const auto& p : from.points) sum += idx.euclidean(p.r, p.a);
  return sum / static_cast<double>(from.points.size());
}

double mhd(const BoundarySet& a, const BoundarySet& b) { return std::max(ade_2d(a, b), ade_2d(b, a)); }

// ------------------------------------------------------------ reports

FrameMetrics evaluate_frame(const LabelMap& y, const LabelMap& yhat, double pitch, std::string id,
                            const std::vector<char>* exclude) {
  FrameMetrics f;
  f.id = std::move(id);
  f.pixel_pitch_um = pitch;
  f.confusion.add(y, yhat, exclude);
  f.accuracy = accuracy(f.confusion);
  f.dice = dice_coef(f.confusion);
  f.topology = verify_topology(yhat);

  auto gt = extract_boundaries(y, pitch);
  auto pr = extract_boundaries(yhat, pitch);
  for (int i = 0; i < 3; ++i) {
    if (exclude) {
      for (auto* b : {&gt[i], &pr[i]})
        if (*b) {
          std::erase_if((*b)->points, [&](const BoundaryPoint& p) { return (*exclude)[p.a] != 0; });
          if ((*b)->points.empty()) b->reset();
        }
    }
    if (!gt[i] || !pr[i]) continue;
    InterfaceMetrics m;
    m.ade_px = ade_radial(*pr[i], *gt[i]);
    m.ade_reverse_px = ade_radial(*gt[i], *pr[i]);
    m.ade2d_px = ade_2d(*pr[i], *gt[i]);
    m.ade2d_reverse_px = ade_2d(*gt[i], *pr[i]);
    m.mhd_px = std::max(m.ade2d_px, m.ade2d_reverse_px);
    f.interfaces[i] = m;
  }
  return f;
}

EvalReport summarize(const std::vector<FrameMetrics>& frames) {
  EvalReport rep;
  rep.frames = frames.size();
  Confusion pooled;
  double pitch_sum = 0.0, mhd_sum = 0.0, mhd_um_sum = 0.0;
  std::size_t mhd_n = 0;
  for (const auto& f : frames) {
    pooled += f.confusion;
    pitch_sum += f.pixel_pitch_um;
    rep.topology_valid += f.topology.valid() ? 1 : 0;
    for (int i = 0; i < 3; ++i) {
      auto& ir = rep.interfaces[i];
      if (!f.interfaces[i]) {
        ++ir.missing;
        continue;
      }
      const auto& m = *f.interfaces[i];
      ++ir.frames;
      ir.ade_px += m.ade_px;
      ir.ade_reverse_px += m.ade_reverse_px;
      ir.ade2d_px += m.ade2d_px;
      ir.mhd_px += m.mhd_px;
      ir.ade_um += m.ade_px * f.pixel_pitch_um;
      ir.mhd_um += m.mhd_px * f.pixel_pitch_um;
      mhd_sum += m.mhd_px;
      mhd_um_sum += m.mhd_px * f.pixel_pitch_um;
      ++mhd_n;
    }
  }
  (void)pitch_sum;
  for (auto& ir : rep.interfaces) {
    if (ir.frames == 0) continue;
    const double n = static_cast<double>(ir.frames);
    ir.ade_px /= n;
    ir.ade_reverse_px /= n;
    ir.ade2d_px /= n;
    ir.mhd_px /= n;
    ir.ade_um /= n;
    ir.mhd_um /= n;
  }
  if (mhd_n) {
    rep.mhd_px = mhd_sum / static_cast<double>(mhd_n);
    rep.mhd_um = mhd_um_sum / static_cast<double>(mhd_n);
  }
  rep.accuracy = accuracy(pooled);
  rep.dice = dice_coef(pooled);
  const double N = static_cast<double>(pooled.total());
  for (int c = 0; c < kNumClasses; ++c) {
    auto& cr = rep.classes[c];
    const auto rates = sensitivity_specificity(pooled, c);
    cr.sensitivity = rates.sensitivity;
    cr.specificity = rates.specificity;
    cr.dice = class_dice(pooled, c);
    if (N > 0.0) {
      const double sym = static_cast<double>(pooled.true_count(c) + pooled.predicted_count(c) - 2 * pooled.counts[c][c]);
      cr.accuracy = (N - sym) / N;
    }
  }
  return rep;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["frames"] = frames;
  j["topology_valid_frames"] = topology_valid;
  j["excluded_alines"] = excluded_alines;
  j["aggregate"] = {{"accuracy", accuracy}, {"dice", dice}, {"mhd_px", mhd_px}, {"mhd_um", mhd_um}};
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& cr = classes[c];
    j["classes"][std::string(label_name(label_from_index(c)))] = {
        {"sensitivity", opt(cr.sensitivity)},
        {"specificity", opt(cr.specificity)},
        {"accuracy", cr.accuracy},
        {"dice", opt(cr.dice)},
    };
  }
  for (Interface i : kInterfaces) {
    const auto& ir = interfaces[static_cast<int>(i)];
    j["interfaces"][interface_name(i)] = {
        {"frames", ir.frames},         {"missing", ir.missing},   {"ade_px", ir.ade_px},
        {"ade_reverse_px", ir.ade_reverse_px}, {"ade2d_px", ir.ade2d_px}, {"mhd_px", ir.mhd_px},
        {"ade_um", ir.ade_um},         {"mhd_um", ir.mhd_um},
    };
  }
  return j;
}

void write_frame_csv(std::ostream& os, const std::vector<FrameMetrics>& frames) {
  os << "frame,interface,accuracy,dice,topology_valid,ade_px,ade_reverse_px,ade2d_px,ade2d_reverse_px,mhd_px,"
        "ade_um,mhd_um\n";
  for (const auto& f : frames) {
    for (Interface i : kInterfaces) {
      os << f.id << ',' << interface_name(i) << ',' << f.accuracy << ',' << f.dice << ','
         << (f.topology.valid() ? 1 : 0);
      if (const auto& m = f.interfaces[static_cast<int>(i)]) {
        os << ',' << m->ade_px << ',' << m->ade_reverse_px << ',' << m->ade2d_px << ',' << m->ade2d_reverse_px << ','
           << m->mhd_px << ',' << m->ade_px * f.pixel_pitch_um << ',' << m->mhd_px * f.pixel_pitch_um;
      } else {
        os << ",,,,,,,";
      }
      os << '\n';
    }
  }
}

std::vector<char> thick_wall_alines(const LabelMap& y, int max_wall_px) {
  std::vector<char> out(y.A, 0);
  for (int a = 0; a < y.A; ++a) {
    int wall = 0;
    for (int r = 0; r < y.R; ++r) {
      const Label l = y.at(r, a);
      if (l != Label::Lumen && l != Label::Outside) ++wall;
    }
    out[a] = wall > max_wall_px ? 1 : 0;
  }
  return out;
}

}  // namespace psoctseg
