#include "psoctseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "psoctseg/errors.hpp"

namespace psoctseg {

SigmaKind parse_sigma(const std::string& s) {
  if (s == "norm1") return SigmaKind::Norm1;
  if (s == "norm2") return SigmaKind::Norm2;
  if (s == "max") return SigmaKind::Max;
  throw ConfigError("sigma must be one of norm1, norm2, max (got '" + s + "')");
}

const char* sigma_name(SigmaKind s) {
  switch (s) {
    case SigmaKind::Norm1: return "norm1";
    case SigmaKind::Norm2: return "norm2";
    case SigmaKind::Max: return "max";
  }
  return "?";
}

void LossConfig::validate() const {
  const std::pair<const char*, double> lambdas[] = {
      {"lambda_wce", lambda_wce}, {"lambda_dice", lambda_dice}, {"lambda_bp", lambda_bp},
      {"lambda_ap", lambda_ap},   {"lambda_bc", lambda_bc},
  };
  for (const auto& [name, v] : lambdas)
    if (!(v == 0.0 || (v >= 1e-3 && v <= 1e3)))
      throw ConfigError(std::string(name) + " must be 0 or within [1e-3, 1e3]");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (b < 1) throw ConfigError("b must be >= 1");
  if (!(M > 0.0)) throw ConfigError("M must be > 0");
  if (!(gp_weight >= 0.0)) throw ConfigError("gp_weight must be >= 0");
}

namespace {

void check_batch(std::span<const LabelMap> y, std::span<const ProbMap> yhat, const char* who) {
  if (y.size() != yhat.size()) throw ShapeMismatch(std::string(who) + ": batch sizes differ");
  for (std::size_t n = 0; n < y.size(); ++n)
    if (y[n].R != yhat[n].R || y[n].A != yhat[n].A) throw ShapeMismatch(std::string(who) + ": map shapes differ");
}

void prepare(GradBatch* grad, std::span<const ProbMap> yhat) {
  if (!grad) return;
  grad->clear();
  grad->reserve(yhat.size());
  for (const auto& p : yhat) grad->emplace_back(p.R, p.A);
}

}  // namespace

double wce(std::span<const LabelMap> y, std::span<const ProbMap> yhat, double epsilon, GradBatch* grad) {
  check_batch(y, yhat, "wce");
  prepare(grad, yhat);
  std::array<double, kNumClasses> count{};
  double N = 0.0;
  for (const auto& m : y) {
    const auto c = m.class_counts();
    for (int k = 0; k < kNumClasses; ++k) count[k] += static_cast<double>(c[k]);
    N += static_cast<double>(m.size());
  }
  if (N == 0.0) return 0.0;
  std::array<double, kNumClasses> omega{};
  for (int k = 0; k < kNumClasses; ++k) omega[k] = count[k] > 0.0 ? N / count[k] : 0.0;

  double sum = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    const auto& lab = y[n];
    const auto& p = yhat[n];
    for (std::size_t px = 0; px < lab.size(); ++px) {
      const int k = lab.codes[px] - 1;
      const double q = p.probs[px * kNumClasses + k];
      const double qc = std::clamp(q, epsilon, 1.0);
      sum += omega[k] * std::log(qc);
      if (grad && q >= epsilon && q <= 1.0) (*grad)[n].probs[px * kNumClasses + k] = -omega[k] / (N * q);
    }
  }
  return -sum / N;
}

double dice_loss(std::span<const LabelMap> y, std::span<const ProbMap> yhat, double epsilon, GradBatch* grad) {
  check_batch(y, yhat, "dice_loss");
  prepare(grad, yhat);
  std::array<double, kNumClasses> inter{}, denom{};
  for (std::size_t n = 0; n < y.size(); ++n) {
    for (std::size_t px = 0; px < y[n].size(); ++px) {
      const int k = y[n].codes[px] - 1;
      const double* q = &yhat[n].probs[px * kNumClasses];
      inter[k] += q[k];
      denom[k] += 1.0;
      for (int c = 0; c < kNumClasses; ++c) denom[c] += q[c] * q[c];
    }
  }
  double ratio_sum = 0.0;
  std::array<double, kNumClasses> num{}, den{};
  for (int c = 0; c < kNumClasses; ++c) {
    num[c] = inter[c] + epsilon;
    den[c] = denom[c] + epsilon;
    ratio_sum += num[c] / den[c];
  }
  if (grad) {
    const double s = -2.0 / kNumClasses;
    for (std::size_t n = 0; n < y.size(); ++n)
      for (std::size_t px = 0; px < y[n].size(); ++px) {
        const int k = y[n].codes[px] - 1;
        for (int c = 0; c < kNumClasses; ++c) {
          const double q = yhat[n].probs[px * kNumClasses + c];
          const double t = c == k ? 1.0 : 0.0;
          (*grad)[n].probs[px * kNumClasses + c] = s * (t * den[c] - 2.0 * q * num[c]) / (den[c] * den[c]);
        }
      }
  }
  return 1.0 - 2.0 / kNumClasses * ratio_sum;
}

std::size_t BoundaryMask::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

BoundaryMask boundary_mask(const LabelMap& y, int b) {
  if (b < 1) throw ConfigError("boundary_mask: b must be >= 1");
  const int R = y.R, A = y.A;
  BoundaryMask out{R, A, std::vector<std::uint8_t>(y.size(), 0)};
  std::vector<std::uint8_t> plane(R), dilated(R);
  for (int c = 1; c <= kNumClasses; ++c) {
    for (int a = 0; a < A; ++a) {
      for (int complement = 0; complement < 2; ++complement) {
        bool any = false;
        for (int r = 0; r < R; ++r) {
          plane[r] = (y.codes[static_cast<std::size_t>(r) * A + a] == c) != (complement == 1);
          any |= plane[r] != 0;
        }
        if (!any) continue;
        // running-window dilation over [r - b, r + b]
        int ones = 0;
        for (int r = 0; r <= std::min(b, R - 1); ++r) ones += plane[r];
        for (int r = 0; r < R; ++r) {
          dilated[r] = ones > 0;
          if (r + b + 1 < R) ones += plane[r + b + 1];
          if (r - b >= 0) ones -= plane[r - b];
        }
        for (int r = 0; r < R; ++r)
          if (dilated[r] != plane[r]) out.mask[static_cast<std::size_t>(r) * A + a] = 1;
      }
    }
  }
  return out;
}

double bp_loss(std::span<const LabelMap> y, std::span<const ProbMap> yhat, std::span<const BoundaryMask> beta,
               double epsilon, GradBatch* grad) {
  check_batch(y, yhat, "bp_loss");
  if (beta.size() != y.size()) throw ShapeMismatch("bp_loss: one mask per map required");
  prepare(grad, yhat);
  double total = 0.0;
  for (const auto& m : beta) total += static_cast<double>(m.count());
  if (total == 0.0) {
    std::cerr << "warning: bp_loss: boundary mask is empty; term set to 0\n";
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    if (beta[n].mask.size() != y[n].size()) throw ShapeMismatch("bp_loss: mask shape differs");
    for (std::size_t px = 0; px < y[n].size(); ++px) {
      if (!beta[n].mask[px]) continue;
      const int k = y[n].codes[px] - 1;
      const double q = yhat[n].probs[px * kNumClasses + k];
      sum += std::log(std::clamp(q, epsilon, 1.0));
      if (grad && q >= epsilon && q <= 1.0) (*grad)[n].probs[px * kNumClasses + k] = -1.0 / (total * q);
    }
  }
  return -sum / total;
}

namespace {

int first_max(const double* q) {
  int m = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (q[c] > q[m]) m = c;
  return m;
}

}  // namespace

ProbMap soft_argmax(const ProbMap& yhat, double M) {
  ProbMap S(yhat.R, yhat.A);
  for (std::size_t px = 0; px < yhat.pixels(); ++px) {
    const double* q = &yhat.probs[px * kNumClasses];
    const double mx = q[first_max(q)];
    for (int c = 0; c < kNumClasses; ++c) S.probs[px * kNumClasses + c] = 1.0 + std::tanh(M * (q[c] - mx));
  }
  return S;
}

std::vector<double> boundary_cardinality(const ProbMap& S) {
  const int R = S.R, A = S.A;
  std::vector<double> bc(A, 0.0);
  for (int r = 0; r + 1 < R; ++r)
    for (int a = 0; a < A; ++a)
      for (int c = 0; c < kNumClasses; ++c) bc[a] += 0.5 * std::abs(S.at(r + 1, a, c) - S.at(r, a, c));
  return bc;
}

namespace {

// Adds d(sum_a g[a] * BC_a(S(yhat)))/d yhat into `out`.
void bc_backward(const ProbMap& yhat, const ProbMap& S, double M, const std::vector<double>& g, ProbMap& out) {
  const int R = yhat.R, A = yhat.A;
  ProbMap dS(R, A);
  for (int r = 0; r + 1 < R; ++r)
    for (int a = 0; a < A; ++a) {
      if (g[a] == 0.0) continue;
      for (int c = 0; c < kNumClasses; ++c) {
        const double d = S.at(r + 1, a, c) - S.at(r, a, c);
        const double s = 0.5 * g[a] * static_cast<double>((d > 0.0) - (d < 0.0));
        dS.at(r + 1, a, c) += s;
        dS.at(r, a, c) -= s;
      }
    }
  for (std::size_t px = 0; px < yhat.pixels(); ++px) {
    const double* q = &yhat.probs[px * kNumClasses];
    const int m = first_max(q);
    for (int c = 0; c < kNumClasses; ++c) {
      if (c == m) continue;
      const double t = S.probs[px * kNumClasses + c] - 1.0;
      const double v = dS.probs[px * kNumClasses + c] * M * (1.0 - t * t);
      out.probs[px * kNumClasses + c] += v;
      out.probs[px * kNumClasses + m] -= v;
    }
  }
}

}  // namespace

double bc_loss(std::span<const LabelMap> y, std::span<const ProbMap> yhat, double M, SigmaKind sigma,
               GradBatch* grad) {
  check_batch(y, yhat, "bc_loss");
  prepare(grad, yhat);
  std::vector<std::vector<double>> diff(y.size());
  std::vector<ProbMap> S_hat(y.size());
  std::size_t lines = 0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    const auto bc_y = boundary_cardinality(soft_argmax(ProbMap::from_labels(y[n]), M));
    S_hat[n] = soft_argmax(yhat[n], M);
    const auto bc_p = boundary_cardinality(S_hat[n]);
    diff[n].resize(bc_y.size());
    for (std::size_t a = 0; a < bc_y.size(); ++a) diff[n][a] = bc_p[a] - bc_y[a];
    lines += bc_y.size();
  }
  if (lines == 0) return 0.0;

  double value = 0.0;
  std::size_t arg_n = 0, arg_a = 0;
  switch (sigma) {
    case SigmaKind::Norm1:
      for (const auto& d : diff)
        for (double v : d) value += std::abs(v);
      value /= static_cast<double>(lines);
      break;
    case SigmaKind::Norm2:
      for (const auto& d : diff)
        for (double v : d) value += v * v;
      value = std::sqrt(value / static_cast<double>(lines));
      break;
    case SigmaKind::Max:
      value = -1.0;
      for (std::size_t n = 0; n < diff.size(); ++n)
        for (std::size_t a = 0; a < diff[n].size(); ++a)
          if (std::abs(diff[n][a]) > value) {
            value = std::abs(diff[n][a]);
            arg_n = n;
            arg_a = a;
          }
      break;
  }
  if (!grad) return value;

  for (std::size_t n = 0; n < y.size(); ++n) {
    std::vector<double> g(diff[n].size(), 0.0);
    for (std::size_t a = 0; a < g.size(); ++a) {
      const double v = diff[n][a];
      const double sgn = static_cast<double>((v > 0.0) - (v < 0.0));
      switch (sigma) {
        case SigmaKind::Norm1: g[a] = sgn / static_cast<double>(lines); break;
        case SigmaKind::Norm2: g[a] = value > 0.0 ? v / (static_cast<double>(lines) * value) : 0.0; break;
        case SigmaKind::Max: g[a] = (n == arg_n && a == arg_a) ? sgn : 0.0; break;
      }
    }
    bc_backward(yhat[n], S_hat[n], M, g, (*grad)[n]);
  }
  return value;
}

double combine(const LossTerms& t, const LossConfig& cfg) {
  const std::pair<const char*, double> terms[] = {
      {"wce", t.wce}, {"dice", t.dice}, {"bp", t.bp}, {"ap", t.ap}, {"bc", t.bc},
  };
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v)) throw NonFiniteLoss(name);
  return cfg.lambda_wce * t.wce + cfg.lambda_dice * t.dice + cfg.lambda_bp * t.bp + cfg.lambda_ap * t.ap +
         cfg.lambda_bc * t.bc;
}

void accumulate(GradBatch& acc, const GradBatch& g, double w) {
  if (acc.size() != g.size()) throw ShapeMismatch("accumulate: batch sizes differ");
  for (std::size_t n = 0; n < acc.size(); ++n) {
    if (acc[n].probs.size() != g[n].probs.size()) throw ShapeMismatch("accumulate: map shapes differ");
    for (std::size_t i = 0; i < acc[n].probs.size(); ++i) acc[n].probs[i] += w * g[n].probs[i];
  }
}

}  // namespace psoctseg
