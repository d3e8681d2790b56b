#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psoctseg/types.hpp"

namespace psoctseg {

enum class SigmaKind { Norm1, Norm2, Max };

SigmaKind parse_sigma(const std::string& s);
const char* sigma_name(SigmaKind s);

struct LossConfig {
  double lambda_wce = 1.0;
  double lambda_dice = 1.0;
  double lambda_bp = 1.0;
  double lambda_ap = 1.0;
  double lambda_bc = 1.0;
  double epsilon = 1e-7;
  int b = 10;
  double M = 1e9;  // 100 / epsilon at the default epsilon
  SigmaKind sigma = SigmaKind::Norm1;
  double gp_weight = 10.0;

  /// A weight of exactly 0 switches its term off; any other weight must lie
  /// in [1e-3, 1e3]. Throws ConfigError.
  void validate() const;
};

/// dL/dyhat for every map of a batch. Stored in ProbMap containers, which
/// here hold arbitrary reals rather than distributions.
using GradBatch = std::vector<ProbMap>;

/// Weighted cross-entropy over a batch. Class weights N / N_c come from the
/// batch labels; classes absent from the batch contribute nothing.
/// Probabilities are clipped to [epsilon, 1] before the log, and the gradient
/// is zero where the clip is active.
double wce(std::span<const LabelMap> y, std::span<const ProbMap> yhat, double epsilon, GradBatch* grad = nullptr);

/// Generalized Dice loss with sums taken over the whole batch and all six
/// classes in the average. Ranges over [-1, 1].
double dice_loss(std::span<const LabelMap> y, std::span<const ProbMap> yhat, double epsilon,
                 GradBatch* grad = nullptr);

/// Pixels with a different class within `b` radial pixels (either direction).
struct BoundaryMask {
  int R = 0;
  int A = 0;
  std::vector<std::uint8_t> mask;  // r * A + a

  [[nodiscard]] bool at(int r, int a) const { return mask[static_cast<std::size_t>(r) * A + a] != 0; }
  [[nodiscard]] std::size_t count() const;
};

/// Union over classes of (dilate(Y_c) xor Y_c) and (dilate(1 - Y_c) xor
/// (1 - Y_c)), the dilation running radially over +-b pixels.
BoundaryMask boundary_mask(const LabelMap& y, int b);

/// Cross-entropy restricted to the masks and normalised by the number of
/// masked pixels in the batch. An all-empty mask gives 0 and a warning.
double bp_loss(std::span<const LabelMap> y, std::span<const ProbMap> yhat, std::span<const BoundaryMask> beta,
               double epsilon, GradBatch* grad = nullptr);

/// S = 1 + tanh(M (yhat - max_c yhat)), per pixel and class.
ProbMap soft_argmax(const ProbMap& yhat, double M);

/// Per-A-line count proxy: BC_a = 1/2 sum_r sum_c |S[r+1,a,c] - S[r,a,c]|.
std::vector<double> boundary_cardinality(const ProbMap& S);

/// sigma(BC(S(y)) - BC(S(yhat))) over every A-line of the batch. norm1 is the
/// mean absolute difference, norm2 the root mean square, max the largest
/// absolute difference.
double bc_loss(std::span<const LabelMap> y, std::span<const ProbMap> yhat, double M, SigmaKind sigma,
               GradBatch* grad = nullptr);

struct LossTerms {
  double wce = 0.0;
  double dice = 0.0;
  double bp = 0.0;
  double ap = 0.0;
  double bc = 0.0;
};

/// sum_k lambda_k L_k. Throws NonFiniteLoss naming the first non-finite term.
double combine(const LossTerms& terms, const LossConfig& cfg);

/// acc += w * g, map by map.
void accumulate(GradBatch& acc, const GradBatch& g, double w);

}  // namespace psoctseg
