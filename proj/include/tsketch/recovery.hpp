#ifndef TSKETCH_RECOVERY_HPP
#define TSKETCH_RECOVERY_HPP

#include <vector>

#include "tsketch/sketch.hpp"
#include "tsketch/tensor.hpp"

namespace tsketch {

/// Core tensor with all sides r plus one n_i x r factor per mode.
struct TuckerFactorization {
  DenseTensor core;
  std::vector<Matrix> factors;

  Index order() const noexcept { return factors.size(); }
  Index rank() const { return core.order() == 0 ? 0 : core.dim(0); }
  Shape shape() const;
};

/// Least-squares solve of A X = B with column-pivoted Householder QR.
/// Fails with `singular` when a retained diagonal of R falls below
/// 1e-12 times the largest.
Matrix solve_least_squares(const MatrixRef& a, const MatrixRef& b);

/// r leading left singular vectors, largest-magnitude entry of each column
/// made positive.
Matrix leading_left_singular_vectors(const MatrixRef& a, Index r);

/// Flips column signs so each column's largest-magnitude entry is positive.
void normalize_column_signs(Matrix& q);

/// Solve Omega(i, i) F_i = B_i and keep the r leading left singular vectors
/// of F_i, for every mode.
std::vector<Matrix> recover_factors(const SketchBundle& bundle, Index r);

/// One-pass core: B_c x_i (Phi_i Q_i)^+ for every mode, solved one mode at a
/// time in ascending order.
DenseTensor recover_core_onepass(const DenseTensor& core_sketch, const std::vector<Matrix>& phi,
                                 const std::vector<Matrix>& factors);

/// Experimental: same mode-by-mode solve on the mode-j kronecker sketch.
/// `omega[i]` is Omega(j, i); an empty entry means identity.
DenseTensor recover_core_recycled(const DenseTensor& loo_tensor, const std::vector<Matrix>& omega,
                                  const std::vector<Matrix>& factors);

/// X x_i Q_i^T for every mode.
DenseTensor compute_core_twopass(const DenseTensor& x, const std::vector<Matrix>& factors);

/// Reads only the bundle.
TuckerFactorization one_pass(const SketchBundle& bundle, Index r);
/// One-pass estimate whose core is recovered from the mode-j leave-one-out
/// sketch instead of the core sketch. Kronecker bundles only.
TuckerFactorization one_pass_recycled(const SketchBundle& bundle, Index r, Index j = 0);
TuckerFactorization two_pass(const SketchBundle& bundle, const DenseTensor& x, Index r);

DenseTensor reconstruct(const TuckerFactorization& tucker);

}  // namespace tsketch

#endif  // TSKETCH_RECOVERY_HPP
