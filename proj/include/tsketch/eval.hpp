#ifndef TSKETCH_EVAL_HPP
#define TSKETCH_EVAL_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include "tsketch/recovery.hpp"
#include "tsketch/tensor.hpp"

namespace tsketch {

/// ||x_hat - x|| / ||x0||. x is the observed tensor, x0 the clean one.
double relative_error(const DenseTensor& x_hat, const DenseTensor& x, const DenseTensor& x0);
inline double relative_error(const DenseTensor& x_hat, const DenseTensor& x0) {
  return relative_error(x_hat, x0, x0);
}

/// 10 log10(||x|| / ||x0 - x||); +inf when x == x0.
double snr_db(const DenseTensor& x, const DenseTensor& x0);

/// x0 + s N with N i.i.d. standard normal and s chosen so snr_db hits
/// target_db exactly (the noisy norm in the numerator is accounted for).
DenseTensor add_noise_snr(const DenseTensor& x0, double target_db, std::uint64_t seed);

/// Largest principal angle between span(q) and span(u), in degrees.
double max_principal_angle(const MatrixRef& q, const MatrixRef& u);

/// Sum of squared singular values of X_[j] beyond the r-th.
double tail_energy(const DenseTensor& x, Index r, Index j);
std::vector<double> tail_energies(const DenseTensor& x, Index r);

/// Plain truncated HOSVD.
TuckerFactorization hosvd_truncate(const DenseTensor& x, Index r);

/// (1 + e^eps) sqrt((1 + eps)/(1 - eps) * sum(deltas)).
double bound_rhs(double eps, const std::vector<double>& deltas);

struct LowRankInstance {
  DenseTensor tensor;
  DenseTensor core;
  std::vector<Matrix> factors;
};

/// Core entries U[0,1]; factors are QR-orthonormalized standard normals.
LowRankInstance gen_lowrank(Index n, Index d, Index r, std::uint64_t seed);

/// Super-diagonal tensors. With 1-based diagonal index i the entry is 1 for
/// i <= r + 1 and 10^-(i - r) (exp) or 1/(i - r) (poly) above that.
DenseTensor gen_superdiag_exp(Index n, Index d, Index r);
DenseTensor gen_superdiag_poly(Index n, Index d, Index r);

/// Tail norm sqrt(sum_{i > r} X_{i..i}^2) relative to ||X||.
double tail_baseline(const DenseTensor& superdiag, Index r);

}  // namespace tsketch

#endif  // TSKETCH_EVAL_HPP
