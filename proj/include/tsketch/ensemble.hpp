#ifndef TSKETCH_ENSEMBLE_HPP
#define TSKETCH_ENSEMBLE_HPP

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "tsketch/tensor.hpp"

namespace tsketch {

enum class Family : std::uint8_t { gaussian = 0, sparse_sign = 1, srtt = 2, identity = 3 };

std::string_view to_string(Family family) noexcept;
std::optional<Family> parse_family(std::string_view name) noexcept;

/// Everything needed to regenerate one measurement matrix bit for bit.
struct EnsembleSpec {
  Family family = Family::gaussian;
  Index rows = 1;
  Index cols = 1;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

/**
 * Draws the matrix described by `spec`.
 *
 *   gaussian     i.i.d. N(0, 1/rows)
 *   sparse_sign  i.i.d. sqrt(3/rows) * {+1, 0, -1} with probabilities {1/6, 2/3, 1/6}
 *   srtt         sqrt(cols/rows) * P T D: random signs D, orthonormal DCT-II T,
 *                uniform row subsampling P without replacement
 *   identity     I
 *
 * Every entry is a pure function of (seed, family, rows, cols) and its
 * position, so the result does not depend on evaluation order.
 */
Matrix materialize(const EnsembleSpec& spec);

/// Orthonormal DCT-II matrix of size n x n (row k is frequency k).
Matrix dct_matrix(Index n);

struct JlStatistics {
  /// Per trial, max over points of | ||Omega x||^2 - 1 |.
  std::vector<double> max_distortion;
  /// Fraction of trials whose max distortion exceeded eps.
  double failure_rate = 0.0;
};

/// Empirical Johnson-Lindenstrauss check. Trial t draws the matrix from
/// `spec` with its seed replaced by derive_seed(spec.seed, "jl", t).
/// `points` holds one unit-norm point per column.
JlStatistics jl_distortion(const EnsembleSpec& spec, const MatrixRef& points, Index trials,
                           double eps);

}  // namespace tsketch

#endif  // TSKETCH_ENSEMBLE_HPP
