#include "tsketch/ensemble.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "tsketch/error.hpp"
#include "tsketch/random.hpp"

namespace tsketch {
namespace {

std::uint64_t ensemble_key(const EnsembleSpec& spec) {
  std::uint64_t h = mix64(spec.seed);
  h = mix64(h ^ static_cast<std::uint64_t>(spec.family));
  h = mix64(h ^ spec.rows);
  return mix64(h ^ spec.cols);
}

enum Stream : std::uint32_t { kEntries = 0, kSigns = 1, kRows = 2 };

Matrix gaussian(const EnsembleSpec& spec) {
  const CounterRng rng(ensemble_key(spec), kEntries);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.rows));
  Matrix out(spec.rows, spec.cols);
  for (Index c = 0; c < spec.cols; ++c)
    for (Index r = 0; r < spec.rows; ++r) out(r, c) = scale * rng.normal(c * spec.rows + r);
  return out;
}

Matrix sparse_sign(const EnsembleSpec& spec) {
  const CounterRng rng(ensemble_key(spec), kEntries);
  const double scale = std::sqrt(3.0 / static_cast<double>(spec.rows));
  Matrix out(spec.rows, spec.cols);
  for (Index c = 0; c < spec.cols; ++c)
    for (Index r = 0; r < spec.rows; ++r) {
      const double u = rng.uniform(c * spec.rows + r);
      out(r, c) = u < 1.0 / 6.0 ? scale : (u < 1.0 / 3.0 ? -scale : 0.0);
    }
  return out;
}

Matrix srtt(const EnsembleSpec& spec) {
  const Index n = spec.cols, m = spec.rows;
  const std::uint64_t key = ensemble_key(spec);
  const CounterRng sign_rng(key, kSigns);
  const CounterRng row_rng(key, kRows);

  // Partial Fisher-Yates: the first m entries are a uniform sample without replacement.
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index t = 0; t < m; ++t) {
    const auto offset = static_cast<Index>(row_rng.uniform(t) * static_cast<double>(n - t));
    std::swap(perm[t], perm[t + std::min(offset, n - t - 1)]);
  }

  const double scale = std::sqrt(static_cast<double>(n) / static_cast<double>(m));
  const double c0 = std::sqrt(1.0 / static_cast<double>(n));
  const double ck = std::sqrt(2.0 / static_cast<double>(n));
  Matrix out(m, n);
  for (Index i = 0; i < n; ++i) {
    const double sign = (sign_rng.bits(i) & 1U) ? -1.0 : 1.0;
    for (Index t = 0; t < m; ++t) {
      const Index k = perm[t];
      const double basis =
          (k == 0 ? c0 : ck) *
          std::cos(std::numbers::pi * static_cast<double>((2 * i + 1) * k) / (2.0 * static_cast<double>(n)));
      out(t, i) = scale * basis * sign;
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Family family) noexcept {
  switch (family) {
    case Family::gaussian: return "gaussian";
    case Family::sparse_sign: return "sparse_sign";
    case Family::srtt: return "srtt";
    case Family::identity: return "identity";
  }
  return "unknown";
}

std::optional<Family> parse_family(std::string_view name) noexcept {
  if (name == "gaussian" || name == "g") return Family::gaussian;
  if (name == "sparse_sign" || name == "sp0") return Family::sparse_sign;
  if (name == "srtt" || name == "rfd") return Family::srtt;
  if (name == "identity") return Family::identity;
  return std::nullopt;
}

void EnsembleSpec::validate() const {
  require(rows >= 1 && cols >= 1, ErrorCategory::config, "ensemble needs rows, cols >= 1");
  require(static_cast<std::uint8_t>(family) <= 3, ErrorCategory::config, "unknown ensemble family");
  if (family == Family::identity)
    require(rows == cols, ErrorCategory::config,
            "identity ensemble must be square, got " + std::to_string(rows) + "x" +
                std::to_string(cols));
  if (family == Family::srtt)
    require(rows <= cols, ErrorCategory::config,
            "srtt cannot subsample " + std::to_string(rows) + " rows from " +
                std::to_string(cols));
}

Matrix materialize(const EnsembleSpec& spec) {
  spec.validate();
  switch (spec.family) {
    case Family::gaussian: return gaussian(spec);
    case Family::sparse_sign: return sparse_sign(spec);
    case Family::srtt: return srtt(spec);
    case Family::identity: return Matrix::Identity(spec.rows, spec.cols);
  }
  fail(ErrorCategory::config, "unknown ensemble family");
}

Matrix dct_matrix(Index n) {
  Matrix t(n, n);
  const double nd = static_cast<double>(n);
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < n; ++i)
      t(k, i) = (k == 0 ? std::sqrt(1.0 / nd) : std::sqrt(2.0 / nd)) *
                std::cos(std::numbers::pi * static_cast<double>((2 * i + 1) * k) / (2.0 * nd));
  return t;
}

JlStatistics jl_distortion(const EnsembleSpec& spec, const MatrixRef& points, Index trials,
                           double eps) {
  require(static_cast<Index>(points.rows()) == spec.cols, ErrorCategory::shape,
          "points must have length " + std::to_string(spec.cols));
  require(trials >= 1, ErrorCategory::config, "need at least one trial");
  for (Eigen::Index p = 0; p < points.cols(); ++p)
    require(std::abs(points.col(p).norm() - 1.0) <= 1e-10, ErrorCategory::shape,
            "point " + std::to_string(p) + " is not unit norm");

  JlStatistics stats;
  stats.max_distortion.reserve(trials);
  Index failures = 0;
  for (Index t = 0; t < trials; ++t) {
    EnsembleSpec trial_spec = spec;
    trial_spec.seed = derive_seed(spec.seed, "jl", t);
    const Matrix images = materialize(trial_spec) * points;
    double worst = 0.0;
    for (Eigen::Index p = 0; p < images.cols(); ++p)
      worst = std::max(worst, std::abs(images.col(p).squaredNorm() - 1.0));
    stats.max_distortion.push_back(worst);
    if (worst > eps) ++failures;
  }
  stats.failure_rate = static_cast<double>(failures) / static_cast<double>(trials);
  return stats;
}

}  // namespace tsketch
