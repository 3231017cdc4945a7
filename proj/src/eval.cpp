#include "tsketch/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tsketch/error.hpp"
#include "tsketch/random.hpp"

namespace tsketch {
namespace {

Eigen::VectorXd singular_values(const MatrixRef& a) {
  if (a.cols() > a.rows()) {
    Eigen::HouseholderQR<Matrix> qr(a.transpose());
    const Matrix r = qr.matrixQR().topRows(a.rows()).triangularView<Eigen::Upper>();
    return Eigen::BDCSVD<Matrix>(r).singularValues();
  }
  return Eigen::BDCSVD<Matrix>(a).singularValues();
}

void check_orthonormal(const MatrixRef& q, const char* name) {
  const Matrix gram = q.transpose() * q;
  const double defect = (gram - Matrix::Identity(q.cols(), q.cols())).norm();
  require(defect <= 1e-8, ErrorCategory::shape,
          std::string(name) + " does not have orthonormal columns");
}

Index diagonal_stride(const DenseTensor& t) {
  Index stride = 0, step = 1;
  for (Index k = 0; k < t.order(); ++k) {
    stride += step;
    step *= t.dim(k);
  }
  return stride;
}

DenseTensor superdiag(Index n, Index d, Index r, double (*tail)(Index)) {
  require(d >= 1 && n >= 1, ErrorCategory::shape, "super-diagonal tensor needs n, d >= 1");
  require(r < n, ErrorCategory::rank,
          "rank " + std::to_string(r) + " leaves no diagonal tail for n = " + std::to_string(n));
  DenseTensor x(Shape(d, n));
  const Index stride = diagonal_stride(x);
  for (Index i = 1; i <= n; ++i) x[(i - 1) * stride] = i <= r + 1 ? 1.0 : tail(i - r);
  return x;
}

}  // namespace

double relative_error(const DenseTensor& x_hat, const DenseTensor& x, const DenseTensor& x0) {
  require(x_hat.shape() == x.shape() && x.shape() == x0.shape(), ErrorCategory::shape,
          "relative error of mismatched shapes");
  const double reference = norm(x0);
  require(reference > 0.0, ErrorCategory::config, "relative error against a zero tensor");
  return norm(x_hat - x) / reference;
}

double snr_db(const DenseTensor& x, const DenseTensor& x0) {
  require(x.shape() == x0.shape(), ErrorCategory::shape, "snr of mismatched shapes");
  const double noise = norm(x0 - x);
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(norm(x) / noise);
}

DenseTensor add_noise_snr(const DenseTensor& x0, double target_db, std::uint64_t seed) {
  const double c = inner(x0, x0);
  require(c > 0.0, ErrorCategory::config, "cannot set an SNR against a zero tensor");
  require(std::isfinite(target_db), ErrorCategory::config, "target SNR must be finite");

  const CounterRng rng(derive_seed(seed, "noise"));
  DenseTensor noise(x0.shape());
  for (Index e = 0; e < noise.size(); ++e) noise[e] = rng.normal(e);

  // ||x0 + s N|| = k s ||N||  <=>  a s^2 - 2 p s - c = 0.
  const double k = std::pow(10.0, target_db / 10.0);
  const double nn = inner(noise, noise);
  const double p = inner(x0, noise);
  const double a = nn * (k * k - 1.0);
  double s = -1.0;
  if (a > 0.0) {
    const double root = std::sqrt(p * p + a * c);
    s = p >= 0.0 ? (p + root) / a : c / (root - p);
  } else if (a == 0.0) {
    if (p < 0.0) s = -c / (2.0 * p);
  } else {
    const double disc = p * p + a * c;
    if (disc >= 0.0) {
      const double root = std::sqrt(disc);
      const double r1 = (p + root) / a, r2 = (p - root) / a;
      for (double cand : {std::min(r1, r2), std::max(r1, r2)})
        if (cand > 0.0) {
          s = cand;
          break;
        }
    }
  }
  require(s > 0.0, ErrorCategory::config,
          "target SNR " + std::to_string(target_db) + " dB is unreachable for this noise draw");
  noise *= s;
  return x0 + noise;
}

double max_principal_angle(const MatrixRef& q, const MatrixRef& u) {
  require(q.rows() == u.rows() && q.cols() == u.cols(), ErrorCategory::shape,
          "principal angles need equally sized bases");
  check_orthonormal(q, "Q");
  check_orthonormal(u, "U");
  const Matrix cross = q.transpose() * u;
  const double cos_min = Eigen::JacobiSVD<Matrix>(cross).singularValues().minCoeff();
  double radians;
  if (cos_min * cos_min < 0.5) {
    radians = std::acos(std::clamp(cos_min, 0.0, 1.0));
  } else {
    // Small angles: the sine form keeps full relative accuracy.
    const Matrix residual = u - q * cross;
    const double sin_max = Eigen::JacobiSVD<Matrix>(residual).singularValues()(0);
    radians = std::asin(std::clamp(sin_max, 0.0, 1.0));
  }
  return std::clamp(radians * 180.0 / std::numbers::pi, 0.0, 90.0);
}

double tail_energy(const DenseTensor& x, Index r, Index j) {
  const Matrix xj = unfold(x, j);
  const auto limit = static_cast<Index>(std::min(xj.rows(), xj.cols()));
  require(r <= limit, ErrorCategory::rank,
          "rank " + std::to_string(r) + " exceeds unfolding dimension " + std::to_string(limit));
  const Eigen::VectorXd sigma = singular_values(xj);
  double sum = 0.0;
  for (Index i = r; i < static_cast<Index>(sigma.size()); ++i) sum += sigma(i) * sigma(i);
  return sum;
}

std::vector<double> tail_energies(const DenseTensor& x, Index r) {
  std::vector<double> out;
  for (Index j = 0; j < x.order(); ++j) out.push_back(tail_energy(x, r, j));
  return out;
}

TuckerFactorization hosvd_truncate(const DenseTensor& x, Index r) {
  TuckerFactorization out;
  for (Index j = 0; j < x.order(); ++j)
    out.factors.push_back(leading_left_singular_vectors(unfold(x, j), r));
  out.core = compute_core_twopass(x, out.factors);
  return out;
}

double bound_rhs(double eps, const std::vector<double>& deltas) {
  require(eps > 0.0 && eps < 1.0, ErrorCategory::config, "eps must lie in (0, 1)");
  double total = 0.0;
  for (double delta : deltas) {
    require(delta >= 0.0, ErrorCategory::config, "tail energies must be non-negative");
    total += delta;
  }
  return (1.0 + std::exp(eps)) * std::sqrt((1.0 + eps) / (1.0 - eps) * total);
}

LowRankInstance gen_lowrank(Index n, Index d, Index r, std::uint64_t seed) {
  require(d >= 1 && n >= 1, ErrorCategory::shape, "need n, d >= 1");
  require(r >= 1 && r <= n, ErrorCategory::rank, "need 1 <= r <= n");
  LowRankInstance out;
  out.core = DenseTensor(Shape(d, r));
  const CounterRng core_rng(derive_seed(seed, "lowrank-core"));
  for (Index e = 0; e < out.core.size(); ++e) out.core[e] = core_rng.uniform(e);

  for (Index i = 0; i < d; ++i) {
    const CounterRng rng(derive_seed(seed, "lowrank-factor", i));
    Matrix g(n, r);
    for (Index c = 0; c < r; ++c)
      for (Index k = 0; k < n; ++k) g(k, c) = rng.normal(c * n + k);
    Eigen::HouseholderQR<Matrix> qr(g);
    out.factors.push_back(qr.householderQ() * Matrix::Identity(n, r));
  }
  out.tensor = reconstruct({out.core, out.factors});
  return out;
}

DenseTensor gen_superdiag_exp(Index n, Index d, Index r) {
  return superdiag(n, d, r, [](Index k) { return std::pow(10.0, -static_cast<double>(k)); });
}

DenseTensor gen_superdiag_poly(Index n, Index d, Index r) {
  return superdiag(n, d, r, [](Index k) { return 1.0 / static_cast<double>(k); });
}

double tail_baseline(const DenseTensor& x, Index r) {
  const Index n = x.dim(0);
  for (Index k = 1; k < x.order(); ++k)
    require(x.dim(k) == n, ErrorCategory::shape, "super-diagonal tensors are cubical");
  const Index stride = diagonal_stride(x);
  double tail = 0.0;
  for (Index e = 0; e < x.size(); ++e) {
    const bool on_diagonal = e % stride == 0;
    require(on_diagonal || x[e] == 0.0, ErrorCategory::shape, "tensor is not super-diagonal");
    if (on_diagonal && e / stride >= r) tail += x[e] * x[e];
  }
  const double total = norm(x);
  require(total > 0.0, ErrorCategory::config, "tail baseline of a zero tensor");
  return std::sqrt(tail) / total;
}

}  // namespace tsketch
