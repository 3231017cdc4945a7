#include "tsketch/recovery.hpp"

#include <string>

#include "tsketch/error.hpp"

namespace tsketch {
namespace {

constexpr double kRankTolerance = 1e-12;

void check_factors(const std::vector<Matrix>& factors, Index order) {
  require(factors.size() == order, ErrorCategory::shape,
          "need one factor per mode, got " + std::to_string(factors.size()));
  for (const auto& q : factors)
    require(q.cols() == factors.front().cols(), ErrorCategory::rank,
            "all factors must share the same rank");
}

// Mode-by-mode least squares: each pass replaces mode i of `t` by the
// solution of ops[i] * H_new = t_[i].
DenseTensor solve_modewise(DenseTensor t, const std::vector<Matrix>& ops) {
  for (Index i = 0; i < ops.size(); ++i) {
    const Matrix& a = ops[i];
    require(static_cast<Index>(a.rows()) == t.dim(i), ErrorCategory::shape,
            "mode " + std::to_string(i) + ": measurement rows do not match the sketch");
    require(a.rows() >= a.cols(), ErrorCategory::rank,
            "mode " + std::to_string(i) + ": sketch dimension " + std::to_string(a.rows()) +
                " is below the rank " + std::to_string(a.cols()));
    Matrix solved;
    try {
      solved = solve_least_squares(a, unfold(t, i));
    } catch (const Error& e) {
      fail(e.category(), "mode " + std::to_string(i) + ": " + e.what());
    }
    Shape shape = t.shape();
    shape[i] = static_cast<Index>(a.cols());
    t = fold(solved, shape, i);
  }
  return t;
}

}  // namespace

Shape TuckerFactorization::shape() const {
  Shape s;
  for (const auto& q : factors) s.push_back(static_cast<Index>(q.rows()));
  return s;
}

Matrix solve_least_squares(const MatrixRef& a, const MatrixRef& b) {
  require(a.rows() == b.rows(), ErrorCategory::shape, "least squares: row mismatch");
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(kRankTolerance);
  require(qr.rank() == a.cols(), ErrorCategory::singular,
          "system matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
              std::to_string(a.cols()) + ")");
  return qr.solve(b);
}

void normalize_column_signs(Matrix& q) {
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    Eigen::Index arg = 0;
    q.col(c).cwiseAbs().maxCoeff(&arg);
    if (q(arg, c) < 0.0) q.col(c) = -q.col(c);
  }
}

Matrix leading_left_singular_vectors(const MatrixRef& a, Index r) {
  const auto limit = static_cast<Index>(std::min(a.rows(), a.cols()));
  require(r >= 1 && r <= limit, ErrorCategory::rank,
          "rank " + std::to_string(r) + " exceeds the " + std::to_string(limit) +
              " available singular vectors");
  Matrix u;
  if (a.cols() > a.rows()) {
    // A^T = Q R, so A = R^T Q^T shares its left singular vectors with R^T.
    Eigen::HouseholderQR<Matrix> qr(a.transpose());
    const Matrix rt = qr.matrixQR().topRows(a.rows()).triangularView<Eigen::Upper>().toDenseMatrix().transpose();
    Eigen::BDCSVD<Matrix> svd(rt, Eigen::ComputeThinU);
    u = svd.matrixU().leftCols(r);
  } else {
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU);
    u = svd.matrixU().leftCols(r);
  }
  normalize_column_signs(u);
  return u;
}

std::vector<Matrix> recover_factors(const SketchBundle& bundle, Index r) {
  const SketchPlan& plan = bundle.plan;
  require(bundle.loo.size() == plan.order(), ErrorCategory::shape,
          "bundle needs one leave-one-out sketch per mode");
  std::vector<Matrix> factors;
  for (Index i = 0; i < plan.order(); ++i) {
    const EnsembleSpec diag = plan.loo_spec(i, i);
    Matrix f;
    if (diag.family == Family::identity) {
      f = bundle.loo[i];
    } else {
      try {
        f = solve_least_squares(materialize(diag), bundle.loo[i]);
      } catch (const Error& e) {
        fail(e.category(), "mode " + std::to_string(i) + " diagonal map: " + e.what());
      }
    }
    factors.push_back(leading_left_singular_vectors(f, r));
  }
  return factors;
}

DenseTensor recover_core_onepass(const DenseTensor& core_sketch, const std::vector<Matrix>& phi,
                                 const std::vector<Matrix>& factors) {
  check_factors(factors, core_sketch.order());
  require(phi.size() == factors.size(), ErrorCategory::shape, "need one core map per mode");
  std::vector<Matrix> ops;
  for (Index i = 0; i < factors.size(); ++i) {
    require(phi[i].cols() == factors[i].rows(), ErrorCategory::shape,
            "core map and factor disagree on mode " + std::to_string(i));
    ops.push_back(phi[i] * factors[i]);
  }
  return solve_modewise(core_sketch, ops);
}

DenseTensor recover_core_recycled(const DenseTensor& loo_tensor, const std::vector<Matrix>& omega,
                                  const std::vector<Matrix>& factors) {
  check_factors(factors, loo_tensor.order());
  require(omega.size() == factors.size(), ErrorCategory::shape, "need one map per mode");
  std::vector<Matrix> ops;
  for (Index i = 0; i < factors.size(); ++i) {
    if (omega[i].size() == 0) {
      ops.push_back(factors[i]);
      continue;
    }
    require(omega[i].cols() == factors[i].rows(), ErrorCategory::shape,
            "map and factor disagree on mode " + std::to_string(i));
    ops.push_back(omega[i] * factors[i]);
  }
  return solve_modewise(loo_tensor, ops);
}

DenseTensor compute_core_twopass(const DenseTensor& x, const std::vector<Matrix>& factors) {
  check_factors(factors, x.order());
  DenseTensor g = x;
  for (Index i = 0; i < factors.size(); ++i) {
    require(static_cast<Index>(factors[i].rows()) == x.dim(i), ErrorCategory::shape,
            "factor " + std::to_string(i) + " does not match the tensor");
    g = mode_product(g, factors[i].transpose(), i);
  }
  return g;
}

TuckerFactorization one_pass(const SketchBundle& bundle, Index r) {
  require(!bundle.partial, ErrorCategory::config, "one-pass recovery needs a complete bundle");
  TuckerFactorization out;
  out.factors = recover_factors(bundle, r);
  std::vector<Matrix> phi;
  for (Index i = 0; i < bundle.plan.order(); ++i) phi.push_back(materialize(bundle.plan.core_spec(i)));
  require(bundle.plan.m_c >= r, ErrorCategory::rank,
          "core sketch dimension " + std::to_string(bundle.plan.m_c) + " is below the rank");
  out.core = recover_core_onepass(bundle.core, phi, out.factors);
  return out;
}

TuckerFactorization one_pass_recycled(const SketchBundle& bundle, Index r, Index j) {
  require(!bundle.partial, ErrorCategory::config, "one-pass recovery needs a complete bundle");
  const SketchPlan& plan = bundle.plan;
  require(plan.loo_kind == LooKind::kronecker, ErrorCategory::config,
          "recycled core recovery needs a kronecker bundle");
  require(j < plan.order(), ErrorCategory::shape, "mode out of range");
  require(plan.m >= r, ErrorCategory::rank, "sketch dimension m is below the rank");
  TuckerFactorization out;
  out.factors = recover_factors(bundle, r);
  std::vector<Matrix> omega;
  for (Index i = 0; i < plan.order(); ++i) {
    const EnsembleSpec spec = plan.loo_spec(j, i);
    omega.push_back(spec.family == Family::identity ? Matrix{} : materialize(spec));
  }
  out.core = recover_core_recycled(bundle.loo_tensor(j), omega, out.factors);
  return out;
}

TuckerFactorization two_pass(const SketchBundle& bundle, const DenseTensor& x, Index r) {
  require(x.shape() == bundle.plan.shape, ErrorCategory::shape,
          "tensor shape does not match the bundle's plan");
  TuckerFactorization out;
  out.factors = recover_factors(bundle, r);
  out.core = compute_core_twopass(x, out.factors);
  return out;
}

DenseTensor reconstruct(const TuckerFactorization& tucker) {
  check_factors(tucker.factors, tucker.core.order());
  DenseTensor x = tucker.core;
  for (Index i = 0; i < tucker.factors.size(); ++i) x = mode_product(x, tucker.factors[i], i);
  return x;
}

}  // namespace tsketch
