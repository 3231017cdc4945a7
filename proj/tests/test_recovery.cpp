#include <doctest.h>

#include "test_support.hpp"
#include "tsketch/error.hpp"
#include "tsketch/eval.hpp"
#include "tsketch/recovery.hpp"

using namespace tsketch;
using namespace tsketch::testing;

namespace {

Matrix pinv(const Matrix& a) { return a.completeOrthogonalDecomposition().pseudoInverse(); }

double orthonormality_defect(const Matrix& q) {
  return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).norm();
}

// Singular vectors from a full Jacobi SVD, independent of the QR-then-SVD route.
Matrix jacobi_left_vectors(const Matrix& a, Index r) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
  Matrix u = svd.matrixU().leftCols(static_cast<Eigen::Index>(r));
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    Eigen::Index arg = 0;
    u.col(c).cwiseAbs().maxCoeff(&arg);
    if (u(arg, c) < 0.0) u.col(c) *= -1.0;
  }
  return u;
}

}  // namespace

TEST_CASE("solve_least_squares") {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(8, 3, rng), x = random_matrix(3, 2, rng);
  CHECK(rel_diff(solve_least_squares(a, a * x), x) <= 1e-12);
  Matrix deficient = a;
  deficient.col(2) = deficient.col(0) * 2.0;
  try {
    solve_least_squares(deficient, a * x);
    FAIL("expected singular");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::singular);
  }
}

TEST_CASE("leading_left_singular_vectors") {
  std::mt19937_64 rng(2);
  for (auto [rows, cols] : {std::pair<Index, Index>{6, 20}, {20, 6}, {7, 7}}) {
    const Matrix a = random_matrix(rows, cols, rng);
    const Matrix q = leading_left_singular_vectors(a, 3);
    CHECK(orthonormality_defect(q) <= 1e-12);
    CHECK(rel_diff(q, jacobi_left_vectors(a, 3)) <= 1e-9);
  }
  try {
    leading_left_singular_vectors(random_matrix(4, 9, rng), 5);
    FAIL("expected rank error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::rank);
  }
}

TEST_CASE("recover_factors") {
  SUBCASE("exact rank gives the true subspaces") {
    const auto inst = gen_lowrank(30, 3, 4, 3);
    const auto plan = SketchPlan::uniform(inst.tensor.shape(), LooKind::kronecker, 6, 6, 4);
    const auto q = recover_factors(sketch(inst.tensor, plan), 4);
    for (Index i = 0; i < 3; ++i) {
      CHECK(orthonormality_defect(q[i]) <= 1e-10);
      CHECK(max_principal_angle(q[i], inst.factors[i]) <= 1e-8);
    }
  }
  SUBCASE("identity sketch is plain HOSVD") {
    std::mt19937_64 rng(5);
    const DenseTensor x = random_tensor({6, 5, 4}, rng);
    // B_j = X_[j] is built directly; the plan only supplies identity diagonals.
    SketchBundle bundle;
    bundle.plan = SketchPlan::uniform(x.shape(), LooKind::kronecker, 2, 2, 0);
    for (Index j = 0; j < 3; ++j) bundle.loo.push_back(unfold(x, j));
    const auto q = recover_factors(bundle, 3);
    for (Index j = 0; j < 3; ++j) CHECK(rel_diff(q[j], jacobi_left_vectors(unfold(x, j), 3)) <= 1e-9);
  }
  SUBCASE("non-identity diagonal map is undone") {
    const auto inst = gen_lowrank(12, 3, 2, 6);
    auto plan = SketchPlan::uniform(inst.tensor.shape(), LooKind::khatri_rao, 5, 3, 7);
    plan.diag_family = Family::gaussian;
    const auto q = recover_factors(sketch(inst.tensor, plan), 2);
    for (Index i = 0; i < 3; ++i) CHECK(max_principal_angle(q[i], inst.factors[i]) <= 1e-6);
  }
}

TEST_CASE("noisy factor angle shrinks as m grows") {
  const Index n = 100, r = 10;
  const int trials = 7;
  std::vector<double> medians;
  for (Index m : {15, 25, 50}) {
    std::vector<double> angles;
    for (int t = 0; t < trials; ++t) {
      const auto inst = gen_lowrank(n, 3, r, 100 + t);
      const DenseTensor x = add_noise_snr(inst.tensor, 30.0, 200 + t);
      const auto plan = SketchPlan::uniform(x.shape(), LooKind::kronecker, m, r, 300 + t);
      const auto q = recover_factors(sketch(x, plan), r);
      double worst = 0.0;
      for (Index i = 0; i < 3; ++i) worst = std::max(worst, max_principal_angle(q[i], inst.factors[i]));
      angles.push_back(worst);
    }
    medians.push_back(median(angles));
  }
  CAPTURE(medians[0]);
  CAPTURE(medians[1]);
  CAPTURE(medians[2]);
  CHECK(medians[0] > medians[1]);
  CHECK(medians[1] > medians[2]);
}

TEST_CASE("recover_core_onepass") {
  std::mt19937_64 rng(8);
  SUBCASE("identity maps and identity columns restrict the sketch") {
    const DenseTensor bc = random_tensor({4, 4, 4}, rng);
    const std::vector<Matrix> phi(3, Matrix::Identity(4, 4));
    const std::vector<Matrix> q(3, Matrix::Identity(4, 2));
    const DenseTensor h = recover_core_onepass(bc, phi, q);
    CHECK(h.shape() == Shape{2, 2, 2});
    for (Index a = 0; a < 2; ++a)
      for (Index b = 0; b < 2; ++b)
        for (Index c = 0; c < 2; ++c) {
          const std::array<Index, 3> idx{a, b, c};
          CHECK(h(idx) == doctest::Approx(bc(idx)).epsilon(1e-14));
        }
  }
  SUBCASE("true factors recover the tensor") {
    const auto inst = gen_lowrank(15, 3, 3, 9);
    const auto plan = SketchPlan::uniform(inst.tensor.shape(), LooKind::kronecker, 5, 5, 10);
    const auto mats = PlanMatrices::materialize(plan);
    const DenseTensor h = recover_core_onepass(core_sketch(inst.tensor, plan), mats.phi, inst.factors);
    CHECK(relative_error(reconstruct({h, inst.factors}), inst.tensor) <= 1e-10);
  }
  SUBCASE("mode-at-a-time equals the direct pseudo-inverse product") {
    for (int t = 0; t < 5; ++t) {
      std::vector<Matrix> phi, q, pinvs;
      for (Index i = 0; i < 3; ++i) {
        phi.push_back(random_matrix(6, 12, rng));
        q.push_back(random_orthonormal(12, 3, rng));
        pinvs.push_back(pinv(phi.back() * q.back()));
      }
      const DenseTensor bc = random_tensor({6, 6, 6}, rng);
      const DenseTensor h = recover_core_onepass(bc, phi, q);
      const Eigen::VectorXd expected = kron_chain_oracle(pinvs) * vec(bc);
      CHECK(rel_diff(Matrix(vec(h)), Matrix(expected)) <= 1e-10);
    }
  }
  SUBCASE("rank-deficient map names its mode") {
    std::vector<Matrix> phi(3, random_matrix(4, 6, rng));
    phi[1].col(0).setZero();
    phi[1].col(1).setZero();
    phi[1].col(2).setZero();
    std::vector<Matrix> q(3, Matrix::Identity(6, 2));
    try {
      recover_core_onepass(random_tensor({4, 4, 4}, rng), phi, q);
      FAIL("expected singular");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::singular);
      CHECK(std::string(e.what()).find("mode 1") != std::string::npos);
    }
  }
  SUBCASE("sketch smaller than rank") {
    std::vector<Matrix> phi(3, random_matrix(2, 6, rng));
    std::vector<Matrix> q(3, random_orthonormal(6, 3, rng));
    try {
      recover_core_onepass(random_tensor({2, 2, 2}, rng), phi, q);
      FAIL("expected rank error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::rank);
    }
  }
}

TEST_CASE("recover_core_recycled") {
  SUBCASE("exact rank") {
    const auto inst = gen_lowrank(20, 3, 3, 11);
    const auto plan = SketchPlan::uniform(inst.tensor.shape(), LooKind::kronecker, 5, 5, 12);
    for (Index j = 0; j < 3; ++j) {
      const auto est = one_pass_recycled(sketch(inst.tensor, plan), 3, j);
      CHECK(relative_error(reconstruct(est), inst.tensor) <= 1e-10);
    }
  }
  SUBCASE("identity ensembles reduce to the two-pass core") {
    std::mt19937_64 rng(13);
    const DenseTensor x = random_tensor({5, 5, 5}, rng);
    const auto plan = SketchPlan::uniform(x.shape(), LooKind::kronecker, 5, 5, 0, Family::identity);
    const auto bundle = sketch(x, plan);
    const auto q = recover_factors(bundle, 3);
    const DenseTensor h = recover_core_recycled(bundle.loo_tensor(0), {Matrix{}, Matrix{}, Matrix{}}, q);
    CHECK(rel_diff(h, compute_core_twopass(x, q)) <= 1e-12);
  }
  SUBCASE("noisy error stays within twice the core-sketch estimate") {
    std::vector<double> recycled, standard;
    for (int t = 0; t < 50; ++t) {
      const auto inst = gen_lowrank(60, 3, 5, 400 + t);
      const DenseTensor x = add_noise_snr(inst.tensor, 30.0, 500 + t);
      const auto plan = SketchPlan::uniform(x.shape(), LooKind::kronecker, 20, 20, 600 + t);
      const auto bundle = sketch(x, plan);
      recycled.push_back(relative_error(reconstruct(one_pass_recycled(bundle, 5)), x, inst.tensor));
      standard.push_back(relative_error(reconstruct(one_pass(bundle, 5)), x, inst.tensor));
    }
    CAPTURE(median(recycled));
    CAPTURE(median(standard));
    CHECK(median(recycled) <= 2.0 * median(standard));
  }
  SUBCASE("rejects non-kronecker bundles") {
    const auto inst = gen_lowrank(10, 3, 2, 14);
    const auto plan = SketchPlan::uniform(inst.tensor.shape(), LooKind::khatri_rao, 5, 5, 15);
    CHECK_THROWS_AS(one_pass_recycled(sketch(inst.tensor, plan), 2), Error);
  }
}

TEST_CASE("compute_core_twopass") {
  std::mt19937_64 rng(16);
  SUBCASE("true factors reproduce an exact-rank tensor") {
    const auto inst = gen_lowrank(12, 3, 3, 17);
    const DenseTensor g = compute_core_twopass(inst.tensor, inst.factors);
    CHECK(rel_diff(reconstruct({g, inst.factors}), inst.tensor) <= 1e-12);
  }
  SUBCASE("Pythagoras for the optimal core") {
    for (int t = 0; t < 5; ++t) {
      const DenseTensor x = random_tensor({7, 6, 5}, rng);
      std::vector<Matrix> q{random_orthonormal(7, 3, rng), random_orthonormal(6, 3, rng),
                            random_orthonormal(5, 3, rng)};
      const DenseTensor rec = reconstruct({compute_core_twopass(x, q), q});
      const double lhs = std::pow(norm(x - rec), 2) + std::pow(norm(rec), 2);
      CHECK(lhs == doctest::Approx(std::pow(norm(x), 2)).epsilon(1e-10));
    }
  }
  SUBCASE("matches the unfolded Kronecker formula") {
    const DenseTensor x = random_tensor({5, 4, 3}, rng);
    std::vector<Matrix> q{random_orthonormal(5, 2, rng), random_orthonormal(4, 2, rng),
                          random_orthonormal(3, 2, rng)};
    const Matrix expected = q[0].transpose() * unfold(x, 0) * kron_chain_oracle({q[1], q[2]});
    CHECK(rel_diff(unfold(compute_core_twopass(x, q), 0), expected) <= 1e-12);
  }
  SUBCASE("shape mismatch") {
    std::vector<Matrix> q(3, random_orthonormal(4, 2, rng));
    CHECK_THROWS_AS(compute_core_twopass(random_tensor({4, 4, 5}, rng), q), Error);
  }
}

TEST_CASE("one_pass and two_pass") {
  SUBCASE("exact rank 10, n=40") {
    const auto inst = gen_lowrank(40, 3, 10, 18);
    const auto plan = SketchPlan::uniform(inst.tensor.shape(), LooKind::kronecker, 15, 15, 19);
    const auto bundle = sketch(inst.tensor, plan);
    const auto one = one_pass(bundle, 10);
    CHECK(relative_error(reconstruct(one), inst.tensor) <= 1e-9);
    for (const auto& q : one.factors) CHECK(orthonormality_defect(q) <= 1e-10);
    const auto two = two_pass(bundle, inst.tensor, 10);
    CHECK(relative_error(reconstruct(two), inst.tensor) <= 1e-9);
  }
  SUBCASE("two-pass median error does not exceed one-pass") {
    std::vector<double> one, two;
    for (int t = 0; t < 50; ++t) {
      const auto inst = gen_lowrank(20, 3, 3, 700 + t);
      const DenseTensor x = add_noise_snr(inst.tensor, 20.0, 800 + t);
      const auto plan = SketchPlan::uniform(x.shape(), LooKind::kronecker, 6, 6, 900 + t);
      const auto bundle = sketch(x, plan);
      one.push_back(relative_error(reconstruct(one_pass(bundle, 3)), x, inst.tensor));
      two.push_back(relative_error(reconstruct(two_pass(bundle, x, 3)), x, inst.tensor));
    }
    CHECK(median(two) <= median(one));
  }
  SUBCASE("no compression") {
    std::mt19937_64 rng(20);
    const DenseTensor x = random_tensor({4, 4, 4}, rng);
    const auto plan = SketchPlan::uniform(x.shape(), LooKind::kronecker, 4, 4, 0, Family::identity,
                                          Family::identity);
    const auto bundle = sketch(x, plan);
    CHECK(rel_diff(reconstruct(one_pass(bundle, 4)), x) <= 1e-12);
    CHECK(rel_diff(reconstruct(two_pass(bundle, x, 4)), x) <= 1e-12);
  }
  SUBCASE("errors") {
    const auto inst = gen_lowrank(10, 3, 2, 21);
    const auto plan = SketchPlan::uniform(inst.tensor.shape(), LooKind::kronecker, 4, 3, 22);
    SketchAccumulator acc(plan);
    acc.update(make_chunk(inst.tensor, 0, 5));
    CHECK_THROWS_AS(one_pass(acc.finalize(), 2), Error);
    const auto bundle = sketch(inst.tensor, plan);
    try {
      one_pass(bundle, 4);  // m_c = 3 < r
      FAIL("expected rank error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::rank);
    }
    CHECK_THROWS_AS(two_pass(bundle, DenseTensor({10, 10, 9}), 2), Error);
  }
}

TEST_CASE("property: perfect recovery of exact-rank tensors") {
  for (Index d : {3, 4})
    for (Index n : {10, 20})
      for (Index r : {2, 5}) {
        CAPTURE(d);
        CAPTURE(n);
        CAPTURE(r);
        int ok = 0;
        for (int t = 0; t < 50; ++t) {
          const auto inst = gen_lowrank(n, d, r, 1000 + t);
          const auto plan = SketchPlan::uniform(inst.tensor.shape(), LooKind::kronecker, r + 2, r + 2, 2000 + t);
          if (relative_error(reconstruct(one_pass(sketch(inst.tensor, plan), r)), inst.tensor) <= 1e-8) ++ok;
        }
        CHECK(ok >= 48);
      }
}

TEST_CASE("property: two-pass quasi-optimality witness") {
  const double eps = 0.5;
  int ok = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const auto inst = gen_lowrank(50, 3, 5, 3000 + t);
    const DenseTensor x = add_noise_snr(inst.tensor, 10.0, 3100 + t);
    const auto plan = SketchPlan::uniform(x.shape(), LooKind::kronecker, 40, 40, 3200 + t);
    const auto est = two_pass(sketch(x, plan), x, 5);
    double tails = 0.0;
    for (double delta : tail_energies(x, 5)) tails += delta;
    if (std::pow(norm(x - reconstruct(est)), 2) <= (1 + eps) / (1 - eps) * tails) ++ok;
  }
  CHECK(ok >= 19);
}

TEST_CASE("property: one-pass stays near two-pass") {
  int ok = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const auto inst = gen_lowrank(30, 3, 3, 4000 + t);
    const DenseTensor x = add_noise_snr(inst.tensor, 10.0, 4100 + t);
    const auto plan = SketchPlan::uniform(x.shape(), LooKind::kronecker, 10, 12, 4200 + t);
    const auto bundle = sketch(x, plan);
    const DenseTensor x1 = reconstruct(one_pass(bundle, 3)), x2 = reconstruct(two_pass(bundle, x, 3));
    if (norm(x1 - x2) <= std::exp(1.0) * norm(x - x2)) ++ok;
  }
  CHECK(ok >= 19);
}

TEST_CASE("reconstruct") {
  std::mt19937_64 rng(23);
  const DenseTensor x = random_tensor({3, 3, 3}, rng);
  CHECK(reconstruct({x, std::vector<Matrix>(3, Matrix::Identity(3, 3))}) == x);

  const DenseTensor core = random_tensor({2, 2, 2}, rng);
  const std::vector<Matrix> q{random_orthonormal(5, 2, rng), random_orthonormal(4, 2, rng),
                              random_orthonormal(6, 2, rng)};
  const DenseTensor rec = reconstruct({core, q});
  CHECK(rec.shape() == Shape{5, 4, 6});
  CHECK(norm(rec) == doctest::Approx(norm(core)).epsilon(1e-12));
  for (Index j = 0; j < 3; ++j) {
    std::vector<Matrix> others;
    for (Index i = 0; i < 3; ++i)
      if (i != j) others.push_back(q[i]);
    const Matrix expected = q[j] * unfold(core, j) * kron_chain_oracle(others).transpose();
    CHECK(rel_diff(unfold(rec, j), expected) <= 1e-12);
  }
  CHECK_THROWS_AS(reconstruct({core, {q[0], q[1]}}), Error);
}
