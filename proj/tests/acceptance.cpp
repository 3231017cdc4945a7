// Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <string>

#include "test_support.hpp"
#include "tsketch/eval.hpp"
#include "tsketch/experiment.hpp"
#include "tsketch/recovery.hpp"
#include "tsketch/sketch.hpp"

using namespace tsketch;
using namespace tsketch::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s %2d %-34s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

double seconds(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::vector<double> errors_of(const std::vector<ResultRow>& rows, Variant v, Index m = 0) {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.variant == v && (m == 0 || r.m == m)) out.push_back(r.relative_error);
  return out;
}

ExperimentConfig noisy_lowrank(Index n, Index r, Index m, Index m_c, Index trials, std::uint64_t seed) {
  ExperimentConfig c;
  c.n = n;
  c.d = 3;
  c.r_true = c.r_fit = r;
  c.snr_db = 30.0;
  c.m = {m};
  c.m_c = {m_c};
  c.trials = trials;
  c.seed = seed;
  c.compute_tails = false;
  c.variants = {Variant::one_pass};
  return c;
}

Index pow_index(Index base, Index e) {
  Index out = 1;
  for (Index k = 0; k < e; ++k) out *= base;
  return out;
}

Index expected_storage(LooKind kind, Index n, Index d, Index m, Index m_c) {
  const Index loo = kind == LooKind::kronecker ? d * n * pow_index(m, d - 1) : d * m * n;
  return loo + pow_index(m_c, d);
}

// Rows shared between criteria 2-5.
std::vector<ResultRow> rows_c2, rows_c3;

}  // namespace

int main() {
  std::printf("tsketch acceptance suite\n");

  criterion(1, "perfect recovery", [] {
    const auto start = Clock::now();
    ExperimentConfig c;
    c.n = 40;
    c.d = 3;
    c.r_true = c.r_fit = 5;
    c.m = {15};
    c.m_c = {15};
    c.trials = 50;
    c.seed = 101;
    c.compute_tails = false;
    c.variants = {Variant::one_pass};
    const auto errs = errors_of(run_experiment(c), Variant::one_pass);
    int ok = 0;
    double worst = 0.0;
    for (double e : errs) {
      ok += e <= 1e-8;
      worst = std::max(worst, e);
    }
    const double t = seconds(start);
    return Outcome{ok >= 48 && t < 10.0,
                   fmt("%d/50 trials <= 1e-8 (need 48), max %.2e, %.1f s (limit 10 s)", ok, worst, t)};
  });

  criterion(2, "noise floor at 30 dB", [] {
    const auto start = Clock::now();
    ExperimentConfig c = noisy_lowrank(100, 10, 50, 100, 50, 202);
    c.variants = {Variant::one_pass, Variant::two_pass};
    c.compute_tails = true;
    c.bound_eps = 0.99;
    rows_c2 = run_experiment(c);
    const double one = median(errors_of(rows_c2, Variant::one_pass));
    const double two = median(errors_of(rows_c2, Variant::two_pass));
    const double t = seconds(start);
    return Outcome{one <= 5e-3 && two <= one && t < 120.0,
                   fmt("median one-pass %.3e (<= 5e-3), two-pass %.3e (<= one-pass), %.0f s (limit 120 s)", one,
                       two, t)};
  });

  criterion(3, "super-diagonal convergence", [] {
    const auto start = Clock::now();
    ExperimentConfig c;
    c.generator = Generator::superdiag_exp;
    c.n = 100;
    c.d = 3;
    c.r_true = c.r_fit = 10;
    c.m = {20, 40, 80};
    c.m_c = {40, 80, 160};
    c.pairing = Pairing::zip;
    c.trials = 20;
    c.seed = 303;
    c.bound_eps = 0.99;
    c.variants = {Variant::one_pass, Variant::two_pass};
    rows_c3 = run_experiment(c);
    std::vector<double> med;
    for (Index m : c.m) med.push_back(median(errors_of(rows_c3, Variant::one_pass, m)));
    const double baseline = tail_baseline(gen_superdiag_exp(100, 3, 10), 10);
    const bool monotone = med[1] <= med[0] && med[2] <= med[1];
    const double ratio = med[2] / baseline;
    const double t = seconds(start);
    return Outcome{monotone && ratio <= 1.10 && t < 120.0,
                   fmt("medians %.4f, %.4f, %.4f (non-increasing: %s); m=80 / tail baseline %.4f = %.3f (<= 1.10), "
                       "%.0f s (limit 120 s)",
                       med[0], med[1], med[2], monotone ? "yes" : "no", baseline, ratio, t)};
  });

  criterion(4, "theoretical bound never violated", [] {
    int checked = 0, violated = 0;
    for (const auto* rows : {&rows_c2, &rows_c3})
      for (const auto& r : *rows)
        if (r.variant == Variant::one_pass) {
          ++checked;
          violated += !(r.abs_error <= r.bound_rhs);
        }
    int witnesses = 0, held = 0;
    for (const auto& r : rows_c3)
      if (r.variant == Variant::two_pass && r.m == 80) {
        ++witnesses;
        held += r.abs_error * r.abs_error <= (1.5 / 0.5) * r.tail_sum;
      }
    const bool ok = checked > 0 && violated == 0 && witnesses > 0 && held * 100 >= 95 * witnesses;
    return Outcome{ok, fmt("one-pass bound (eps 0.99) violated in %d/%d trials; two-pass witness held in %d/%d "
                           "(need 95%%)",
                           violated, checked, held, witnesses)};
  });

  criterion(5, "storage accounting exact", [] {
    int checked = 0, wrong = 0;
    for (const auto* rows : {&rows_c2, &rows_c3})
      for (const auto& r : *rows) {
        ++checked;
        wrong += r.storage_entries != expected_storage(LooKind::kronecker, 100, 3, r.m, r.m_c);
      }
    std::mt19937_64 rng(5);
    for (Index d : {2, 3, 4})
      for (Index n : {5, 8}) {
        const DenseTensor x = random_tensor(Shape(d, n), rng);
        for (LooKind kind : {LooKind::kronecker, LooKind::khatri_rao})
          for (Index m : {2, 3, 5})
            for (Index m_c : {2, 4}) {
              const auto bundle = sketch(x, SketchPlan::uniform(x.shape(), kind, m, m_c, 9));
              ++checked;
              wrong += bundle.entry_count() != expected_storage(kind, n, d, m, m_c);
            }
      }
    return Outcome{wrong == 0 && checked > 0, fmt("%d/%d bundles match d n m^(d-1) + m_c^d or d m n + m_c^d",
                                                  checked - wrong, checked)};
  });

  criterion(6, "kronecker vs khatri-rao", [] {
    const auto inst = gen_lowrank(100, 3, 10, 6);
    const auto kron = sketch(inst.tensor, SketchPlan::uniform(inst.tensor.shape(), LooKind::kronecker, 25, 50, 1));
    const auto khat = sketch(inst.tensor, SketchPlan::uniform(inst.tensor.shape(), LooKind::khatri_rao, 225, 50, 1));
    bool shapes = true;
    for (Index j = 0; j < 3; ++j) {
      shapes &= kron.loo[j].rows() == 100 && kron.loo[j].cols() == 625;
      shapes &= khat.loo[j].rows() == 100 && khat.loo[j].cols() == 225;
    }
    ExperimentConfig c = noisy_lowrank(100, 10, 25, 50, 50, 606);
    const double e_kron = median(errors_of(run_experiment(c), Variant::one_pass));
    c.loo_kind = LooKind::khatri_rao;
    c.m = {225};
    const double e_khat = median(errors_of(run_experiment(c), Variant::one_pass));
    const double ratio = std::max(e_kron, e_khat) / std::min(e_kron, e_khat);
    return Outcome{shapes && ratio <= 2.0,
                   fmt("B_j shapes 100x625 / 100x225: %s; median one-pass kron %.3e, khatri-rao %.3e, ratio %.2f "
                       "(<= 2)",
                       shapes ? "yes" : "no", e_kron, e_khat, ratio)};
  });

  criterion(7, "streaming equals batch", [] {
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
      const DenseTensor x = random_tensor({30, 30, 30}, rng);
      for (LooKind kind : {LooKind::kronecker, LooKind::khatri_rao, LooKind::unstructured}) {
        const auto plan = SketchPlan::uniform(x.shape(), kind, 6, 5, 700 + inst);
        const auto batch = sketch(x, plan);
        for (Index slabs : {1, 2, 7}) {
          SketchAccumulator acc(plan);
          for (Index s = 0; s < slabs; ++s) {
            const Index lo = s * 30 / slabs, hi = (s + 1) * 30 / slabs;
            acc.update(make_chunk(x, lo, hi - lo));
          }
          const auto streamed = acc.finalize();
          worst = std::max(worst, rel_diff(streamed.core, batch.core));
          for (Index j = 0; j < 3; ++j) worst = std::max(worst, rel_diff(streamed.loo[j], batch.loo[j]));
          if (streamed.partial) worst = 1.0;
        }
      }
    }
    return Outcome{worst <= 1e-10, fmt("largest relative difference %.2e over 20 x 3 kinds x {1,2,7} slabs (<= 1e-10)",
                                       worst)};
  });

  criterion(8, "oracle equivalence", [] {
    std::mt19937_64 rng(8);
    const DenseTensor x = random_tensor({4, 3, 2}, rng);
    double kron_err = 0.0, khat_err = 0.0, core_err = 0.0;

    auto kplan = SketchPlan::uniform(x.shape(), LooKind::kronecker, 3, 2, 81);
    kplan.diag_family = Family::gaussian;
    const auto kb = kron_loo_sketch(x, kplan);
    for (Index j = 0; j < 3; ++j) {
      std::vector<Matrix> maps;  // vec(X x_1 W_1 x_2 W_2 x_3 W_3) = (W_3 (x) W_2 (x) W_1) vec(X)
      for (Index i = 0; i < 3; ++i) maps.push_back(materialize(kplan.loo_spec(j, i)));
      const Eigen::VectorXd expected = kron_chain_oracle(maps) * vec(x);
      Shape out_shape(3, 3);  // m on compressed modes, n_j on mode j
      out_shape[j] = x.dim(j);
      const DenseTensor got = fold(kb[j], out_shape, j);
      kron_err = std::max(kron_err, rel_diff(Matrix(vec(got)), Matrix(expected)));
    }

    auto hplan = SketchPlan::uniform(x.shape(), LooKind::khatri_rao, 5, 2, 82);
    hplan.diag_family = Family::gaussian;
    const auto hb = khat_loo_sketch(x, hplan);
    for (Index j = 0; j < 3; ++j) khat_err = std::max(khat_err, rel_diff(hb[j], khatri_rao_fiber_oracle(x, hplan, j)));

    for (int t = 0; t < 10; ++t) {
      std::vector<Matrix> phi, q, pinvs;
      for (Index i = 0; i < 3; ++i) {
        phi.push_back(random_matrix(6, 12, rng));
        q.push_back(random_orthonormal(12, 3, rng));
        pinvs.push_back((phi.back() * q.back()).completeOrthogonalDecomposition().pseudoInverse());
      }
      const DenseTensor bc = random_tensor({6, 6, 6}, rng);
      const Eigen::VectorXd expected = kron_chain_oracle(pinvs) * vec(bc);
      core_err = std::max(core_err, rel_diff(Matrix(vec(recover_core_onepass(bc, phi, q))), Matrix(expected)));
    }
    return Outcome{kron_err <= 1e-12 && khat_err <= 1e-12 && core_err <= 1e-10,
                   fmt("kronecker %.1e (<= 1e-12), khatri-rao %.1e (<= 1e-12), core %.1e (<= 1e-10)", kron_err,
                       khat_err, core_err)};
  });

  criterion(9, "budget allocation trend", [] {
    ExperimentConfig c = noisy_lowrank(100, 10, 13, 12, 100, 909);
    c.m = {13, 11};
    c.m_c = {12, 36};
    c.pairing = Pairing::zip;
    const auto rows = run_experiment(c);
    const double a = median(errors_of(rows, Variant::one_pass, 13));
    const double b = median(errors_of(rows, Variant::one_pass, 11));
    return Outcome{b < a, fmt("median one-pass (13,12) %.3e vs (11,36) %.3e, ratio %.1f (need (11,36) lower)", a, b,
                              a / b)};
  });

  criterion(10, "ensemble robustness", [] {
    const std::vector<std::pair<const char*, std::vector<Family>>> ensembles{
        {"g", {Family::gaussian}},
        {"sp0", {Family::sparse_sign}},
        {"rfd", {Family::srtt}},
        {"mix", {Family::gaussian, Family::srtt, Family::sparse_sign}}};
    std::vector<double> med;
    std::string detail;
    for (const auto& [name, families] : ensembles) {
      ExperimentConfig c = noisy_lowrank(100, 10, 50, 100, 50, 1010);
      c.loo_families = families;
      c.core_families = families;
      med.push_back(median(errors_of(run_experiment(c), Variant::one_pass)));
      detail += fmt("%s %.3e, ", name, med.back());
    }
    const double ratio = *std::max_element(med.begin(), med.end()) / *std::min_element(med.begin(), med.end());
    return Outcome{ratio <= 2.0, detail + fmt("max/min %.2f (<= 2)", ratio)};
  });

  criterion(11, "sketching dominates recovery time", [] {
    ExperimentConfig c = noisy_lowrank(100, 10, 25, 50, 7, 1111);
    std::vector<double> sketch_t, recover_t;
    for (const auto& r : run_experiment(c)) {
      sketch_t.push_back(r.t_sketch);
      recover_t.push_back(r.t_factor + r.t_core);
    }
    const double s = median(sketch_t), rec = median(recover_t);
    return Outcome{s > rec, fmt("median sketch %.3f s vs factor+core %.3f s", s, rec)};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
