#ifndef TSKETCH_SKETCH_HPP
#define TSKETCH_SKETCH_HPP

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "tsketch/ensemble.hpp"
#include "tsketch/tensor.hpp"

namespace tsketch {

enum class LooKind : std::uint8_t { kronecker = 0, khatri_rao = 1, unstructured = 2 };

std::string_view to_string(LooKind kind) noexcept;
std::optional<LooKind> parse_loo_kind(std::string_view name) noexcept;

/**
 * A complete measurement campaign.
 *
 * Omega(j, i) is the matrix applied to mode i when building the sketch that
 * leaves mode j uncompressed; Omega(j, j) is the square "diagonal" map.
 * Phi(i) compresses mode i for the core sketch. For kronecker plans each
 * off-diagonal Omega(j, i) is m x n_i and B_j has prod_{i != j} m columns.
 * For khatri_rao and unstructured plans `m` is the composite row count and
 * B_j has m columns.
 */
struct SketchPlan {
  Shape shape;
  LooKind loo_kind = LooKind::kronecker;
  Index m = 1;
  Index m_c = 1;
  /// Family of Omega(j, i) for each compressed mode i. Length d.
  std::vector<Family> loo_families;
  Family diag_family = Family::identity;
  /// Family of Phi(i). Length d.
  std::vector<Family> core_families;
  std::uint64_t seed = 0;

  /// Broadcasts single families over every mode.
  static SketchPlan uniform(Shape shape, LooKind kind, Index m, Index m_c, std::uint64_t seed,
                            Family loo = Family::gaussian, Family core = Family::gaussian,
                            Family diag = Family::identity);

  Index order() const noexcept { return shape.size(); }
  void validate() const;

  EnsembleSpec loo_spec(Index j, Index i) const;
  EnsembleSpec core_spec(Index i) const;
  /// Dense Omega_{-j} for unstructured plans: m x prod_{i != j} n_i.
  EnsembleSpec unstructured_spec(Index j) const;
  /// Every spec the plan draws from, in a fixed order.
  std::vector<EnsembleSpec> all_specs() const;

  /// Columns of B_j.
  Index loo_cols(Index j) const;
  Index loo_entry_count() const;
  Index core_entry_count() const;
  Index storage_entries() const { return loo_entry_count() + core_entry_count(); }

  friend bool operator==(const SketchPlan&, const SketchPlan&) = default;
};

struct SketchBundle {
  SketchPlan plan;
  /// B_j, n_j rows each.
  std::vector<Matrix> loo;
  DenseTensor core;
  /// Set when the bundle was finalized before every slab was seen.
  bool partial = false;

  Index entry_count() const;
  /// The kronecker sketch B_j folded back to its d-mode form.
  DenseTensor loo_tensor(Index j) const;
};

/// A contiguous slab of the tensor along its last mode.
struct SlabChunk {
  Index start = 0;
  Index count = 0;
  /// Shape (n_0, ..., n_{d-2}, count).
  DenseTensor payload;
};

/// Slices [start, start + count) of the last mode out of `tensor`.
SlabChunk make_chunk(const DenseTensor& tensor, Index start, Index count);

/// Materialized measurement matrices of a plan.
struct PlanMatrices {
  /// omega[j][i]; identity entries stay empty.
  std::vector<std::vector<Matrix>> omega;
  std::vector<Matrix> phi;
  /// Unstructured plans only.
  std::vector<Matrix> omega_minus;

  static PlanMatrices materialize(const SketchPlan& plan);
};

/// Explicit face-split composite Omega_{-j} of a khatri_rao plan, columns in
/// unfolding order, scaled so E||Omega_{-j} x||^2 = ||x||^2 for gaussian parts.
Matrix khatri_rao_composite(const SketchPlan& plan, Index j);

/// Scale applied to the raw face-split product: m^{(d-2)/2}.
double khatri_rao_scale(const SketchPlan& plan);

/// Memory cap for the dense Omega_{-j} of unstructured plans, in bytes.
/// Reads TSKETCH_MEM_CAP_MB (default 1024).
std::uint64_t unstructured_memory_cap_bytes();

std::vector<Matrix> kron_loo_sketch(const DenseTensor& x, const SketchPlan& plan);
std::vector<Matrix> khat_loo_sketch(const DenseTensor& x, const SketchPlan& plan);
std::vector<Matrix> unstructured_loo_sketch(const DenseTensor& x, const SketchPlan& plan);
DenseTensor core_sketch(const DenseTensor& x, const SketchPlan& plan);

/// B = diag * X_[j] * omega_minus^T for an explicit leave-one-out map. An
/// empty `diag` means identity.
Matrix apply_loo_map(const DenseTensor& x, Index j, const MatrixRef& diag,
                     const MatrixRef& omega_minus);

/// Batch sketch of a fully available tensor. Same code path as a single
/// full-coverage chunk.
SketchBundle sketch(const DenseTensor& x, const SketchPlan& plan);

/**
 * One-pass accumulator over last-mode slabs.
 *
 * Every measurement is linear, so a slab contributes the sketch of the
 * tensor that is zero outside its range. update() consumes the chunk; nothing
 * from the payload survives past the call. Accumulators with the same plan
 * and disjoint coverage can be merged, which is how sharded sketching works.
 */
class SketchAccumulator {
 public:
  explicit SketchAccumulator(SketchPlan plan);

  const SketchPlan& plan() const noexcept { return plan_; }

  void update(SlabChunk&& chunk);
  void merge(const SketchAccumulator& other);

  /// Covered [start, end) ranges of the last mode, sorted.
  const std::vector<std::pair<Index, Index>>& coverage() const noexcept { return coverage_; }
  Index covered() const noexcept;
  bool complete() const noexcept { return covered() == plan_.shape.back(); }

  /// Partial coverage is allowed; the bundle is then flagged.
  SketchBundle finalize() const;

 private:
  void claim(Index start, Index end);

  SketchPlan plan_;
  PlanMatrices matrices_;
  std::vector<DenseTensor> kron_loo_;
  std::vector<Matrix> matrix_loo_;
  DenseTensor core_;
  std::vector<std::pair<Index, Index>> coverage_;
};

}  // namespace tsketch

#endif  // TSKETCH_SKETCH_HPP
