#include "tsketch/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "tsketch/error.hpp"
#include "tsketch/random.hpp"

namespace tsketch {
namespace {

Index product_except(const Shape& shape, Index skip) {
  Index p = 1;
  for (Index k = 0; k < shape.size(); ++k)
    if (k != skip) p *= shape[k];
  return p;
}

Index ipow(Index base, Index exp) {
  Index out = 1;
  for (Index k = 0; k < exp; ++k) out *= base;
  return out;
}

// Zero-pads mode `mode` of t out to `full`, placing t's slab at `offset`.
DenseTensor embed(const DenseTensor& t, Index mode, Index offset, Index full) {
  Shape shape = t.shape();
  const Index len = shape[mode];
  shape[mode] = full;
  DenseTensor out(shape);
  Index lo = 1, hi = 1;
  for (Index k = 0; k < mode; ++k) lo *= shape[k];
  for (Index k = mode + 1; k < shape.size(); ++k) hi *= shape[k];
  for (Index h = 0; h < hi; ++h)
    for (Index i = 0; i < len; ++i)
      for (Index l = 0; l < lo; ++l) out[l + lo * (offset + i + full * h)] = t[l + lo * (i + len * h)];
  return out;
}

// Applies the columns [offset, offset + t.dim(mode)) of `op` along `mode`.
// `identity` skips the multiply; a partial slab is then just re-positioned.
DenseTensor apply_op(const DenseTensor& t, const Matrix& op, bool identity, Index mode,
                     Index offset) {
  const Index len = t.dim(mode);
  if (identity) {
    const auto full = static_cast<Index>(op.cols());
    return len == full ? t : embed(t, mode, offset, full);
  }
  return mode_product(t, op.middleCols(offset, len), mode);
}

// out[k, ...] = sum_{i_l} t[..., k at mode p, ..., i_l at mode l, ...] * w(k, i_l):
// the row-matched contraction behind the face-splitting product.
DenseTensor contract_matched(const DenseTensor& t, const MatrixRef& w, Index p, Index l) {
  const Index d = t.order();
  Shape out_shape;
  for (Index k = 0; k < d; ++k)
    if (k != l) out_shape.push_back(t.dim(k));
  DenseTensor out(out_shape);

  std::vector<Index> out_stride(d, 0);
  Index stride = 1;
  for (Index k = 0; k < d; ++k) {
    if (k == l) continue;
    out_stride[k] = stride;
    stride *= t.dim(k);
  }

  std::vector<Index> idx(d, 0);
  Index out_pos = 0;
  const auto src = t.data();
  auto dst = out.data();
  for (Index e = 0; e < t.size(); ++e) {
    dst[out_pos] += src[e] * w(idx[p], idx[l]);
    for (Index k = 0; k < d; ++k) {
      if (++idx[k] < t.dim(k)) {
        out_pos += out_stride[k];
        break;
      }
      out_pos -= out_stride[k] * (t.dim(k) - 1);
      idx[k] = 0;
    }
  }
  return out;
}

bool is_identity(const EnsembleSpec& spec) { return spec.family == Family::identity; }

// Contributions of a slab whose last mode covers [start, start + t.dim(d-1)).

DenseTensor kron_contribution(const SketchPlan& plan, const PlanMatrices& mats,
                              const DenseTensor& slab, Index start, Index j) {
  const Index d = plan.order();
  DenseTensor t = slab;
  for (Index i = 0; i < d; ++i) {
    if (i == j) continue;
    t = apply_op(t, mats.omega[j][i], is_identity(plan.loo_spec(j, i)), i,
                 i == d - 1 ? start : 0);
  }
  return apply_op(t, mats.omega[j][j], is_identity(plan.loo_spec(j, j)), j,
                  j == d - 1 ? start : 0);
}

// Left-multiplies an n_j-row slab contribution by the diagonal map.
Matrix apply_diag(const SketchPlan& plan, const PlanMatrices& mats, const Matrix& m, Index j,
                  Index offset) {
  const Matrix& diag = mats.omega[j][j];
  if (!is_identity(plan.loo_spec(j, j))) return diag.middleCols(offset, m.rows()) * m;
  const auto full = static_cast<Index>(diag.cols());
  if (static_cast<Index>(m.rows()) == full) return m;
  Matrix out = Matrix::Zero(full, m.cols());
  out.middleRows(offset, m.rows()) = m;
  return out;
}

Matrix khat_contribution(const SketchPlan& plan, const PlanMatrices& mats,
                         const DenseTensor& slab, Index start, Index j) {
  const Index d = plan.order();
  auto slice = [&](Index i, Index len) {
    return mats.omega[j][i].middleCols(i == d - 1 ? start : 0, len);
  };
  std::vector<Index> rest;
  for (Index i = 0; i < d; ++i)
    if (i != j) rest.push_back(i);

  const Index p = rest.front();
  DenseTensor t = mode_product(slab, slice(p, slab.dim(p)), p);
  // Mode indices shift down once a contracted mode disappears.
  for (Index q = rest.size(); q-- > 1;) {
    const Index l = rest[q];
    t = contract_matched(t, slice(l, t.dim(l)), p, l);
  }
  Matrix m = unfold(t, j < p ? 0 : 1);
  m *= khatri_rao_scale(plan);
  return apply_diag(plan, mats, m, j, j == d - 1 ? start : 0);
}

Matrix unstructured_contribution(const SketchPlan& plan, const PlanMatrices& mats,
                                 const DenseTensor& slab, Index start, Index j) {
  const Index d = plan.order();
  const Matrix& omega = mats.omega_minus[j];
  const Matrix xj = unfold(slab, j);
  if (j == d - 1) return apply_diag(plan, mats, xj * omega.transpose(), j, start);
  const Index inner = product_except(slab.shape(), j) / slab.dim(d - 1);
  const Matrix m = xj * omega.middleCols(start * inner, xj.cols()).transpose();
  return apply_diag(plan, mats, m, j, 0);
}

DenseTensor core_contribution(const SketchPlan& plan, const PlanMatrices& mats,
                              const DenseTensor& slab, Index start) {
  const Index d = plan.order();
  DenseTensor t = slab;
  for (Index i = 0; i < d; ++i)
    t = apply_op(t, mats.phi[i], is_identity(plan.core_spec(i)), i, i == d - 1 ? start : 0);
  return t;
}

Shape kron_loo_shape(const SketchPlan& plan, Index j) {
  Shape shape(plan.order(), plan.m);
  shape[j] = plan.shape[j];
  return shape;
}

void check_input(const DenseTensor& x, const SketchPlan& plan) {
  require(x.shape() == plan.shape, ErrorCategory::shape, "tensor shape does not match plan");
}

void check_memory(const SketchPlan& plan) {
  const std::uint64_t cap = unstructured_memory_cap_bytes();
  for (Index j = 0; j < plan.order(); ++j) {
    const double bytes = 8.0 * static_cast<double>(plan.m) *
                         static_cast<double>(product_except(plan.shape, j));
    require(bytes <= static_cast<double>(cap), ErrorCategory::config,
            "unstructured sketching map needs " + std::to_string(bytes / 1048576.0) +
                " MB, over the TSKETCH_MEM_CAP_MB cap");
  }
}

}  // namespace

std::string_view to_string(LooKind kind) noexcept {
  switch (kind) {
    case LooKind::kronecker: return "kronecker";
    case LooKind::khatri_rao: return "khatri_rao";
    case LooKind::unstructured: return "unstructured";
  }
  return "unknown";
}

std::optional<LooKind> parse_loo_kind(std::string_view name) noexcept {
  if (name == "kronecker" || name == "kron") return LooKind::kronecker;
  if (name == "khatri_rao" || name == "khat") return LooKind::khatri_rao;
  if (name == "unstructured") return LooKind::unstructured;
  return std::nullopt;
}

SketchPlan SketchPlan::uniform(Shape shape, LooKind kind, Index m, Index m_c, std::uint64_t seed,
                               Family loo, Family core, Family diag) {
  SketchPlan plan;
  const Index d = shape.size();
  plan.shape = std::move(shape);
  plan.loo_kind = kind;
  plan.m = m;
  plan.m_c = m_c;
  plan.loo_families.assign(d, loo);
  plan.diag_family = diag;
  plan.core_families.assign(d, core);
  plan.seed = seed;
  return plan;
}

void SketchPlan::validate() const {
  const Index d = order();
  require(d >= 2, ErrorCategory::config, "leave-one-out sketching needs at least two modes");
  for (Index n : shape) require(n >= 1, ErrorCategory::config, "mode lengths must be positive");
  require(m >= 1 && m_c >= 1, ErrorCategory::config, "sketch dimensions must be positive");
  require(static_cast<std::uint8_t>(loo_kind) <= 2, ErrorCategory::config, "unknown loo kind");
  require(loo_families.size() == d && core_families.size() == d, ErrorCategory::config,
          "need one loo and one core family per mode");
  require(diag_family == Family::identity || diag_family == Family::gaussian,
          ErrorCategory::config, "diagonal maps must be identity or gaussian");
  for (const auto& spec : all_specs()) spec.validate();
  if (loo_kind == LooKind::unstructured) check_memory(*this);
}

EnsembleSpec SketchPlan::loo_spec(Index j, Index i) const {
  if (i == j) return {diag_family, shape[j], shape[j], derive_seed(seed, "loo", j, j)};
  return {loo_families[i], m, shape[i], derive_seed(seed, "loo", j, i)};
}

EnsembleSpec SketchPlan::core_spec(Index i) const {
  return {core_families[i], m_c, shape[i], derive_seed(seed, "core", i)};
}

EnsembleSpec SketchPlan::unstructured_spec(Index j) const {
  return {loo_families.front(), m, product_except(shape, j), derive_seed(seed, "unstructured", j)};
}

std::vector<EnsembleSpec> SketchPlan::all_specs() const {
  std::vector<EnsembleSpec> specs;
  const Index d = order();
  for (Index j = 0; j < d; ++j) {
    if (loo_kind == LooKind::unstructured) {
      specs.push_back(loo_spec(j, j));
      specs.push_back(unstructured_spec(j));
    } else {
      for (Index i = 0; i < d; ++i) specs.push_back(loo_spec(j, i));
    }
  }
  for (Index i = 0; i < d; ++i) specs.push_back(core_spec(i));
  return specs;
}

Index SketchPlan::loo_cols(Index /*j*/) const {
  return loo_kind == LooKind::kronecker ? ipow(m, order() - 1) : m;
}

Index SketchPlan::loo_entry_count() const {
  Index total = 0;
  for (Index j = 0; j < order(); ++j) total += shape[j] * loo_cols(j);
  return total;
}

Index SketchPlan::core_entry_count() const { return ipow(m_c, order()); }

Index SketchBundle::entry_count() const {
  Index total = core.size();
  for (const auto& b : loo) total += static_cast<Index>(b.size());
  return total;
}

DenseTensor SketchBundle::loo_tensor(Index j) const {
  require(plan.loo_kind == LooKind::kronecker, ErrorCategory::config,
          "only kronecker sketches have a tensor form");
  require(j < loo.size(), ErrorCategory::shape, "mode out of range");
  return fold(loo[j], kron_loo_shape(plan, j), j);
}

SlabChunk make_chunk(const DenseTensor& tensor, Index start, Index count) {
  const Index d = tensor.order();
  const Index n_last = tensor.dim(d - 1);
  require(start + count <= n_last, ErrorCategory::shape, "chunk runs past the last mode");
  SlabChunk chunk{start, count, {}};
  if (count == 0) return chunk;
  Shape shape = tensor.shape();
  shape[d - 1] = count;
  const Index slab = tensor.size() / n_last;
  const auto src = tensor.data().subspan(start * slab, count * slab);
  chunk.payload = DenseTensor(shape, std::vector<double>(src.begin(), src.end()));
  return chunk;
}

PlanMatrices PlanMatrices::materialize(const SketchPlan& plan) {
  plan.validate();
  const Index d = plan.order();
  PlanMatrices mats;
  mats.omega.resize(d);
  for (Index j = 0; j < d; ++j) {
    mats.omega[j].resize(d);
    for (Index i = 0; i < d; ++i) {
      if (plan.loo_kind == LooKind::unstructured && i != j) continue;
      mats.omega[j][i] = tsketch::materialize(plan.loo_spec(j, i));
    }
  }
  if (plan.loo_kind == LooKind::unstructured)
    for (Index j = 0; j < d; ++j) mats.omega_minus.push_back(tsketch::materialize(plan.unstructured_spec(j)));
  for (Index i = 0; i < d; ++i) mats.phi.push_back(tsketch::materialize(plan.core_spec(i)));
  return mats;
}

double khatri_rao_scale(const SketchPlan& plan) {
  return std::pow(static_cast<double>(plan.m), (static_cast<double>(plan.order()) - 2.0) / 2.0);
}

Matrix khatri_rao_composite(const SketchPlan& plan, Index j) {
  require(plan.loo_kind == LooKind::khatri_rao, ErrorCategory::config, "not a khatri_rao plan");
  Matrix composite;
  for (Index i = plan.order(); i-- > 0;) {
    if (i == j) continue;
    const Matrix part = materialize(plan.loo_spec(j, i));
    composite = composite.size() == 0 ? part : face_split(composite, part);
  }
  return khatri_rao_scale(plan) * composite;
}

std::uint64_t unstructured_memory_cap_bytes() {
  std::uint64_t mb = 1024;
  if (const char* env = std::getenv("TSKETCH_MEM_CAP_MB")) {
    char* end = nullptr;
    const auto parsed = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') mb = parsed;
  }
  return mb * 1024ULL * 1024ULL;
}

std::vector<Matrix> kron_loo_sketch(const DenseTensor& x, const SketchPlan& plan) {
  require(plan.loo_kind == LooKind::kronecker, ErrorCategory::config, "plan is not kronecker");
  check_input(x, plan);
  const auto mats = PlanMatrices::materialize(plan);
  std::vector<Matrix> out;
  for (Index j = 0; j < plan.order(); ++j) out.push_back(unfold(kron_contribution(plan, mats, x, 0, j), j));
  return out;
}

std::vector<Matrix> khat_loo_sketch(const DenseTensor& x, const SketchPlan& plan) {
  require(plan.loo_kind == LooKind::khatri_rao, ErrorCategory::config, "plan is not khatri_rao");
  check_input(x, plan);
  const auto mats = PlanMatrices::materialize(plan);
  std::vector<Matrix> out;
  for (Index j = 0; j < plan.order(); ++j) out.push_back(khat_contribution(plan, mats, x, 0, j));
  return out;
}

std::vector<Matrix> unstructured_loo_sketch(const DenseTensor& x, const SketchPlan& plan) {
  require(plan.loo_kind == LooKind::unstructured, ErrorCategory::config,
          "plan is not unstructured");
  check_input(x, plan);
  const auto mats = PlanMatrices::materialize(plan);
  std::vector<Matrix> out;
  for (Index j = 0; j < plan.order(); ++j)
    out.push_back(unstructured_contribution(plan, mats, x, 0, j));
  return out;
}

DenseTensor core_sketch(const DenseTensor& x, const SketchPlan& plan) {
  check_input(x, plan);
  const auto mats = PlanMatrices::materialize(plan);
  return core_contribution(plan, mats, x, 0);
}

Matrix apply_loo_map(const DenseTensor& x, Index j, const MatrixRef& diag,
                     const MatrixRef& omega_minus) {
  require(j < x.order(), ErrorCategory::shape, "mode out of range");
  require(static_cast<Index>(omega_minus.cols()) == product_except(x.shape(), j),
          ErrorCategory::shape, "leave-one-out map has the wrong column count");
  Matrix b = unfold(x, j) * omega_minus.transpose();
  if (diag.size() == 0) return b;
  require(static_cast<Index>(diag.cols()) == x.dim(j), ErrorCategory::shape,
          "diagonal map has the wrong column count");
  return diag * b;
}

SketchBundle sketch(const DenseTensor& x, const SketchPlan& plan) {
  check_input(x, plan);
  SketchAccumulator acc(plan);
  acc.update(make_chunk(x, 0, x.dim(x.order() - 1)));
  return acc.finalize();
}

SketchAccumulator::SketchAccumulator(SketchPlan plan)
    : plan_(std::move(plan)), matrices_(PlanMatrices::materialize(plan_)) {
  const Index d = plan_.order();
  for (Index j = 0; j < d; ++j) {
    if (plan_.loo_kind == LooKind::kronecker)
      kron_loo_.emplace_back(kron_loo_shape(plan_, j));
    else
      matrix_loo_.push_back(Matrix::Zero(plan_.shape[j], plan_.m));
  }
  core_ = DenseTensor(Shape(d, plan_.m_c));
}

Index SketchAccumulator::covered() const noexcept {
  Index total = 0;
  for (const auto& [a, b] : coverage_) total += b - a;
  return total;
}

void SketchAccumulator::claim(Index start, Index end) {
  auto it = std::lower_bound(coverage_.begin(), coverage_.end(), std::pair{start, end});
  const bool clash_next = it != coverage_.end() && it->first < end;
  const bool clash_prev = it != coverage_.begin() && std::prev(it)->second > start;
  require(!clash_next && !clash_prev, ErrorCategory::shape,
          "chunk [" + std::to_string(start) + ", " + std::to_string(end) +
              ") overlaps data already sketched");
  coverage_.insert(it, {start, end});
}

void SketchAccumulator::update(SlabChunk&& chunk) {
  const SlabChunk local = std::move(chunk);
  chunk.payload = DenseTensor{};
  if (local.count == 0) return;

  const Index d = plan_.order();
  const DenseTensor& slab = local.payload;
  require(slab.order() == d, ErrorCategory::shape, "chunk payload has the wrong order");
  for (Index k = 0; k + 1 < d; ++k)
    require(slab.dim(k) == plan_.shape[k], ErrorCategory::shape,
            "chunk payload shape does not match plan");
  require(slab.dim(d - 1) == local.count, ErrorCategory::shape,
          "chunk payload length does not match its count");
  require(local.start + local.count <= plan_.shape[d - 1], ErrorCategory::shape,
          "chunk runs past the last mode");
  claim(local.start, local.start + local.count);

  for (Index j = 0; j < d; ++j) {
    switch (plan_.loo_kind) {
      case LooKind::kronecker:
        kron_loo_[j] += kron_contribution(plan_, matrices_, slab, local.start, j);
        break;
      case LooKind::khatri_rao:
        matrix_loo_[j] += khat_contribution(plan_, matrices_, slab, local.start, j);
        break;
      case LooKind::unstructured:
        matrix_loo_[j] += unstructured_contribution(plan_, matrices_, slab, local.start, j);
        break;
    }
  }
  core_ += core_contribution(plan_, matrices_, slab, local.start);
}

void SketchAccumulator::merge(const SketchAccumulator& other) {
  require(plan_ == other.plan_, ErrorCategory::config, "cannot merge accumulators with different plans");
  for (const auto& [a, b] : other.coverage_) claim(a, b);
  for (Index j = 0; j < kron_loo_.size(); ++j) kron_loo_[j] += other.kron_loo_[j];
  for (Index j = 0; j < matrix_loo_.size(); ++j) matrix_loo_[j] += other.matrix_loo_[j];
  core_ += other.core_;
}

SketchBundle SketchAccumulator::finalize() const {
  SketchBundle bundle;
  bundle.plan = plan_;
  if (plan_.loo_kind == LooKind::kronecker) {
    for (Index j = 0; j < kron_loo_.size(); ++j) bundle.loo.push_back(unfold(kron_loo_[j], j));
  } else {
    bundle.loo = matrix_loo_;
  }
  bundle.core = core_;
  bundle.partial = !complete();
  return bundle;
}

}  // namespace tsketch
