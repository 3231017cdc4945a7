#include "tsketch/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "tsketch/error.hpp"

namespace tsketch::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in host order, which must be little-endian");

using Magic = std::array<char, 4>;
constexpr Magic kTensorMagic{'T', 'N', 'S', 'R'};
constexpr Magic kChunkMagic{'T', 'S', 'K', 'C'};
constexpr Magic kBundleMagic{'T', 'S', 'K', 'B'};
constexpr Magic kTuckerMagic{'T', 'U', 'C', 'K'};

// Sanity bound on any dimension read from disk.
constexpr std::uint64_t kMaxEntries = std::uint64_t{1} << 40;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_doubles(std::ostream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  require(in.gcount() == sizeof(T), ErrorCategory::io, "unexpected end of file");
  return value;
}

std::vector<double> get_doubles(std::istream& in, std::uint64_t count) {
  require(count <= kMaxEntries, ErrorCategory::io, "implausible array length in file");
  std::vector<double> data(count);
  const auto bytes = static_cast<std::streamsize>(count * sizeof(double));
  in.read(reinterpret_cast<char*>(data.data()), bytes);
  require(in.gcount() == bytes, ErrorCategory::io, "unexpected end of file in array data");
  return data;
}

void put_header(std::ostream& out, const Magic& magic) {
  out.write(magic.data(), magic.size());
  put<std::uint32_t>(out, kFormatVersion);
}

void expect_header(std::istream& in, const Magic& magic) {
  Magic found{};
  in.read(found.data(), found.size());
  require(in.gcount() == 4 && found == magic, ErrorCategory::io,
          "bad magic, expected " + std::string(magic.data(), magic.size()));
  const auto version = get<std::uint32_t>(in);
  require(version == kFormatVersion, ErrorCategory::io,
          "unsupported format version " + std::to_string(version));
}

void put_shape(std::ostream& out, const Shape& shape) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (Index n : shape) put<std::uint64_t>(out, n);
}

Shape get_shape(std::istream& in) {
  const auto d = get<std::uint32_t>(in);
  require(d >= 1 && d <= 64, ErrorCategory::io, "implausible tensor order " + std::to_string(d));
  Shape shape(d);
  std::uint64_t total = 1;
  for (auto& n : shape) {
    n = get<std::uint64_t>(in);
    require(n >= 1 && n <= kMaxEntries, ErrorCategory::io, "invalid mode length in file");
    total *= n;
    require(total <= kMaxEntries, ErrorCategory::io, "tensor in file is implausibly large");
  }
  return shape;
}

void put_tensor_body(std::ostream& out, const DenseTensor& t) {
  put_shape(out, t.shape());
  put_doubles(out, t.data().data(), t.size());
}

DenseTensor get_tensor_body(std::istream& in) {
  Shape shape = get_shape(in);
  auto data = get_doubles(in, shape_size(shape));
  return DenseTensor(std::move(shape), std::move(data));
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  put_doubles(out, m.data(), static_cast<std::size_t>(m.size()));
}

Matrix get_matrix(std::istream& in) {
  const auto rows = get<std::uint64_t>(in);
  const auto cols = get<std::uint64_t>(in);
  require(rows <= kMaxEntries && cols <= kMaxEntries && rows * cols <= kMaxEntries,
          ErrorCategory::io, "implausible matrix size in file");
  const auto data = get_doubles(in, rows * cols);
  Matrix m(rows, cols);
  if (!data.empty()) std::memcpy(m.data(), data.data(), data.size() * sizeof(double));
  return m;
}

Family get_family(std::istream& in) {
  const auto raw = get<std::uint8_t>(in);
  require(raw <= 3, ErrorCategory::io, "unknown ensemble family id " + std::to_string(raw));
  return static_cast<Family>(raw);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCategory::io, "cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good() && !std::filesystem::is_directory(path), ErrorCategory::io,
          "cannot open " + path.string());
  return in;
}

void finish(std::ostream& out, const std::filesystem::path& path) {
  out.flush();
  require(out.good(), ErrorCategory::io, "write to " + path.string() + " failed");
}

}  // namespace

void write_tensor(std::ostream& out, const DenseTensor& tensor) {
  put_header(out, kTensorMagic);
  put_tensor_body(out, tensor);
}

DenseTensor read_tensor(std::istream& in) {
  expect_header(in, kTensorMagic);
  return get_tensor_body(in);
}

void save_tensor(const std::filesystem::path& path, const DenseTensor& tensor) {
  auto out = open_out(path);
  write_tensor(out, tensor);
  finish(out, path);
}

DenseTensor load_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tensor(in);
}

void write_plan(std::ostream& out, const SketchPlan& plan) {
  put_shape(out, plan.shape);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(plan.loo_kind));
  put<std::uint64_t>(out, plan.m);
  put<std::uint64_t>(out, plan.m_c);
  put<std::uint64_t>(out, plan.seed);
  for (Family f : plan.loo_families) put<std::uint8_t>(out, static_cast<std::uint8_t>(f));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(plan.diag_family));
  for (Family f : plan.core_families) put<std::uint8_t>(out, static_cast<std::uint8_t>(f));
  const auto specs = plan.all_specs();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(specs.size()));
  for (const auto& s : specs) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(s.family));
    put<std::uint64_t>(out, s.rows);
    put<std::uint64_t>(out, s.cols);
    put<std::uint64_t>(out, s.seed);
  }
}

SketchPlan read_plan(std::istream& in) {
  SketchPlan plan;
  plan.shape = get_shape(in);
  const auto kind = get<std::uint8_t>(in);
  require(kind <= 2, ErrorCategory::io, "unknown loo kind id " + std::to_string(kind));
  plan.loo_kind = static_cast<LooKind>(kind);
  plan.m = get<std::uint64_t>(in);
  plan.m_c = get<std::uint64_t>(in);
  plan.seed = get<std::uint64_t>(in);
  const Index d = plan.order();
  for (Index k = 0; k < d; ++k) plan.loo_families.push_back(get_family(in));
  plan.diag_family = get_family(in);
  for (Index k = 0; k < d; ++k) plan.core_families.push_back(get_family(in));

  const auto count = get<std::uint32_t>(in);
  std::vector<EnsembleSpec> stored;
  for (std::uint32_t k = 0; k < count; ++k) {
    EnsembleSpec s;
    s.family = get_family(in);
    s.rows = get<std::uint64_t>(in);
    s.cols = get<std::uint64_t>(in);
    s.seed = get<std::uint64_t>(in);
    stored.push_back(s);
  }
  try {
    plan.validate();
  } catch (const Error& e) {
    fail(ErrorCategory::io, std::string("stored plan is invalid: ") + e.what());
  }
  require(stored == plan.all_specs(), ErrorCategory::io,
          "stored ensemble specs do not match the plan they came with");
  return plan;
}

void write_bundle(std::ostream& out, const SketchBundle& bundle) {
  put_header(out, kBundleMagic);
  write_plan(out, bundle.plan);
  for (const auto& b : bundle.loo) put_matrix(out, b);
  put_tensor_body(out, bundle.core);
  put<std::uint8_t>(out, bundle.partial ? 1 : 0);
}

SketchBundle read_bundle(std::istream& in) {
  expect_header(in, kBundleMagic);
  SketchBundle bundle;
  bundle.plan = read_plan(in);
  const SketchPlan& plan = bundle.plan;
  for (Index j = 0; j < plan.order(); ++j) {
    bundle.loo.push_back(get_matrix(in));
    require(static_cast<Index>(bundle.loo.back().rows()) == plan.shape[j] &&
                static_cast<Index>(bundle.loo.back().cols()) == plan.loo_cols(j),
            ErrorCategory::io, "leave-one-out sketch " + std::to_string(j) + " has the wrong size");
  }
  bundle.core = get_tensor_body(in);
  require(bundle.core.shape() == Shape(plan.order(), plan.m_c), ErrorCategory::io,
          "core sketch has the wrong shape");
  const auto flag = get<std::uint8_t>(in);
  require(flag <= 1, ErrorCategory::io, "bad partial flag");
  bundle.partial = flag == 1;
  return bundle;
}

void save_bundle(const std::filesystem::path& path, const SketchBundle& bundle) {
  auto out = open_out(path);
  write_bundle(out, bundle);
  finish(out, path);
}

SketchBundle load_bundle(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_bundle(in);
}

void write_tucker(std::ostream& out, const TuckerFactorization& tucker) {
  put_header(out, kTuckerMagic);
  const Index d = tucker.order();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (const auto& q : tucker.factors) put<std::uint64_t>(out, static_cast<std::uint64_t>(q.rows()));
  put<std::uint64_t>(out, tucker.rank());
  put_doubles(out, tucker.core.data().data(), tucker.core.size());
  for (const auto& q : tucker.factors) put_doubles(out, q.data(), static_cast<std::size_t>(q.size()));
  put<std::uint8_t>(out, 1);
}

TuckerFactorization read_tucker(std::istream& in) {
  expect_header(in, kTuckerMagic);
  const auto d = get<std::uint32_t>(in);
  require(d >= 1 && d <= 64, ErrorCategory::io, "implausible order in factorization");
  std::vector<std::uint64_t> n(d);
  for (auto& v : n) {
    v = get<std::uint64_t>(in);
    require(v >= 1 && v <= kMaxEntries, ErrorCategory::io, "invalid mode length");
  }
  const auto r = get<std::uint64_t>(in);
  require(r >= 1 && r <= kMaxEntries, ErrorCategory::io, "invalid rank");
  TuckerFactorization out;
  Shape core_shape(d, r);
  out.core = DenseTensor(core_shape, get_doubles(in, shape_size(core_shape)));
  for (std::uint32_t k = 0; k < d; ++k) {
    const auto data = get_doubles(in, n[k] * r);
    Matrix q(n[k], r);
    std::memcpy(q.data(), data.data(), data.size() * sizeof(double));
    out.factors.push_back(std::move(q));
  }
  const auto flag = get<std::uint8_t>(in);
  require(flag <= 1, ErrorCategory::io, "bad sign-convention flag");
  return out;
}

void save_tucker(const std::filesystem::path& path, const TuckerFactorization& tucker) {
  auto out = open_out(path);
  write_tucker(out, tucker);
  finish(out, path);
}

TuckerFactorization load_tucker(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tucker(in);
}

void save_chunk_stream(const std::filesystem::path& path, const DenseTensor& tensor, Index slabs) {
  const Index n_last = tensor.dim(tensor.order() - 1);
  require(slabs >= 1 && slabs <= n_last, ErrorCategory::config,
          "slab count must lie in [1, " + std::to_string(n_last) + "]");
  auto out = open_out(path);
  put_header(out, kChunkMagic);
  put_shape(out, tensor.shape());
  Index start = 0;
  for (Index s = 0; s < slabs; ++s) {
    const Index count = n_last / slabs + (s < n_last % slabs ? 1 : 0);
    const SlabChunk chunk = make_chunk(tensor, start, count);
    put<std::uint64_t>(out, chunk.start);
    put<std::uint64_t>(out, chunk.count);
    put_doubles(out, chunk.payload.data().data(), chunk.payload.size());
    start += count;
  }
  finish(out, path);
}

ChunkStreamReader::ChunkStreamReader(const std::filesystem::path& path) : in_(open_in(path)) {
  expect_header(in_, kChunkMagic);
  shape_ = get_shape(in_);
}

bool ChunkStreamReader::next(SlabChunk& chunk) {
  if (in_.peek() == std::char_traits<char>::eof()) return false;
  chunk.start = get<std::uint64_t>(in_);
  chunk.count = get<std::uint64_t>(in_);
  const Index n_last = shape_.back();
  require(chunk.start <= n_last && chunk.count <= n_last - chunk.start, ErrorCategory::io,
          "chunk record runs past the last mode");
  if (chunk.count == 0) {
    chunk.payload = DenseTensor{};
    return true;
  }
  Shape shape = shape_;
  shape.back() = chunk.count;
  auto data = get_doubles(in_, shape_size(shape));
  chunk.payload = DenseTensor(std::move(shape), std::move(data));
  return true;
}

}  // namespace tsketch::io
