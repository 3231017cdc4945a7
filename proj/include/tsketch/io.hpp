#ifndef TSKETCH_IO_HPP
#define TSKETCH_IO_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>

#include "tsketch/recovery.hpp"
#include "tsketch/sketch.hpp"

// Binary formats. All integers and floats are little-endian.
//
//   TNSR  magic, u32 version, u32 d, d x u64 shape, prod(shape) f64
//   TSKC  magic, u32 version, u32 d, d x u64 shape,
//         then records {u64 start, u64 count, payload f64} until EOF
//   TSKB  magic, u32 version, plan, d x {u64 rows, u64 cols, f64 data},
//         core as {u32 d, d x u64 shape, f64 data}, u8 partial
//   TUCK  magic, u32 version, u32 d, d x u64 n, u64 r, r^d f64 core,
//         d x (n_i * r) f64 factors (column-major), u8 sign convention
//
// A plan is u32 d, d x u64 shape, u8 loo kind, u64 m, u64 m_c, u64 seed,
// d x u8 loo family, u8 diag family, d x u8 core family, then u32 count and
// that many ensemble specs {u8 family, u64 rows, u64 cols, u64 seed}.

namespace tsketch::io {

inline constexpr std::uint32_t kFormatVersion = 1;

void write_tensor(std::ostream& out, const DenseTensor& tensor);
DenseTensor read_tensor(std::istream& in);
void save_tensor(const std::filesystem::path& path, const DenseTensor& tensor);
DenseTensor load_tensor(const std::filesystem::path& path);

void write_plan(std::ostream& out, const SketchPlan& plan);
SketchPlan read_plan(std::istream& in);

void write_bundle(std::ostream& out, const SketchBundle& bundle);
SketchBundle read_bundle(std::istream& in);
void save_bundle(const std::filesystem::path& path, const SketchBundle& bundle);
SketchBundle load_bundle(const std::filesystem::path& path);

/// The sign-convention flag is written as 1: columns follow
/// normalize_column_signs.
void write_tucker(std::ostream& out, const TuckerFactorization& tucker);
TuckerFactorization read_tucker(std::istream& in);
void save_tucker(const std::filesystem::path& path, const TuckerFactorization& tucker);
TuckerFactorization load_tucker(const std::filesystem::path& path);

/// Writes `tensor` as a chunk stream of `slabs` near-equal last-mode slabs.
void save_chunk_stream(const std::filesystem::path& path, const DenseTensor& tensor, Index slabs);

/// Sequential reader for TSKC streams; holds at most one chunk at a time.
class ChunkStreamReader {
 public:
  explicit ChunkStreamReader(const std::filesystem::path& path);

  const Shape& shape() const noexcept { return shape_; }
  /// False at end of stream.
  bool next(SlabChunk& chunk);

 private:
  std::ifstream in_;
  Shape shape_;
};

}  // namespace tsketch::io

#endif  // TSKETCH_IO_HPP
