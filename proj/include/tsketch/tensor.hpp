#ifndef TSKETCH_TENSOR_HPP
#define TSKETCH_TENSOR_HPP

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace tsketch {

using Index = std::size_t;
using Shape = std::vector<Index>;

/// Column-major dense matrix. Unfoldings, sketches and factor matrices all
/// live in this type.
using Matrix = Eigen::MatrixXd;
using MatrixRef = Eigen::Ref<const Matrix>;

Index shape_size(const Shape& shape);

/**
 * Dense d-mode array of doubles.
 *
 * Storage is first-mode-fastest: the entry at zero-based multi-index
 * (i_0, ..., i_{d-1}) sits at sum_k i_k * prod_{l<k} n_l. Mode indices
 * throughout the library are zero-based.
 */
class DenseTensor {
 public:
  DenseTensor() = default;
  /// Zero-filled tensor.
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  Index order() const noexcept { return shape_.size(); }
  Index dim(Index mode) const { return shape_.at(mode); }
  Index size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](Index linear) const { return data_[linear]; }
  double& operator[](Index linear) { return data_[linear]; }

  double operator()(std::span<const Index> index) const { return data_[linear_index(index)]; }
  double& operator()(std::span<const Index> index) { return data_[linear_index(index)]; }

  Index linear_index(std::span<const Index> index) const;

  DenseTensor& operator+=(const DenseTensor& other);
  DenseTensor& operator-=(const DenseTensor& other);
  DenseTensor& operator*=(double scale);

  friend DenseTensor operator+(DenseTensor lhs, const DenseTensor& rhs) { return lhs += rhs; }
  friend DenseTensor operator-(DenseTensor lhs, const DenseTensor& rhs) { return lhs -= rhs; }
  friend DenseTensor operator*(double scale, DenseTensor t) { return t *= scale; }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Mode-`mode` unfolding: n_mode rows, one column per mode fiber. Remaining
/// modes are ordered ascending with the first remaining mode fastest.
Matrix unfold(const DenseTensor& tensor, Index mode);

/// Inverse of unfold for a tensor of the given shape.
DenseTensor fold(const MatrixRef& matrix, const Shape& shape, Index mode);

/// X x_mode A, computed as fold(A * unfold(X, mode)).
DenseTensor mode_product(const DenseTensor& tensor, const MatrixRef& matrix, Index mode);

/// Applies each (matrix, mode) pair in the order given. Modes must be distinct.
DenseTensor multi_mode_product(const DenseTensor& tensor,
                               std::span<const std::pair<Matrix, Index>> factors);

double inner(const DenseTensor& a, const DenseTensor& b);
double norm(const DenseTensor& tensor);

Matrix kron(const MatrixRef& a, const MatrixRef& b);
/// Column-wise Kronecker product; column k is a_k (x) b_k.
Matrix khatri_rao(const MatrixRef& a, const MatrixRef& b);
/// Row-wise Kronecker product (face-splitting); (A . B)^T = A^T (.) B^T.
Matrix face_split(const MatrixRef& a, const MatrixRef& b);

}  // namespace tsketch

#endif  // TSKETCH_TENSOR_HPP
