#include "tsketch/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "tsketch/error.hpp"

namespace tsketch {
namespace {

void check_shape(const Shape& shape) {
  require(!shape.empty(), ErrorCategory::shape, "tensor needs at least one mode");
  for (Index n : shape) require(n >= 1, ErrorCategory::shape, "mode lengths must be positive");
}

void check_mode(const DenseTensor& t, Index mode) {
  require(mode < t.order(), ErrorCategory::shape,
          "mode " + std::to_string(mode) + " out of range for order " + std::to_string(t.order()));
}

// Lengths of the modes before and after `mode`.
std::pair<Index, Index> split_at(const Shape& shape, Index mode) {
  Index lo = 1, hi = 1;
  for (Index k = 0; k < mode; ++k) lo *= shape[k];
  for (Index k = mode + 1; k < shape.size(); ++k) hi *= shape[k];
  return {lo, hi};
}

}  // namespace

Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  require(data_.size() == shape_size(shape_), ErrorCategory::shape,
          "data length does not match shape");
}

Index DenseTensor::linear_index(std::span<const Index> index) const {
  require(index.size() == order(), ErrorCategory::shape, "index has wrong number of modes");
  Index linear = 0, stride = 1;
  for (Index k = 0; k < order(); ++k) {
    require(index[k] < shape_[k], ErrorCategory::shape, "index out of range");
    linear += index[k] * stride;
    stride *= shape_[k];
  }
  return linear;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
  require(shape_ == other.shape_, ErrorCategory::shape, "shape mismatch in +=");
  for (Index e = 0; e < data_.size(); ++e) data_[e] += other.data_[e];
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& other) {
  require(shape_ == other.shape_, ErrorCategory::shape, "shape mismatch in -=");
  for (Index e = 0; e < data_.size(); ++e) data_[e] -= other.data_[e];
  return *this;
}

DenseTensor& DenseTensor::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

Matrix unfold(const DenseTensor& tensor, Index mode) {
  check_mode(tensor, mode);
  const Index n = tensor.dim(mode);
  const auto [lo, hi] = split_at(tensor.shape(), mode);
  Matrix out(n, lo * hi);
  const auto data = tensor.data();
  for (Index h = 0; h < hi; ++h)
    for (Index i = 0; i < n; ++i) {
      const double* src = data.data() + lo * (i + n * h);
      for (Index l = 0; l < lo; ++l) out(i, l + lo * h) = src[l];
    }
  return out;
}

DenseTensor fold(const MatrixRef& matrix, const Shape& shape, Index mode) {
  check_shape(shape);
  require(mode < shape.size(), ErrorCategory::shape, "fold mode out of range");
  const Index n = shape[mode];
  const auto [lo, hi] = split_at(shape, mode);
  require(static_cast<Index>(matrix.rows()) == n && static_cast<Index>(matrix.cols()) == lo * hi,
          ErrorCategory::shape,
          "cannot fold " + std::to_string(matrix.rows()) + "x" + std::to_string(matrix.cols()) +
              " matrix along mode " + std::to_string(mode));
  DenseTensor out(shape);
  auto data = out.data();
  for (Index h = 0; h < hi; ++h)
    for (Index i = 0; i < n; ++i) {
      double* dst = data.data() + lo * (i + n * h);
      for (Index l = 0; l < lo; ++l) dst[l] = matrix(i, l + lo * h);
    }
  return out;
}

DenseTensor mode_product(const DenseTensor& tensor, const MatrixRef& matrix, Index mode) {
  check_mode(tensor, mode);
  require(static_cast<Index>(matrix.cols()) == tensor.dim(mode), ErrorCategory::shape,
          "mode product: matrix has " + std::to_string(matrix.cols()) + " columns, mode " +
              std::to_string(mode) + " has length " + std::to_string(tensor.dim(mode)));
  require(matrix.rows() >= 1, ErrorCategory::shape, "mode product with an empty matrix");
  Shape shape = tensor.shape();
  shape[mode] = matrix.rows();
  const Matrix product = matrix * unfold(tensor, mode);
  return fold(product, shape, mode);
}

DenseTensor multi_mode_product(const DenseTensor& tensor,
                               std::span<const std::pair<Matrix, Index>> factors) {
  std::vector<bool> seen(tensor.order(), false);
  for (const auto& [a, mode] : factors) {
    check_mode(tensor, mode);
    require(!seen[mode], ErrorCategory::shape, "mode " + std::to_string(mode) + " repeated");
    seen[mode] = true;
  }
  DenseTensor out = tensor;
  for (const auto& [a, mode] : factors) out = mode_product(out, a, mode);
  return out;
}

double inner(const DenseTensor& a, const DenseTensor& b) {
  require(a.shape() == b.shape(), ErrorCategory::shape, "inner product of mismatched shapes");
  double sum = 0.0;
  for (Index e = 0; e < a.size(); ++e) sum += a[e] * b[e];
  return sum;
}

double norm(const DenseTensor& tensor) {
  // Scaled sum of squares, as in LAPACK dnrm2, so tiny residuals do not underflow.
  double scale = 0.0, ssq = 1.0;
  for (double v : tensor.data()) {
    if (v == 0.0) continue;
    const double a = std::abs(v);
    if (scale < a) {
      ssq = 1.0 + ssq * (scale / a) * (scale / a);
      scale = a;
    } else {
      ssq += (a / scale) * (a / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

Matrix kron(const MatrixRef& a, const MatrixRef& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix khatri_rao(const MatrixRef& a, const MatrixRef& b) {
  require(a.cols() == b.cols(), ErrorCategory::shape, "khatri_rao needs equal column counts");
  Matrix out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index k = 0; k < a.cols(); ++k)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index l = 0; l < b.rows(); ++l) out(i * b.rows() + l, k) = a(i, k) * b(l, k);
  return out;
}

Matrix face_split(const MatrixRef& a, const MatrixRef& b) {
  require(a.rows() == b.rows(), ErrorCategory::shape, "face_split needs equal row counts");
  Matrix out(a.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.cols(); ++i)
    for (Eigen::Index l = 0; l < b.cols(); ++l)
      for (Eigen::Index k = 0; k < a.rows(); ++k) out(k, i * b.cols() + l) = a(k, i) * b(k, l);
  return out;
}

}  // namespace tsketch
