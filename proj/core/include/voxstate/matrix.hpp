#pragma once

#include <cstddef>
#include <vector>

#include "voxstate/errors.hpp"
#include "voxstate/rng.hpp"

namespace voxstate {

/**
 * Dense row-major matrix of doubles.
 *
 * All numeric work in the library runs in double precision; single
 * precision appears only at the file-format boundary. Element (i, j)
 * lives at data()[i * cols() + j].
 */
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_)
      throw config_error("Matrix: value count does not match shape");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/**
 * General matrix multiply on raw row-major buffers:
 *   C = alpha * op(A) * op(B) + beta * C
 * where op is identity or transpose. op(A) is M x K, op(B) is K x N,
 * C is M x N with leading dimension ldc.
 *
 * The accumulation order for each C element is a fixed function of the
 * shapes alone, so results are bit-identical from run to run and
 * independent of the thread count.
 */
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, double alpha, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc);

// C = A * B. Shapes must agree; throws config_error otherwise.
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A^T * B without forming the transpose.
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
// C = A * B^T without forming the transpose.
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

double frobenius_norm(const Matrix& a);

// Scales the matrix to unit Frobenius norm in place.
// A zero matrix has no scale to normalize; that raises numeric_error.
void frobenius_normalize(Matrix& a);

// Fills with independent draws from N(0, stddev^2).
void fill_normal(Matrix& a, Rng& rng, double stddev = 1.0);

}  // namespace voxstate
