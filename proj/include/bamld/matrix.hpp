#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace bamld {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const double& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  Matrix transpose() const;
  bool all_finite() const noexcept;

  /// Rows selected by index, in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// a · bᵀ without forming the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double frobenius_norm(const Matrix& a);

/// Result of a jittered Cholesky factorization.
struct CholeskyResult {
  Matrix lower;
  double jitter = 0.0;  // diagonal value added before success; 0 if none
};

/// Lower Cholesky factor of a symmetric matrix. On failure a jitter of
/// 1e-8·mean(diag) is added to the diagonal and doubled up to 6 times.
/// Throws DecompositionError carrying the last attempted jitter.
CholeskyResult cholesky_jittered(const Matrix& a);
Matrix cholesky(const Matrix& a);

/// Solves (L·Lᵀ)·x = b for every column of b.
Matrix solve_cholesky(const Matrix& lower, const Matrix& b);
std::vector<double> solve_cholesky(const Matrix& lower, std::span<const double> b);

/// Forward substitution L·x = b.
std::vector<double> solve_lower(const Matrix& lower, std::span<const double> b);

/// (L·Lᵀ)⁻¹ from the factor.
Matrix cholesky_inverse(const Matrix& lower);

/// Σ log L_ii, i.e. half the log-determinant of L·Lᵀ.
double half_log_det(const Matrix& lower);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace bamld
