#include "bamld/matrix.hpp"

#include <cmath>
#include <string>

#include "bamld/errors.hpp"

namespace bamld {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

// Plain Cholesky–Banachiewicz; returns false on a non-positive pivot.
bool try_cholesky(const Matrix& a, double jitter, Matrix& out) {
  const std::size_t n = a.rows();
  out = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a(i, j);
      if (i == j) sum += jitter;
      const double* li = &out(i, 0);
      const double* lj = &out(j, 0);
      for (std::size_t k = 0; k < j; ++k) sum -= li[k] * lj[k];
      if (i == j) {
        if (!(sum > 0.0) || !std::isfinite(sum)) return false;
        out(i, i) = std::sqrt(sum);
      } else {
        out(i, j) = sum / out(j, j);
      }
    }
  }
  return true;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool Matrix::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw ShapeError("select_rows: index out of range");
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.rows()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = &c(i, 0);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = &b(k, 0);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_transposed: column counts differ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator+");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator-");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

CholeskyResult cholesky_jittered(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("cholesky: matrix is not square");
  CholeskyResult result;
  if (try_cholesky(a, 0.0, result.lower)) return result;

  double mean_diag = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) mean_diag += a(i, i);
  mean_diag /= static_cast<double>(a.rows());
  double jitter = 1e-8 * std::abs(mean_diag);
  if (jitter == 0.0) jitter = 1e-8;
  for (int attempt = 0; attempt <= 6; ++attempt, jitter *= 2.0) {
    if (try_cholesky(a, jitter, result.lower)) {
      result.jitter = jitter;
      return result;
    }
  }
  throw DecompositionError("cholesky: matrix not positive definite after jitter " +
                               std::to_string(jitter / 2.0),
                           jitter / 2.0);
}

Matrix cholesky(const Matrix& a) { return cholesky_jittered(a).lower; }

std::vector<double> solve_lower(const Matrix& lower, std::span<const double> b) {
  const std::size_t n = lower.rows();
  if (b.size() != n) throw ShapeError("solve_lower: rhs length mismatch");
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = &lower(i, 0);
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= li[k] * x[k];
    x[i] = s / li[i];
  }
  return x;
}

std::vector<double> solve_cholesky(const Matrix& lower, std::span<const double> b) {
  std::vector<double> x = solve_lower(lower, b);
  const std::size_t n = lower.rows();
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * x[k];
    x[ii] = s / lower(ii, ii);
  }
  return x;
}

Matrix solve_cholesky(const Matrix& lower, const Matrix& b) {
  if (lower.rows() != lower.cols() || b.rows() != lower.rows()) {
    throw ShapeError("solve_cholesky: factor is " + std::to_string(lower.rows()) + "x" +
                     std::to_string(lower.cols()) + ", rhs has " + std::to_string(b.rows()) +
                     " rows");
  }
  Matrix x(b.rows(), b.cols());
  std::vector<double> col(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
    auto sol = solve_cholesky(lower, std::span<const double>(col));
    for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = sol[i];
  }
  return x;
}

Matrix cholesky_inverse(const Matrix& lower) {
  Matrix inv = solve_cholesky(lower, Matrix::identity(lower.rows()));
  // symmetrize away round-off
  for (std::size_t i = 0; i < inv.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = v;
      inv(j, i) = v;
    }
  return inv;
}

double half_log_det(const Matrix& lower) {
  double s = 0.0;
  for (std::size_t i = 0; i < lower.rows(); ++i) s += std::log(lower(i, i));
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace bamld
