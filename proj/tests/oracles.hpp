#pragma once

// Reference computations for the unit tests, written independently of the
// library's Cholesky-based code paths.

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "bamld/matrix.hpp"
#include "bamld/mlp.hpp"
#include "bamld/rng.hpp"

namespace oracle {

using bamld::Matrix;

inline constexpr double kLog2Pi = 1.8378770664093453;  // log(2π)

/// Inverse and log|det| by Gauss-Jordan with partial pivoting.
struct InverseResult {
  Matrix inverse;
  double log_abs_det = 0.0;
};

inline InverseResult dense_inverse(Matrix a) {
  const std::size_t n = a.rows();
  Matrix inv = Matrix::identity(n);
  double log_det = 0.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (a(piv, col) == 0.0) throw std::runtime_error("singular");
    for (std::size_t c = 0; c < n; ++c) {
      std::swap(a(piv, c), a(col, c));
      std::swap(inv(piv, c), inv(col, c));
    }
    const double d = a(col, col);
    log_det += std::log(std::abs(d));
    for (std::size_t c = 0; c < n; ++c) {
      a(col, c) /= d;
      inv(col, c) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      for (std::size_t c = 0; c < n; ++c) {
        a(r, c) -= f * a(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return {inv, log_det};
}

/// Gaussian log-density via dense inverse and elimination determinant.
inline double gaussian_logpdf(std::span<const double> y, std::span<const double> mean,
                              const Matrix& cov) {
  const auto r = dense_inverse(cov);
  double quad = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      quad += (y[i] - mean[i]) * r.inverse(i, j) * (y[j] - mean[j]);
  return -0.5 * quad - 0.5 * r.log_abs_det - 0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

inline double gaussian_entropy(const Matrix& cov) {
  const double n = static_cast<double>(cov.rows());
  return 0.5 * dense_inverse(cov).log_abs_det + 0.5 * n * (kLog2Pi + 1.0);
}

/// One input row through the network, one neuron at a time.
inline std::vector<double> mlp_scalar(const bamld::MlpSpec& spec, std::span<const double> p,
                                      std::span<const double> x) {
  std::vector<std::size_t> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  dims.push_back(spec.output_dim);
  std::vector<double> act(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    std::vector<double> next(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = p[off + in * out + o];
      for (std::size_t i = 0; i < in; ++i) s += p[off + o * in + i] * act[i];
      next[o] = l + 2 < dims.size() ? std::tanh(s) : s;
    }
    off += in * out + out;
    act = next;
  }
  return act;
}

/// Fourth-order central difference of f along coordinate i.
inline double central_diff(const std::function<double(std::span<const double>)>& f,
                           std::vector<double> x, std::size_t i, double h) {
  auto at = [&](double d) {
    std::vector<double> t = x;
    t[i] += d;
    return f(t);
  };
  return (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
}

inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline Matrix random_spd(std::size_t n, bamld::Rng& rng) {
  Matrix a(n, n);
  for (double& v : a.data()) v = bamld::standard_normal(rng);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = i == j ? 1.0 : 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += a(k, i) * a(k, j);
      s(i, j) = acc;
    }
  return s;
}

inline std::vector<double> random_vector(std::size_t n, bamld::Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * bamld::standard_normal(rng);
  return v;
}

}  // namespace oracle
