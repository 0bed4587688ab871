#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "bamld/matrix.hpp"

namespace bamld {

enum class Activation { tanh };

/// Fully connected network: tanh on every hidden layer, linear output.
struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims{32, 32};
  std::size_t output_dim = 1;
  Activation activation = Activation::tanh;

  /// Throws ShapeError when a dimension is zero or hidden_dims is empty.
  void validate() const;
  std::size_t param_count() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Parameter vector laid out layer by layer as W (out × in, row-major) then b.
struct FlatParams {
  MlpSpec spec;
  std::vector<double> values;

  FlatParams() = default;
  FlatParams(MlpSpec s, std::vector<double> v);
  /// Weights ~ Normal(0, 1/fan_in), biases zero.
  static FlatParams initialize(const MlpSpec& spec, std::mt19937_64& rng);
  static FlatParams zeros(const MlpSpec& spec);
};

/// Batch forward pass; x is batch × input_dim.
Matrix mlp_forward(const MlpSpec& spec, std::span<const double> params, const Matrix& x);
inline Matrix mlp_forward(const FlatParams& p, const Matrix& x) {
  return mlp_forward(p.spec, p.values, x);
}

/// Gradient of Σ_{b,k} upstream(b,k)·output(b,k) with respect to every parameter.
std::vector<double> mlp_backward(const MlpSpec& spec, std::span<const double> params,
                                 const Matrix& x, const Matrix& upstream);
inline std::vector<double> mlp_backward(const FlatParams& p, const Matrix& x,
                                        const Matrix& upstream) {
  return mlp_backward(p.spec, p.values, x, upstream);
}

}  // namespace bamld
