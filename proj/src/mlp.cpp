#include "bamld/mlp.hpp"

#include <cmath>
#include <string>

#include "bamld/errors.hpp"

namespace bamld {

namespace {

std::vector<std::size_t> layer_dims(const MlpSpec& spec) {
  std::vector<std::size_t> dims;
  dims.reserve(spec.hidden_dims.size() + 2);
  dims.push_back(spec.input_dim);
  dims.insert(dims.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  dims.push_back(spec.output_dim);
  return dims;
}

void check_params(const MlpSpec& spec, std::span<const double> params) {
  spec.validate();
  if (params.size() != spec.param_count()) {
    throw ShapeError("mlp: parameter vector has " + std::to_string(params.size()) +
                     " entries, spec needs " + std::to_string(spec.param_count()));
  }
}

void check_input(const MlpSpec& spec, const Matrix& x) {
  if (x.cols() != spec.input_dim) {
    throw ShapeError("mlp: input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(spec.input_dim));
  }
}

// y = x·Wᵀ + b for one layer.
Matrix affine(const Matrix& x, const double* w, const double* b, std::size_t in,
              std::size_t out) {
  Matrix y(x.rows(), out);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = &x(r, 0);
    double* yr = &y(r, 0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w + o * in;
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += wo[i] * xr[i];
      yr[o] = s;
    }
  }
  return y;
}

// Post-activation outputs of every layer; acts[0] is the input.
std::vector<Matrix> forward_all(const MlpSpec& spec, std::span<const double> params,
                                const Matrix& x) {
  const auto dims = layer_dims(spec);
  std::vector<Matrix> acts;
  acts.reserve(dims.size());
  acts.push_back(x);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    const double* w = params.data() + offset;
    const double* b = w + in * out;
    offset += in * out + out;
    Matrix z = affine(acts.back(), w, b, in, out);
    if (l + 2 < dims.size()) {
      for (double& v : z.data()) v = std::tanh(v);
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

void MlpSpec::validate() const {
  if (hidden_dims.empty()) throw ShapeError("MlpSpec: hidden_dims must be non-empty");
  if (input_dim == 0 || output_dim == 0) throw ShapeError("MlpSpec: zero input/output dim");
  for (auto h : hidden_dims)
    if (h == 0) throw ShapeError("MlpSpec: zero hidden dim");
}

std::size_t MlpSpec::param_count() const {
  const auto dims = layer_dims(*this);
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l] * dims[l + 1] + dims[l + 1];
  return n;
}

FlatParams::FlatParams(MlpSpec s, std::vector<double> v) : spec(std::move(s)), values(std::move(v)) {
  check_params(spec, values);
}

FlatParams FlatParams::initialize(const MlpSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const auto dims = layer_dims(spec);
  std::vector<double> v;
  v.reserve(spec.param_count());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (std::size_t i = 0; i < dims[l] * dims[l + 1]; ++i) v.push_back(sd * normal(rng));
    v.insert(v.end(), dims[l + 1], 0.0);
  }
  return FlatParams(spec, std::move(v));
}

FlatParams FlatParams::zeros(const MlpSpec& spec) {
  return FlatParams(spec, std::vector<double>(spec.param_count(), 0.0));
}

Matrix mlp_forward(const MlpSpec& spec, std::span<const double> params, const Matrix& x) {
  check_params(spec, params);
  check_input(spec, x);
  return std::move(forward_all(spec, params, x).back());
}

std::vector<double> mlp_backward(const MlpSpec& spec, std::span<const double> params,
                                 const Matrix& x, const Matrix& upstream) {
  check_params(spec, params);
  check_input(spec, x);
  if (upstream.rows() != x.rows() || upstream.cols() != spec.output_dim) {
    throw ShapeError("mlp_backward: upstream gradient is " + std::to_string(upstream.rows()) +
                     "x" + std::to_string(upstream.cols()) + ", output is " +
                     std::to_string(x.rows()) + "x" + std::to_string(spec.output_dim));
  }
  const auto dims = layer_dims(spec);
  const auto acts = forward_all(spec, params, x);
  const std::size_t n_layers = dims.size() - 1;

  std::vector<std::size_t> offsets(n_layers);
  {
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
      offsets[l] = off;
      off += dims[l] * dims[l + 1] + dims[l + 1];
    }
  }

  std::vector<double> grad(params.size(), 0.0);
  Matrix delta = upstream;  // gradient w.r.t. pre-activation of the current layer
  for (std::size_t l = n_layers; l-- > 0;) {
    const std::size_t in = dims[l], out = dims[l + 1];
    const Matrix& a_in = acts[l];
    double* gw = grad.data() + offsets[l];
    double* gb = gw + in * out;
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const double* dr = &delta(r, 0);
      const double* ar = &a_in(r, 0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* gwo = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gwo[i] += d * ar[i];
      }
    }
    if (l == 0) break;
    // propagate through W and the tanh of the previous layer
    const double* w = params.data() + offsets[l];
    Matrix prev(delta.rows(), in);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const double* dr = &delta(r, 0);
      double* pr = &prev(r, 0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        const double* wo = w + o * in;
        for (std::size_t i = 0; i < in; ++i) pr[i] += d * wo[i];
      }
      const double* ar = &a_in(r, 0);
      for (std::size_t i = 0; i < in; ++i) pr[i] *= 1.0 - ar[i] * ar[i];
    }
    delta = std::move(prev);
  }
  return grad;
}

}  // namespace bamld
