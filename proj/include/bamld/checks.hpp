#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bamld/bayes_opt.hpp"
#include "bamld/matrix.hpp"

namespace bamld {

/// Outcome of one invariant check of the property suite.
struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
std::vector<double> jacobi_eigenvalues(Matrix a, double tol = 1e-14, int max_sweeps = 100);

/// Inverse by Gauss-Jordan elimination with partial pivoting.
Matrix gauss_jordan_inverse(Matrix a);

/// Random symmetric positive-definite n × n matrix A·Aᵀ + n·ε·I.
Matrix random_spd(std::size_t n, Rng& rng, double ridge = 1e-3);

CheckResult check_entropy_closed_form(std::uint64_t seed, std::size_t n_matrices = 50);
CheckResult check_lml_gradient(std::uint64_t seed, std::size_t n_seeds = 20);
CheckResult check_conditioning_oracle(std::uint64_t seed);
CheckResult check_mi_degeneracy(std::uint64_t seed, std::size_t n_seeds = 20);
CheckResult check_estimator_identity(std::uint64_t seed);
CheckResult check_svgd_degeneracy(std::uint64_t seed, std::size_t n_steps = 100);

/// best_so_far non-decreasing, regret non-increasing and ≥ −1e-9, regret = true_max − best.
bool bo_trace_invariants_hold(const BoTrace& trace, std::string* why = nullptr);
CheckResult check_regret_invariants(const std::vector<BoTrace>& traces);
/// Small vanilla and ensemble BO runs fed to check_regret_invariants.
CheckResult check_regret_invariants(std::uint64_t seed);

/// Every check above, in id order.
std::vector<CheckResult> run_property_suite(std::uint64_t seed = 0);

}  // namespace bamld
