#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlet/gradflow.hpp"

namespace mlet {

/// Outcome of one theory check: the largest residual observed across all
/// its instances and the tolerance it was held to.
struct CheckResult {
    std::string name;
    bool pass = false;
    double max_residual = 0.0;
    double tolerance = 0.0;
    std::size_t instances = 0;
    std::string detail;
};

struct TheoryOptions {
    std::uint64_t seed = 1;
    int trials = 120;
    std::size_t d_min = 2, d_max = 6;
    std::size_t n_min = 5, n_max = 20;
    // k is drawn in [1, 2d] per instance; batch size in [1, 4].
    std::size_t b_min = 1, b_max = 4;
    // census_brute_force sweeps every (n, d, k) up to these bounds.
    std::size_t census_n_max = 12, census_d_max = 6, census_k_max = 12;
    // census_identity sweeps all k < d <= n <= this bound.
    std::size_t identity_n_max = 100;
};

/// Runs every gradient-flow invariant:
///   theorem1_identity        reweighted vs effective update, relative
///   second_order_elementwise collapsed - effective == eta^2 (G W2^T)(W1^T G)
///   second_order_ratio       ||residual|| / eta^2 constant across eta
///   kron_basis_gram          Gram of {v_j (x) u_i} == identity (d*n <= 64)
///   coeff_reconstruction     sum g_ij u_i v_j^T rebuilds G
///   kron_coeff_crosscheck    matrix-form g_ij vs explicit Kronecker dot
///   census_brute_force       spectral weight counts vs closed forms
///   census_identity          dn - (n+d-k)k == (n-k)(d-k) exactly
///   sparsity_contrast        single-layer touches <= b columns, MLET all
///   classification_grid      (d=2, n=5) grid for k in {1,2,4}
std::vector<CheckResult> run_theory_checks(const TheoryOptions& options);

/// Text rendering of the classification grid for d x n directions:
/// '*' both sigmas active, '+' sigma1 only, '0' inactive.
std::string render_classification_grid(std::size_t n, std::size_t d,
                                       const std::vector<std::size_t>& ks);

}  // namespace mlet
