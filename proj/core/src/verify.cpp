#include "mlet/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>

#include "mlet/rng.hpp"

namespace mlet {

namespace {

struct Instance {
    Matrix w1;
    Matrix w2;
    SparseGradient grad;
};

Instance random_instance(std::size_t d, std::size_t n, std::size_t k,
                         std::size_t b, Rng& rng) {
    Matrix w1(d, k);
    for (double& x : w1.data()) {
        x = rng.gaussian(0.0, 1.0);
    }
    Matrix w2(k, n);
    for (double& x : w2.data()) {
        x = rng.gaussian(0.0, 1.0);
    }
    SparseGradient grad(d, n);
    for (std::size_t s = 0; s < b; ++s) {
        std::vector<double> g(d);
        for (double& x : g) {
            x = rng.gaussian(0.0, 1.0);
        }
        grad.add(rng.index(n), g);
    }
    return Instance{std::move(w1), std::move(w2), std::move(grad)};
}

std::size_t draw_dim(std::size_t lo, std::size_t hi, Rng& rng) {
    return lo + rng.index(hi - lo + 1);
}

// ||a - b||_F
double diff_norm(const Matrix& a, const Matrix& b) {
    return frobenius_norm(scale_add(a, b, -1.0));
}

CheckResult theorem1_identity(const TheoryOptions& opt) {
    CheckResult res{"theorem1_identity", false, 0.0, 1e-8, 0, ""};
    Rng rng(derive_seed(opt.seed, 101));
    const double eta = 0.05;
    for (int t = 0; t < opt.trials; ++t) {
        const std::size_t d = draw_dim(opt.d_min, opt.d_max, rng);
        const std::size_t n = draw_dim(opt.n_min, opt.n_max, rng);
        const std::size_t k = draw_dim(1, 2 * d, rng);
        const std::size_t b = draw_dim(opt.b_min, opt.b_max, rng);
        Instance inst = random_instance(d, n, k, b, rng);

        const Matrix w = matmul(inst.w1, inst.w2);
        const Matrix effective = mlet_effective_update(inst.w1, inst.w2, inst.grad, eta);
        const SpectralView view = spectral_view(inst.w1, inst.w2, inst.grad);
        const Matrix reweighted = reweighted_update(view, w, eta);

        const double denom = diff_norm(effective, w);
        if (denom == 0.0) {
            continue;
        }
        res.max_residual = std::max(res.max_residual,
                                    diff_norm(reweighted, effective) / denom);
        ++res.instances;
    }
    res.pass = res.instances > 0 && res.max_residual <= res.tolerance;
    res.detail = "relative to the update magnitude ||effective - W||_F";
    return res;
}

CheckResult second_order_elementwise(const TheoryOptions& opt) {
    CheckResult res{"second_order_elementwise", false, 0.0, 1e-12, 0, ""};
    Rng rng(derive_seed(opt.seed, 102));
    const double etas[] = {1e-2, 1e-3, 1e-4};
    const int trials = std::max(1, opt.trials / 4);
    for (int t = 0; t < trials; ++t) {
        const std::size_t d = draw_dim(opt.d_min, opt.d_max, rng);
        const std::size_t n = draw_dim(opt.n_min, opt.n_max, rng);
        const std::size_t k = draw_dim(1, 2 * d, rng);
        const std::size_t b = draw_dim(opt.b_min, opt.b_max, rng);
        Instance inst = random_instance(d, n, k, b, rng);
        const Matrix g = inst.grad.densify();
        const Matrix cross =
            matmul(matmul(g, transpose(inst.w2)), matmul(transpose(inst.w1), g));
        for (double eta : etas) {
            const Matrix effective =
                mlet_effective_update(inst.w1, inst.w2, inst.grad, eta);
            const TwoLayerStep step = two_layer_sgd_step(inst.w1, inst.w2, inst.grad, eta);
            const Matrix residual = scale_add(step.collapsed, effective, -1.0);
            const Matrix expected = scale_add(Matrix(d, n), cross, eta * eta);
            res.max_residual =
                std::max(res.max_residual, max_abs(scale_add(residual, expected, -1.0)));
            ++res.instances;
        }
    }
    res.pass = res.max_residual <= res.tolerance;
    res.detail = "collapsed - effective vs eta^2 (G W2^T)(W1^T G), elementwise";
    return res;
}

CheckResult second_order_ratio(const TheoryOptions& opt) {
    CheckResult res{"second_order_ratio", false, 0.0, 1e-6, 0, ""};
    Rng rng(derive_seed(opt.seed, 103));
    const double etas[] = {1e-2, 1e-3, 1e-4};
    const int trials = std::max(1, opt.trials / 4);
    for (int t = 0; t < trials; ++t) {
        const std::size_t d = draw_dim(opt.d_min, opt.d_max, rng);
        const std::size_t n = draw_dim(opt.n_min, opt.n_max, rng);
        const std::size_t k = draw_dim(1, 2 * d, rng);
        const std::size_t b = draw_dim(opt.b_min, opt.b_max, rng);
        Instance inst = random_instance(d, n, k, b, rng);
        double ratios[3];
        for (int e = 0; e < 3; ++e) {
            const double eta = etas[e];
            const Matrix effective =
                mlet_effective_update(inst.w1, inst.w2, inst.grad, eta);
            const TwoLayerStep step = two_layer_sgd_step(inst.w1, inst.w2, inst.grad, eta);
            ratios[e] = frobenius_norm(scale_add(step.collapsed, effective, -1.0)) /
                        (eta * eta);
        }
        const double hi = std::max({ratios[0], ratios[1], ratios[2]});
        const double lo = std::min({ratios[0], ratios[1], ratios[2]});
        if (hi > 0.0) {
            res.max_residual = std::max(res.max_residual, (hi - lo) / hi);
        }
        ++res.instances;
    }
    res.pass = res.max_residual <= res.tolerance;
    res.detail = "spread of ||collapsed - effective||_F / eta^2 across eta";
    return res;
}

// Small-dimension instances (d*n <= 64) for the explicit Kronecker path.
std::vector<std::array<std::size_t, 3>> small_cases() {
    return {{2, 3, 1}, {2, 3, 2}, {2, 3, 4},  {2, 5, 1}, {2, 5, 2},
            {2, 5, 4}, {3, 4, 2}, {3, 4, 6},  {4, 4, 3}, {4, 4, 8},
            {2, 8, 3}, {3, 7, 2}, {4, 16, 4}, {2, 32, 2}};
}

CheckResult kron_basis_gram(const TheoryOptions& opt) {
    CheckResult res{"kron_basis_gram", false, 0.0, 1e-10, 0, ""};
    Rng rng(derive_seed(opt.seed, 104));
    for (const auto& [d, n, k] : small_cases()) {
        Instance inst = random_instance(d, n, k, 1, rng);
        const SpectralView view = spectral_view(inst.w1, inst.w2, inst.grad);
        const Matrix v = transpose(view.svd2.vt);

        // All d*n basis vectors v_j (x) u_i, as columns of a (nd) x (dn)
        // matrix; the Gram must be the identity (Claim 1).
        std::vector<std::vector<double>> basis;
        basis.reserve(d * n);
        for (std::size_t j = 0; j < n; ++j) {
            const auto vj = matrix_column(v, j);
            for (std::size_t i = 0; i < d; ++i) {
                basis.push_back(kron(vj, matrix_column(view.svd1.u, i)));
            }
        }
        for (std::size_t a = 0; a < basis.size(); ++a) {
            for (std::size_t b = 0; b < basis.size(); ++b) {
                double g = 0.0;
                for (std::size_t r = 0; r < basis[a].size(); ++r) {
                    g += basis[a][r] * basis[b][r];
                }
                const double target = a == b ? 1.0 : 0.0;
                res.max_residual = std::max(res.max_residual, std::abs(g - target));
            }
        }
        ++res.instances;
    }
    res.pass = res.max_residual <= res.tolerance;
    res.detail = "Gram of the spectral basis vs identity, d*n <= 64 cases";
    return res;
}

CheckResult coeff_reconstruction(const TheoryOptions& opt) {
    CheckResult res{"coeff_reconstruction", false, 0.0, 1e-9, 0, ""};
    Rng rng(derive_seed(opt.seed, 105));
    for (int t = 0; t < std::max(1, opt.trials / 2); ++t) {
        const std::size_t d = draw_dim(opt.d_min, opt.d_max, rng);
        const std::size_t n = draw_dim(opt.n_min, opt.n_max, rng);
        const std::size_t k = draw_dim(1, 2 * d, rng);
        const std::size_t b = draw_dim(opt.b_min, opt.b_max, rng);
        Instance inst = random_instance(d, n, k, b, rng);
        const SpectralView view = spectral_view(inst.w1, inst.w2, inst.grad);
        const Matrix v = transpose(view.svd2.vt);

        // Rebuild G term by term: sum_ij g_ij u_i v_j^T.
        Matrix rebuilt(d, n);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double gij = view.coeffs(i, j);
                for (std::size_t r = 0; r < d; ++r) {
                    for (std::size_t c = 0; c < n; ++c) {
                        rebuilt(r, c) += gij * view.svd1.u(r, i) * v(c, j);
                    }
                }
            }
        }
        const Matrix g = inst.grad.densify();
        const double gnorm = frobenius_norm(g);
        if (gnorm == 0.0) {
            continue;
        }
        res.max_residual = std::max(res.max_residual, diff_norm(rebuilt, g) / gnorm);
        ++res.instances;
    }
    res.pass = res.instances > 0 && res.max_residual <= res.tolerance;
    res.detail = "sum of g_ij u_i v_j^T vs G, relative Frobenius";
    return res;
}

CheckResult kron_coeff_crosscheck(const TheoryOptions& opt) {
    CheckResult res{"kron_coeff_crosscheck", false, 0.0, 1e-10, 0, ""};
    Rng rng(derive_seed(opt.seed, 106));
    for (const auto& [d, n, k] : small_cases()) {
        Instance inst = random_instance(d, n, k, 2, rng);
        const SpectralView view = spectral_view(inst.w1, inst.w2, inst.grad);
        const Matrix v = transpose(view.svd2.vt);
        const std::vector<double> vg = vec(inst.grad.densify());
        for (std::size_t i = 0; i < d; ++i) {
            const auto ui = matrix_column(view.svd1.u, i);
            for (std::size_t j = 0; j < n; ++j) {
                const auto basis = kron(matrix_column(v, j), ui);
                double coeff = 0.0;
                for (std::size_t r = 0; r < vg.size(); ++r) {
                    coeff += vg[r] * basis[r];
                }
                res.max_residual =
                    std::max(res.max_residual, std::abs(coeff - view.coeffs(i, j)));
            }
        }
        ++res.instances;
    }
    res.pass = res.max_residual <= res.tolerance;
    res.detail = "u_i^T G v_j vs vec(G) . (v_j (x) u_i)";
    return res;
}

CheckResult census_brute_force(const TheoryOptions& opt) {
    CheckResult res{"census_brute_force", false, 0.0, 0.0, 0, ""};
    Rng rng(derive_seed(opt.seed, 107));
    std::size_t mismatches = 0;
    for (std::size_t n = 2; n <= opt.census_n_max; ++n) {
        for (std::size_t d = 1; d <= opt.census_d_max; ++d) {
            for (std::size_t k = 1; k <= opt.census_k_max; ++k) {
                Instance inst = random_instance(d, n, k, 1, rng);
                const SpectralView view = spectral_view(inst.w1, inst.w2, inst.grad);
                const double wmax = max_abs(view.weights);
                std::size_t nonzero = 0;
                for (double w : view.weights.data()) {
                    if (w > 1e-12 * wmax) {
                        ++nonzero;
                    }
                }
                const FactorCensus census = factor_census(n, d, k);
                if (nonzero != census.nonzero_count) {
                    ++mismatches;
                }
                // The closed forms of the counting argument.
                if (k < d && k <= n &&
                    census.nonzero_count != k * n + (d - k) * k) {
                    ++mismatches;
                }
                if (k >= d && census.nonzero_count != d * n) {
                    ++mismatches;
                }
                if (census.nonzero_count + census.zero_count != d * n) {
                    ++mismatches;
                }
                ++res.instances;
            }
        }
    }
    res.max_residual = static_cast<double>(mismatches);
    res.pass = mismatches == 0;
    res.detail = "spectral weight counts vs closed-form census";
    return res;
}

CheckResult census_identity(const TheoryOptions& opt) {
    CheckResult res{"census_identity", false, 0.0, 0.0, 0, ""};
    std::size_t failures = 0;
    for (std::size_t n = 2; n <= opt.identity_n_max; ++n) {
        for (std::size_t d = 2; d <= n; ++d) {
            for (std::size_t k = 1; k < d; ++k) {
                if (!census_identity_check(n, d, k)) {
                    ++failures;
                }
                ++res.instances;
            }
        }
    }
    res.max_residual = static_cast<double>(failures);
    res.pass = failures == 0;
    res.detail = "dn - (n+d-k)k == (n-k)(d-k) for all k < d <= n";
    return res;
}

CheckResult sparsity_contrast(const TheoryOptions& opt) {
    CheckResult res{"sparsity_contrast", false, 0.0, 0.0, 0, ""};
    Rng rng(derive_seed(opt.seed, 108));
    const std::size_t d = 8, n = 1000, k = 32, b = 4;
    Instance inst = random_instance(d, n, k, b, rng);
    const double eta = 0.1;

    Matrix w(d, n);
    for (double& x : w.data()) {
        x = rng.gaussian(0.0, 0.1);
    }
    const Matrix conv = conventional_update(w, inst.grad, eta);
    std::size_t changed = 0;
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t r = 0; r < d; ++r) {
            if (conv(r, c) != w(r, c)) {
                ++changed;
                break;
            }
        }
    }

    const Matrix w_prod = matmul(inst.w1, inst.w2);
    const Matrix effective = mlet_effective_update(inst.w1, inst.w2, inst.grad, eta);
    double min_col_delta = -1.0;
    for (std::size_t c = 0; c < n; ++c) {
        double norm2 = 0.0;
        for (std::size_t r = 0; r < d; ++r) {
            const double diff = effective(r, c) - w_prod(r, c);
            norm2 += diff * diff;
        }
        if (min_col_delta < 0.0 || norm2 < min_col_delta) {
            min_col_delta = norm2;
        }
    }
    res.instances = 1;
    res.pass = changed <= b && min_col_delta > 0.0;
    res.max_residual = changed <= b ? 0.0 : static_cast<double>(changed - b);
    std::ostringstream os;
    os << "single-layer changed " << changed << "/" << n
       << " columns (b=" << b << "); min MLET column delta norm "
       << std::sqrt(std::max(0.0, min_col_delta));
    res.detail = os.str();
    return res;
}

CheckResult classification_grid(const TheoryOptions&) {
    CheckResult res{"classification_grid", false, 0.0, 0.0, 0, ""};
    // Expected (d=2, n=5) grids: '*' both sigmas non-zero, '+' sigma1
    // only, '0' inactive direction.
    const std::vector<std::pair<std::size_t, std::vector<std::string>>> expected = {
        {1, {"*++++", "00000"}},
        {2, {"**+++", "**+++"}},
        {4, {"****+", "****+"}},
    };
    std::size_t mismatches = 0;
    for (const auto& [k, grid] : expected) {
        const auto got = classify_factors(5, 2, k);
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < 5; ++j) {
                const char want = grid[i][j];
                const char have = got[i][j] == FactorClass::InformativeBoth ? '*'
                                  : got[i][j] == FactorClass::ActiveW1     ? '+'
                                                                           : '0';
                if (want != have) {
                    ++mismatches;
                }
            }
        }
        ++res.instances;
    }
    res.max_residual = static_cast<double>(mismatches);
    res.pass = mismatches == 0;
    res.detail = "(d=2, n=5) classification grid for k in {1, 2, 4}";
    return res;
}

}  // namespace

std::vector<CheckResult> run_theory_checks(const TheoryOptions& options) {
    std::vector<CheckResult> results;
    results.push_back(theorem1_identity(options));
    results.push_back(second_order_elementwise(options));
    results.push_back(second_order_ratio(options));
    results.push_back(kron_basis_gram(options));
    results.push_back(coeff_reconstruction(options));
    results.push_back(kron_coeff_crosscheck(options));
    results.push_back(census_brute_force(options));
    results.push_back(census_identity(options));
    results.push_back(sparsity_contrast(options));
    results.push_back(classification_grid(options));
    return results;
}

std::string render_classification_grid(std::size_t n, std::size_t d,
                                       const std::vector<std::size_t>& ks) {
    std::ostringstream os;
    os << "update directions u_i v_j^T for d=" << d << ", n=" << n << "\n";
    os << "legend: * active, informative of both factors; + active, "
          "informative of the projection only; 0 inactive\n";
    os << "single-layer: every direction carries constant weight 1\n";
    for (std::size_t k : ks) {
        const auto grid = classify_factors(n, d, k);
        os << "k=" << k << ":\n";
        for (std::size_t i = 0; i < d; ++i) {
            os << "  ";
            for (std::size_t j = 0; j < n; ++j) {
                os << (grid[i][j] == FactorClass::InformativeBoth ? '*'
                       : grid[i][j] == FactorClass::ActiveW1      ? '+'
                                                                  : '0');
            }
            os << "\n";
        }
    }
    return os.str();
}

}  // namespace mlet
