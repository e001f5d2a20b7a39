#include "mlet/gradflow.hpp"

#include <string>

#include "mlet/errors.hpp"

namespace mlet {

SparseGradient::SparseGradient(std::size_t d, std::size_t n) : d_(d), n_(n) {
    if (d == 0 || n == 0) {
        throw ShapeError("sparse gradient dimensions must be positive");
    }
}

void SparseGradient::add(std::size_t index, std::span<const double> g) {
    if (index >= n_) {
        throw ValueError("sparse gradient index " + std::to_string(index) +
                         " out of range for n=" + std::to_string(n_));
    }
    if (g.size() != d_) {
        throw ShapeError("sparse gradient vector has length " +
                         std::to_string(g.size()) + ", expected " + std::to_string(d_));
    }
    auto [it, inserted] = cols_.try_emplace(index, g.begin(), g.end());
    if (!inserted) {
        for (std::size_t r = 0; r < d_; ++r) {
            it->second[r] += g[r];
        }
    }
}

Matrix SparseGradient::densify() const {
    Matrix g(d_, n_);
    for (const auto& [idx, col] : cols_) {
        for (std::size_t r = 0; r < d_; ++r) {
            g(r, idx) = col[r];
        }
    }
    return g;
}

SparseGradient sparse_gradient(
    const std::vector<std::pair<std::size_t, std::vector<double>>>& per_sample,
    std::size_t d, std::size_t n) {
    SparseGradient g(d, n);
    for (const auto& [idx, vec] : per_sample) {
        g.add(idx, vec);
    }
    return g;
}

Matrix conventional_update(const Matrix& w, const SparseGradient& grad, double eta) {
    if (w.rows() != grad.d() || w.cols() != grad.n()) {
        throw ShapeError("conventional_update: table is " + std::to_string(w.rows()) +
                         "x" + std::to_string(w.cols()) + " but gradient is " +
                         std::to_string(grad.d()) + "x" + std::to_string(grad.n()));
    }
    Matrix out = w;
    for (const auto& [idx, col] : grad.columns()) {
        for (std::size_t r = 0; r < grad.d(); ++r) {
            out(r, idx) -= eta * col[r];
        }
    }
    return out;
}

namespace {

void check_mlet_shapes(const Matrix& w1, const Matrix& w2, const SparseGradient& grad) {
    if (w1.cols() != w2.rows()) {
        throw ShapeError("factor shapes do not chain: w1 is " +
                         std::to_string(w1.rows()) + "x" + std::to_string(w1.cols()) +
                         ", w2 is " + std::to_string(w2.rows()) + "x" +
                         std::to_string(w2.cols()));
    }
    if (grad.d() != w1.rows() || grad.n() != w2.cols()) {
        throw ShapeError("gradient is " + std::to_string(grad.d()) + "x" +
                         std::to_string(grad.n()) + " but the collapsed table is " +
                         std::to_string(w1.rows()) + "x" + std::to_string(w2.cols()));
    }
}

}  // namespace

Matrix mlet_effective_update(const Matrix& w1, const Matrix& w2,
                             const SparseGradient& grad, double eta) {
    check_mlet_shapes(w1, w2, grad);
    const Matrix g = grad.densify();
    const Matrix w = matmul(w1, w2);
    // W1 W1^T G: left factor spreads over rows, keeps G's column support.
    const Matrix left = matmul(matmul(w1, transpose(w1)), g);
    // G W2^T W2: the dense Gram of W2 breaks G's column sparsity.
    const Matrix right = matmul(g, matmul(transpose(w2), w2));
    return scale_add(scale_add(w, left, -eta), right, -eta);
}

TwoLayerStep two_layer_sgd_step(const Matrix& w1, const Matrix& w2,
                                const SparseGradient& grad, double eta) {
    check_mlet_shapes(w1, w2, grad);
    const Matrix g = grad.densify();
    TwoLayerStep step;
    step.w1 = scale_add(w1, matmul(g, transpose(w2)), -eta);
    step.w2 = scale_add(w2, matmul(transpose(w1), g), -eta);
    step.collapsed = matmul(step.w1, step.w2);
    return step;
}

SpectralView spectral_view(const Matrix& w1, const Matrix& w2,
                           const SparseGradient& grad) {
    check_mlet_shapes(w1, w2, grad);
    const std::size_t d = w1.rows();
    const std::size_t n = w2.cols();

    SpectralView view;
    view.svd1 = svd_full(w1);
    view.svd2 = svd_full(w2);

    view.sigma1.assign(d, 0.0);
    for (std::size_t i = 0; i < view.svd1.sigma.size() && i < d; ++i) {
        view.sigma1[i] = view.svd1.sigma[i];
    }
    view.sigma2.assign(n, 0.0);
    for (std::size_t j = 0; j < view.svd2.sigma.size() && j < n; ++j) {
        view.sigma2[j] = view.svd2.sigma[j];
    }

    // coeffs = U^T G V, i.e. coeffs(i,j) = u_i^T G v_j -- the coordinate
    // of vec(G) on the basis vector v_j (x) u_i without ever forming the
    // nd-dimensional vectors.
    const Matrix g = grad.densify();
    view.coeffs = matmul(matmul(transpose(view.svd1.u), g), transpose(view.svd2.vt));

    view.weights = Matrix(d, n);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            view.weights(i, j) =
                view.sigma1[i] * view.sigma1[i] + view.sigma2[j] * view.sigma2[j];
        }
    }
    return view;
}

Matrix reweighted_update(const SpectralView& view, const Matrix& w, double eta) {
    if (w.rows() != view.coeffs.rows() || w.cols() != view.coeffs.cols()) {
        throw ShapeError("reweighted_update: table shape does not match view");
    }
    Matrix weighted(view.coeffs.rows(), view.coeffs.cols());
    for (std::size_t i = 0; i < weighted.rows(); ++i) {
        for (std::size_t j = 0; j < weighted.cols(); ++j) {
            weighted(i, j) = view.coeffs(i, j) * view.weights(i, j);
        }
    }
    const Matrix update = matmul(matmul(view.svd1.u, weighted), view.svd2.vt);
    return scale_add(w, update, -eta);
}

FactorCensus factor_census(std::size_t n, std::size_t d, std::size_t k) {
    if (n == 0 || d == 0 || k == 0) {
        throw ValueError("factor_census: n, d, k must be >= 1");
    }
    const std::size_t k1 = std::min(k, d);  // generic rank of W1
    const std::size_t k2 = std::min(k, n);  // generic rank of W2
    FactorCensus c;
    c.n = n;
    c.d = d;
    c.k = k;
    c.informative_count = k1 * k2;
    c.sigma2_active_count = d * k2;
    c.zero_count = (d - k1) * (n - k2);
    c.nonzero_count = d * n - c.zero_count;
    return c;
}

bool census_identity_check(std::size_t n, std::size_t d, std::size_t k) {
    if (!(k < d && d <= n)) {
        throw ValueError("census_identity_check requires k < d <= n");
    }
    // Unsigned-safe: compare d*n against (n+d-k)*k + (n-k)*(d-k).
    return d * n == (n + d - k) * k + (n - k) * (d - k);
}

std::vector<std::vector<FactorClass>> classify_factors(std::size_t n, std::size_t d,
                                                       std::size_t k) {
    const std::size_t k1 = std::min(k, d);
    const std::size_t k2 = std::min(k, n);
    std::vector<std::vector<FactorClass>> grid(d, std::vector<FactorClass>(n));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i >= k1) {
                grid[i][j] = FactorClass::Zero;
            } else if (j < k2) {
                grid[i][j] = FactorClass::InformativeBoth;
            } else {
                grid[i][j] = FactorClass::ActiveW1;
            }
        }
    }
    return grid;
}

std::vector<double> vec(const Matrix& m) {
    std::vector<double> v(m.size());
    std::size_t pos = 0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            v[pos++] = m(i, j);
        }
    }
    return v;
}

std::vector<double> kron(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size() * b.size());
    std::size_t pos = 0;
    for (double x : a) {
        for (double y : b) {
            out[pos++] = x * y;
        }
    }
    return out;
}

std::vector<double> matrix_column(const Matrix& m, std::size_t col) {
    std::vector<double> v(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        v[r] = m(r, col);
    }
    return v;
}

}  // namespace mlet
