#include "mlet/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mlet/errors.hpp"

namespace mlet {

namespace {

// Singular values below norm_f * kRankCutoff are treated as rank
// deficiency: their left vectors are rebuilt by basis completion instead
// of normalizing a numerically meaningless direction.
constexpr double kRankCutoff = 1e-13;

double column_dot(const Matrix& a, std::size_t ci, std::size_t cj) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        s += a(r, ci) * a(r, cj);
    }
    return s;
}

void rotate_columns(Matrix& a, std::size_t ci, std::size_t cj, double c, double s) {
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double x = a(r, ci);
        const double y = a(r, cj);
        a(r, ci) = c * x - s * y;
        a(r, cj) = s * x + c * y;
    }
}

// Orthogonalizes the columns of a in place; v accumulates the right
// rotations starting from identity. Convergence is measured on the
// off-diagonal mass of the implicit Gram matrix a^T a, relative to
// trace(a^T a) = ||a||_F^2 so the criterion is scale invariant.
void jacobi_orthogonalize(Matrix& a, Matrix& v, double norm_f2) {
    const std::size_t n = a.cols();
    if (n < 2 || norm_f2 == 0.0) {
        return;
    }
    double off = 0.0;
    for (int sweep = 0; sweep < kSvdMaxSweeps; ++sweep) {
        double off2 = 0.0;
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double gamma = column_dot(a, i, j);
                off2 += 2.0 * gamma * gamma;
                if (gamma == 0.0) {
                    continue;
                }
                const double alpha = column_dot(a, i, i);
                const double beta = column_dot(a, j, j);
                if (std::abs(gamma) <= kSvdOffDiagTol * std::sqrt(alpha * beta)) {
                    continue;
                }
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate_columns(a, i, j, c, s);
                rotate_columns(v, i, j, c, s);
                rotated = true;
            }
        }
        off = std::sqrt(off2);
        // A rotation-free sweep cannot make further progress; every pair
        // already sits inside its own threshold.
        if (off <= kSvdOffDiagTol * norm_f2 || !rotated) {
            return;
        }
    }
    throw ConvergenceError("svd: one-sided Jacobi did not converge in " +
                               std::to_string(kSvdMaxSweeps) +
                               " sweeps, relative off-diagonal residual " +
                               std::to_string(off / norm_f2),
                           off / norm_f2);
}

// Extends the first `have` orthonormal columns of u (m x want) to `want`
// columns by Gram-Schmidt over the standard basis. Deterministic: e_0,
// e_1, ... are tried in order, with re-orthogonalization for accuracy.
void complete_basis(Matrix& u, std::size_t have, std::size_t want) {
    const std::size_t m = u.rows();
    // Some e_i always has residual norm^2 >= deficit/m >= 1/m against a
    // proper subspace, so this threshold can never exhaust the candidates.
    const double accept2 = 0.25 / static_cast<double>(m);
    std::size_t filled = have;
    for (std::size_t cand = 0; cand < m && filled < want; ++cand) {
        std::vector<double> w(m, 0.0);
        w[cand] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t c = 0; c < filled; ++c) {
                double proj = 0.0;
                for (std::size_t r = 0; r < m; ++r) {
                    proj += w[r] * u(r, c);
                }
                for (std::size_t r = 0; r < m; ++r) {
                    w[r] -= proj * u(r, c);
                }
            }
        }
        double norm2 = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
        if (norm2 <= accept2) {
            continue;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t r = 0; r < m; ++r) {
            u(r, filled) = w[r] * inv;
        }
        ++filled;
    }
}

// Worker for rows >= cols. Returns u with `u_cols` columns (min(m,n) for
// thin, m for full), sigma of length n, vt of n rows.
SvdResult svd_tall(const Matrix& a, bool full) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();

    Matrix work = a;
    Matrix v = Matrix::identity(n);
    const double norm_f = frobenius_norm(a);
    jacobi_orthogonalize(work, v, norm_f * norm_f);

    // Column norms are the singular values; sort non-increasing with
    // original column order as the tiebreaker.
    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) {
        norms[j] = std::sqrt(column_dot(work, j, j));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    const std::size_t u_cols = full ? m : n;
    SvdResult out;
    out.sigma.resize(n);
    out.u = Matrix(m, u_cols);
    out.vt = Matrix(n, n);

    const double cutoff = norm_f * kRankCutoff;
    std::size_t rank = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        out.sigma[j] = norms[src];
        for (std::size_t r = 0; r < n; ++r) {
            out.vt(j, r) = v(r, src);
        }
        if (norms[src] > cutoff) {
            const double inv = 1.0 / norms[src];
            for (std::size_t r = 0; r < m; ++r) {
                out.u(r, j) = work(r, src) * inv;
            }
            ++rank;
        }
    }
    // Left vectors for (numerically) zero singular values, plus the m - n
    // tail columns in full mode, come from orthogonal completion.
    complete_basis(out.u, rank, u_cols);
    return out;
}

void flip_u_column(Matrix& u, std::size_t col) {
    for (std::size_t r = 0; r < u.rows(); ++r) {
        u(r, col) = -u(r, col);
    }
}

void flip_vt_row(Matrix& vt, std::size_t row) {
    for (std::size_t c = 0; c < vt.cols(); ++c) {
        vt(row, c) = -vt(row, c);
    }
}

bool u_column_needs_flip(const Matrix& u, std::size_t col) {
    for (std::size_t r = 0; r < u.rows(); ++r) {
        if (u(r, col) != 0.0) {
            return u(r, col) < 0.0;
        }
    }
    return false;
}

bool vt_row_needs_flip(const Matrix& vt, std::size_t row) {
    for (std::size_t c = 0; c < vt.cols(); ++c) {
        if (vt(row, c) != 0.0) {
            return vt(row, c) < 0.0;
        }
    }
    return false;
}

// First non-zero entry of each left singular vector is made non-negative;
// the paired right vector flips with it so the product is unchanged.
// Unpaired rows of vt (beyond min(m,n)) get the same treatment on their
// own, purely for run-to-run comparability.
void normalize_signs(SvdResult& res) {
    const std::size_t paired = std::min(res.u.cols(), res.vt.rows());
    for (std::size_t l = 0; l < paired; ++l) {
        if (u_column_needs_flip(res.u, l)) {
            flip_u_column(res.u, l);
            flip_vt_row(res.vt, l);
        }
    }
    for (std::size_t l = paired; l < res.u.cols(); ++l) {
        if (u_column_needs_flip(res.u, l)) {
            flip_u_column(res.u, l);
        }
    }
    for (std::size_t l = paired; l < res.vt.rows(); ++l) {
        if (vt_row_needs_flip(res.vt, l)) {
            flip_vt_row(res.vt, l);
        }
    }
}

SvdResult svd_impl(const Matrix& a, bool full) {
    if (a.empty()) {
        throw ShapeError("svd: input matrix is empty");
    }
    if (std::max(a.rows(), a.cols()) > kSvdMaxDim) {
        throw ShapeError("svd: dimension " +
                         std::to_string(std::max(a.rows(), a.cols())) +
                         " exceeds the supported limit " + std::to_string(kSvdMaxDim));
    }

    SvdResult res;
    if (a.rows() >= a.cols()) {
        res = svd_tall(a, full);
    } else {
        // a = (u' s v'^T)^T of a^T, so u = v' and vt = u'^T.
        SvdResult t = svd_tall(transpose(a), full);
        res.sigma = std::move(t.sigma);
        res.u = transpose(t.vt);
        res.vt = transpose(t.u);
    }
    normalize_signs(res);
    return res;
}

}  // namespace

SvdResult svd_full(const Matrix& a) { return svd_impl(a, true); }

SvdResult svd_thin(const Matrix& a) { return svd_impl(a, false); }

}  // namespace mlet
