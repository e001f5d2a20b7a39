#pragma once

#include <cstddef>
#include <vector>

#include "mlet/matrix.hpp"

namespace mlet {

/// Full singular value decomposition a = u * diag_embed(sigma) * vt.
///
/// u is m x m orthogonal and vt is n x n row-orthogonal even when
/// rank(a) < min(m, n): the spectral analysis needs every left vector of W1
/// and every right vector of W2, null-space directions included.
struct SvdResult {
    Matrix u;                   // m x m (m x min(m,n) for the thin variant)
    std::vector<double> sigma;  // length min(m,n), non-increasing, >= 0
    Matrix vt;                  // n x n (min(m,n) x n for the thin variant)
};

/// Largest dimension svd_full/svd_thin accepts. Full factors need square
/// u and v, so memory grows as max(m,n)^2; 4096 keeps that under 135 MB.
inline constexpr std::size_t kSvdMaxDim = 4096;

/// One-sided Jacobi sweep limit before giving up with ConvergenceError.
inline constexpr int kSvdMaxSweeps = 60;

/// Converged when the off-diagonal Frobenius mass of the implicit Gram
/// matrix drops below this fraction of ||a||_F^2 (the total Gram mass).
inline constexpr double kSvdOffDiagTol = 1e-14;

/// Full SVD by one-sided Jacobi rotations. Deterministic: fixed sweep
/// order, singular values sorted non-increasing (ties kept in column
/// order), and each left singular vector's first non-zero entry is made
/// non-negative so factors are comparable across runs.
///
/// Throws ShapeError for empty/oversized inputs and ConvergenceError
/// (carrying the relative off-diagonal residual) after kSvdMaxSweeps.
SvdResult svd_full(const Matrix& a);

/// Economy variant: u is m x min(m,n), vt is min(m,n) x n. Same sigma as
/// svd_full; skips the orthogonal completion of the long side.
SvdResult svd_thin(const Matrix& a);

}  // namespace mlet
