#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "mlet/matrix.hpp"
#include "mlet/svd.hpp"

namespace mlet {

/// Column-sparse loss gradient G = d L / d W of an embedding table.
///
/// Each queried category contributes a rank-1 term g * e_C^T, so a batch
/// of b samples touches at most b distinct columns. Keys are kept in an
/// ordered map so iteration (and everything built on it) is deterministic.
class SparseGradient {
public:
    SparseGradient(std::size_t d, std::size_t n);

    std::size_t d() const { return d_; }
    std::size_t n() const { return n_; }

    /// Accumulates g into column `index` (duplicate indices sum).
    void add(std::size_t index, std::span<const double> g);

    const std::map<std::size_t, std::vector<double>>& columns() const { return cols_; }
    bool empty() const { return cols_.empty(); }

    /// d x n dense form; non-zero columns only at stored keys.
    Matrix densify() const;

private:
    std::size_t d_;
    std::size_t n_;
    std::map<std::size_t, std::vector<double>> cols_;
};

/// Builds G from per-sample (queried index, d-vector) pairs.
SparseGradient sparse_gradient(
    const std::vector<std::pair<std::size_t, std::vector<double>>>& per_sample,
    std::size_t d, std::size_t n);

/// Single-layer step W - eta * G. Writes only the columns present in
/// grad; everything else is copied through untouched.
Matrix conventional_update(const Matrix& w, const SparseGradient& grad, double eta);

/// The effective MLET table step, W1 W2 - eta W1 W1^T G - eta G W2^T W2.
/// Even a one-column-sparse G produces a fully dense update: the right
/// factor G W2^T W2 spreads the sample's information over every column.
Matrix mlet_effective_update(const Matrix& w1, const Matrix& w2,
                             const SparseGradient& grad, double eta);

struct TwoLayerStep {
    Matrix w1;         // w1 - eta * G * w2^T
    Matrix w2;         // w2 - eta * w1^T * G
    Matrix collapsed;  // product of the two updated layers
};

/// The literal two-layer SGD step with per-layer gradients. The collapsed
/// product differs from mlet_effective_update by exactly
/// eta^2 * (G w2^T)(w1^T G), the second-order term dropped in the
/// gradient-flow view.
TwoLayerStep two_layer_sgd_step(const Matrix& w1, const Matrix& w2,
                                const SparseGradient& grad, double eta);

/// G and the current factors expressed in the spectral basis
/// { u_i v_j^T }: u_i from the full SVD of w1, v_j from the full SVD of
/// w2. Singular value arrays are zero-padded to lengths d and n.
struct SpectralView {
    SvdResult svd1;              // of w1 (d x k)
    SvdResult svd2;              // of w2 (k x n)
    std::vector<double> sigma1;  // length d
    std::vector<double> sigma2;  // length n
    Matrix coeffs;               // d x n, coeffs(i,j) = u_i^T G v_j
    Matrix weights;              // d x n, weights(i,j) = sigma1(i)^2 + sigma2(j)^2
};

SpectralView spectral_view(const Matrix& w1, const Matrix& w2,
                           const SparseGradient& grad);

/// W - eta * sum_ij coeffs(i,j) * weights(i,j) * u_i v_j^T, evaluated as
/// U (coeffs .* weights) V^T. Equals mlet_effective_update up to SVD
/// round-off; the agreement of the two routes is the executable form of
/// the reweighting identity.
Matrix reweighted_update(const SpectralView& view, const Matrix& w, double eta);

/// Counts of reweighting factors sigma1(i)^2 + sigma2(j)^2 over the d x n
/// direction grid, assuming generic (full-rank) factors.
struct FactorCensus {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t k = 0;
    /// Both sigma1(i) and sigma2(j) non-zero: min(k,d) * min(k,n).
    std::size_t informative_count = 0;
    /// sigma2(j) non-zero regardless of sigma1: d * min(k,n).
    std::size_t sigma2_active_count = 0;
    /// At least one of the two sigmas non-zero. Equals k*n + (d-k)*k in
    /// the usual k < d <= n regime, and d*n once k >= d or k >= n.
    std::size_t nonzero_count = 0;
    /// Both sigmas zero: (d-k)(n-k) when k < min(d,n), else 0.
    std::size_t zero_count = 0;
};

FactorCensus factor_census(std::size_t n, std::size_t d, std::size_t k);

/// Checks d*n - (n+d-k)*k == (n-k)*(d-k) in exact integer arithmetic.
/// Requires k < d <= n (the regime where the identity is meaningful).
bool census_identity_check(std::size_t n, std::size_t d, std::size_t k);

/// Classification of an update direction u_i v_j^T by which sigmas are
/// generically non-zero. Zero means sigma1(i) = 0 (the direction gets no
/// weight from the projection layer), regardless of sigma2.
enum class FactorClass { Zero, ActiveW1, InformativeBoth };

/// The d x n classification grid for generic rank-k factors: entry (i,j)
/// is InformativeBoth when i <= min(k,d) and j <= min(k,n), ActiveW1 when
/// only i <= min(k,d), Zero otherwise.
std::vector<std::vector<FactorClass>> classify_factors(std::size_t n, std::size_t d,
                                                       std::size_t k);

/// Column-stacking vectorization (length rows*cols).
std::vector<double> vec(const Matrix& m);

/// Kronecker product a (x) b of two vectors, length a.size()*b.size().
std::vector<double> kron(std::span<const double> a, std::span<const double> b);

/// Column `col` of a matrix as a vector.
std::vector<double> matrix_column(const Matrix& m, std::size_t col);

}  // namespace mlet
