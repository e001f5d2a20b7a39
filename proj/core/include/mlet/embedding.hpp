#pragma once

#include <cstdint>
#include <vector>

#include "mlet/matrix.hpp"

namespace mlet {

enum class BundleKind { SingleLayer, Mlet };

enum class TableInit { XavierUniform };
enum class FactorInit { Gaussian };

/// How to initialize an embedding bundle. The table-shaped layer always
/// gets Xavier uniform; the projection layer of a factorized bundle gets
/// zero-mean Gaussian entries with factor_std.
struct InitSpec {
    TableInit table_scheme = TableInit::XavierUniform;
    FactorInit factor_scheme = FactorInit::Gaussian;
    double factor_std = 0.5;
    std::uint64_t seed = 0;
};

/// An embedding table in single-layer form (w: d x n) or factorized
/// training form (w1: d x k, w2: k x n). Columns are per-category vectors.
class EmbeddingBundle {
public:
    static EmbeddingBundle single(Matrix w);
    static EmbeddingBundle mlet(Matrix w1, Matrix w2);

    BundleKind kind() const { return kind_; }
    std::size_t d() const { return d_; }
    std::size_t n() const { return n_; }
    /// Inner dimension; 0 for a single-layer bundle.
    std::size_t k() const { return k_; }

    const Matrix& table() const;
    const Matrix& w1() const;
    const Matrix& w2() const;

    Matrix& table_mut();
    Matrix& w1_mut();
    Matrix& w2_mut();

    /// Number of stored floats: d*n for single-layer, d*k + k*n for MLET.
    std::size_t parameter_count() const;

private:
    EmbeddingBundle() = default;

    BundleKind kind_ = BundleKind::SingleLayer;
    std::size_t d_ = 0;
    std::size_t n_ = 0;
    std::size_t k_ = 0;
    Matrix w_;   // single-layer
    Matrix w1_;  // d x k
    Matrix w2_;  // k x n
};

/// A batch of category lookups; every index must be < n.
struct Query {
    std::vector<std::size_t> indices;
};

/// Xavier-uniform d x n table: entries ~ U(-a, a), a = sqrt(6 / (d + n)).
EmbeddingBundle init_single(std::size_t d, std::size_t n, const InitSpec& spec);

/// Factorized bundle. The table-shaped layer W2 (k x n) gets Xavier
/// uniform with a = sqrt(6 / (k + n)); the projection W1 (d x k) gets
/// Gaussian(0, factor_std^2) entries.
EmbeddingBundle init_mlet(std::size_t d, std::size_t n, std::size_t k,
                          const InitSpec& spec);

/// Gathers the queried columns into a d x b matrix. Never materializes
/// one-hot vectors; MLET bundles pay O(d*k) per index.
Matrix lookup(const EmbeddingBundle& bundle, const Query& query);

struct CollapseResult {
    EmbeddingBundle bundle;
    /// True when input was already single-layer (no-op).
    bool already_single = false;
};

/// Replaces (W1, W2) with their product, so inference-time storage is d*n
/// floats regardless of k. Collapsing a single-layer bundle is a flagged
/// no-op.
CollapseResult collapse(const EmbeddingBundle& bundle);

}  // namespace mlet
