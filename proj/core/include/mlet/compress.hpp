#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mlet/matrix.hpp"
#include "mlet/synth_data.hpp"

namespace mlet {

/// Rank-r truncation of a table's SVD. Storage drops from d*n to
/// r*(d+n) floats; by Eckart-Young the reconstruction is Frobenius
/// optimal among rank-r matrices.
struct LowRankFactors {
    Matrix left;           // d x r, U_r * diag(sigma_r)
    Matrix right;          // r x n, V_r^T
    Matrix reconstructed;  // left * right
    std::vector<double> sigma;  // all min(d,n) singular values of the input
};

LowRankFactors low_rank_approx(const Matrix& w, std::size_t r);

/// Uniform symmetric int8 quantization with a single per-table scale.
struct QuantizedTable {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int8_t> codes;  // row-major, dequantized value = code * scale
    double scale = 1.0;
};

/// Scale comes from a 256-point grid around the naive max-abs scale
/// (multipliers i/256 for i in [128, 384), so the naive scale itself is
/// on the grid); the grid point minimizing the L2 reconstruction error
/// wins. An all-zero table quantizes to scale 1 with zero codes.
QuantizedTable quantize_int8(const Matrix& w);

Matrix dequantize(const QuantizedTable& q);

/// Serialized size: "MLETQ8" header, rows/cols u64, scale f64, codes i8.
std::size_t quantized_bytes(const QuantizedTable& q);
void write_quantized(std::ostream& os, const QuantizedTable& q);
QuantizedTable read_quantized(std::istream& is);

/// Pre-training width reduction by modulo hashing of category indices.
struct HashedTableSpec {
    std::size_t original_n = 0;
    std::size_t buckets = 0;
};

/// Remaps every index of `field` to index mod buckets (train, validation
/// and test splits alike), shrinks the field's cardinality and refreshes
/// the training frequency counts. Tables for the field must then be built
/// with n = buckets.
HashedTableSpec apply_hash(SyntheticCtrDataset& ds, std::size_t field,
                           std::size_t buckets);

}  // namespace mlet
