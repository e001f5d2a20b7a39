#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace mlet {

/// Dense row-major matrix of 64-bit floats.
///
/// All arithmetic in this project runs in double precision: the theory
/// checks resolve O(eta^2) residuals that float32 cannot represent.
class Matrix {
public:
    Matrix() = default;

    /// rows x cols, zero-initialized.
    Matrix(std::size_t rows, std::size_t cols);

    /// Takes ownership of row-major data; data.size() must equal rows*cols.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    /// Convenience for literals in tests: Matrix::from_rows({{1,2},{3,4}}).
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    /// Mutable view of row i.
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Exact elementwise equality (shapes included).
bool operator==(const Matrix& a, const Matrix& b);

/// Standard product. Accumulation over the inner dimension is fixed
/// left-to-right, so results are bit-reproducible across runs.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

double frobenius_norm(const Matrix& a);

/// a + alpha * b, shapes must match.
Matrix scale_add(const Matrix& a, const Matrix& b, double alpha);

/// Largest |entry|; 0 for an empty matrix.
double max_abs(const Matrix& a);

}  // namespace mlet
