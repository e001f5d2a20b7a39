#include "mlet/matrix.hpp"

#include <cmath>
#include <string>

#include "mlet/errors.hpp"

namespace mlet {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_positive_dims(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw ShapeError("matrix dimensions must be positive, got " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    require_positive_dims(rows, cols);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require_positive_dims(rows, cols);
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(*this));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw ShapeError("from_rows: ragged row lengths");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

bool Matrix::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

bool operator==(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        return false;
    }
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        if (da[i] != db[i]) {
            return false;
        }
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a) +
                         " * " + shape_str(b));
    }
    Matrix c(a.rows(), b.cols());
    // ikj loop order: each c(i,j) accumulates terms in ascending k, which
    // keeps the summation order fixed regardless of blocking or target.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            const auto brow = b.row(k);
            auto crow = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

double frobenius_norm(const Matrix& a) {
    double sum = 0.0;
    for (double x : a.data()) {
        sum += x * x;
    }
    return std::sqrt(sum);
}

Matrix scale_add(const Matrix& a, const Matrix& b, double alpha) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("scale_add: shape mismatch, " + shape_str(a) + " vs " +
                         shape_str(b));
    }
    Matrix c(a.rows(), a.cols());
    const auto da = a.data();
    const auto db = b.data();
    auto dc = c.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        dc[i] = da[i] + alpha * db[i];
    }
    return c;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.data()) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

}  // namespace mlet
