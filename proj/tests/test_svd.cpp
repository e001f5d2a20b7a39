#include <doctest.h>

#include <cmath>

#include "mlet/errors.hpp"
#include "mlet/matrix.hpp"
#include "mlet/rng.hpp"
#include "mlet/svd.hpp"
#include "oracles.hpp"

using namespace mlet;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double std = 1.0) {
    Matrix m(rows, cols);
    for (double& x : m.data()) {
        x = rng.gaussian(0.0, std);
    }
    return m;
}

Matrix reconstruct(const SvdResult& r) {
    // u * diag_embed(sigma) * vt without forming the rectangular diag.
    Matrix scaled(r.u.rows(), r.vt.rows());
    for (std::size_t i = 0; i < r.u.rows(); ++i) {
        for (std::size_t j = 0; j < r.sigma.size() && j < r.vt.rows(); ++j) {
            scaled(i, j) = r.u(i, j) * r.sigma[j];
        }
    }
    return matmul(scaled, r.vt);
}

double orthogonality_defect(const Matrix& q) {
    const Matrix gram = matmul(transpose(q), q);
    return frobenius_norm(scale_add(gram, Matrix::identity(q.cols()), -1.0));
}

void check_valid_svd(const Matrix& a, const SvdResult& r, double tol = 1e-10) {
    REQUIRE(r.u.rows() == a.rows());
    REQUIRE(r.u.cols() == a.rows());
    REQUIRE(r.vt.rows() == a.cols());
    REQUIRE(r.vt.cols() == a.cols());
    REQUIRE(r.sigma.size() == std::min(a.rows(), a.cols()));
    for (std::size_t i = 0; i + 1 < r.sigma.size(); ++i) {
        CHECK(r.sigma[i] >= r.sigma[i + 1]);
    }
    for (double s : r.sigma) {
        CHECK(s >= 0.0);
    }
    CHECK(orthogonality_defect(r.u) <= tol);
    CHECK(orthogonality_defect(transpose(r.vt)) <= tol);
    const double norm = frobenius_norm(a);
    const double err = frobenius_norm(scale_add(reconstruct(r), a, -1.0));
    if (norm > 0.0) {
        CHECK(err / norm <= tol);
    } else {
        CHECK(err == 0.0);
    }
}

}  // namespace

TEST_CASE("svd of a diagonal matrix is the identity factorization") {
    const Matrix a = Matrix::from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 1}});
    const SvdResult r = svd_full(a);
    CHECK(r.sigma[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(r.sigma[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.sigma[2] == doctest::Approx(1.0).epsilon(1e-12));
    // Sign convention makes u and vt exactly the identity here.
    CHECK(frobenius_norm(scale_add(r.u, Matrix::identity(3), -1.0)) <= 1e-12);
    CHECK(frobenius_norm(scale_add(r.vt, Matrix::identity(3), -1.0)) <= 1e-12);
}

TEST_CASE("svd of the zero matrix pads with an orthogonal completion") {
    const Matrix a(2, 5);
    const SvdResult r = svd_full(a);
    REQUIRE(r.sigma.size() == 2);
    CHECK(r.sigma[0] == 0.0);
    CHECK(r.sigma[1] == 0.0);
    check_valid_svd(a, r);
}

TEST_CASE("svd singular values match the eig(A A^T) oracle") {
    Rng rng(101);
    const Matrix a = random_matrix(4, 6, rng);
    const SvdResult r = svd_full(a);
    check_valid_svd(a, r);

    const auto eig = oracle::symmetric_eigenvalues(matmul(a, transpose(a)));
    REQUIRE(eig.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        const double expected = std::sqrt(std::max(0.0, eig[i]));
        CHECK(std::abs(r.sigma[i] - expected) <= 1e-8);
    }
}

TEST_CASE("svd round-trips 200 random shapes within 1e-10") {
    Rng rng(103);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t rows = 1 + rng.index(32);
        const std::size_t cols = 1 + rng.index(32);
        const Matrix a = random_matrix(rows, cols, rng);
        check_valid_svd(a, svd_full(a));
    }
}

TEST_CASE("svd handles rank deficiency with full factors") {
    Rng rng(107);
    // Rank-1 5x3 built from an outer product.
    Matrix a(5, 3);
    std::vector<double> u(5), v(3);
    for (auto& x : u) {
        x = rng.gaussian(0.0, 1.0);
    }
    for (auto& x : v) {
        x = rng.gaussian(0.0, 1.0);
    }
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            a(i, j) = u[i] * v[j];
        }
    }
    const SvdResult r = svd_full(a);
    check_valid_svd(a, r);
    CHECK(r.sigma[1] <= 1e-12 * r.sigma[0]);
    CHECK(r.sigma[2] <= 1e-12 * r.sigma[0]);
}

TEST_CASE("svd is deterministic across calls") {
    Rng rng(109);
    const Matrix a = random_matrix(6, 4, rng);
    const SvdResult r1 = svd_full(a);
    const SvdResult r2 = svd_full(a);
    CHECK(r1.u == r2.u);
    CHECK(r1.vt == r2.vt);
}

TEST_CASE("svd sign convention: first non-zero entry of u columns is positive") {
    Rng rng(113);
    const Matrix a = random_matrix(5, 5, rng);
    const SvdResult r = svd_full(a);
    for (std::size_t c = 0; c < 5; ++c) {
        for (std::size_t i = 0; i < 5; ++i) {
            if (r.u(i, c) != 0.0) {
                CHECK(r.u(i, c) > 0.0);
                break;
            }
        }
    }
}

TEST_CASE("svd_thin agrees with svd_full on sigma and the leading factors") {
    Rng rng(127);
    const Matrix a = random_matrix(9, 4, rng);
    const SvdResult full = svd_full(a);
    const SvdResult thin = svd_thin(a);
    REQUIRE(thin.u.cols() == 4);
    REQUIRE(thin.vt.rows() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(thin.sigma[i] == doctest::Approx(full.sigma[i]).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < 9; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(thin.u(i, j) == doctest::Approx(full.u(i, j)).epsilon(1e-10));
        }
    }
}

TEST_CASE("svd rejects empty and oversized inputs") {
    CHECK_THROWS_AS(svd_full(Matrix()), ShapeError);
    CHECK_THROWS_AS(svd_full(Matrix(1, kSvdMaxDim + 1)), ShapeError);
}
