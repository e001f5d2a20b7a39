#include "mlet/embedding.hpp"

#include <cmath>
#include <string>

#include "mlet/errors.hpp"
#include "mlet/rng.hpp"

namespace mlet {

namespace {

void fill_xavier_uniform(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& x : m.data()) {
        x = rng.uniform(-a, a);
    }
}

}  // namespace

EmbeddingBundle EmbeddingBundle::single(Matrix w) {
    EmbeddingBundle b;
    b.kind_ = BundleKind::SingleLayer;
    b.d_ = w.rows();
    b.n_ = w.cols();
    b.w_ = std::move(w);
    return b;
}

EmbeddingBundle EmbeddingBundle::mlet(Matrix w1, Matrix w2) {
    if (w1.cols() != w2.rows()) {
        throw ShapeError("mlet bundle: w1 is " + std::to_string(w1.rows()) + "x" +
                         std::to_string(w1.cols()) + " but w2 is " +
                         std::to_string(w2.rows()) + "x" + std::to_string(w2.cols()));
    }
    EmbeddingBundle b;
    b.kind_ = BundleKind::Mlet;
    b.d_ = w1.rows();
    b.k_ = w1.cols();
    b.n_ = w2.cols();
    b.w1_ = std::move(w1);
    b.w2_ = std::move(w2);
    return b;
}

const Matrix& EmbeddingBundle::table() const {
    if (kind_ != BundleKind::SingleLayer) {
        throw ValueError("bundle is factorized; collapse it before table()");
    }
    return w_;
}

const Matrix& EmbeddingBundle::w1() const {
    if (kind_ != BundleKind::Mlet) {
        throw ValueError("single-layer bundle has no w1");
    }
    return w1_;
}

const Matrix& EmbeddingBundle::w2() const {
    if (kind_ != BundleKind::Mlet) {
        throw ValueError("single-layer bundle has no w2");
    }
    return w2_;
}

Matrix& EmbeddingBundle::table_mut() {
    if (kind_ != BundleKind::SingleLayer) {
        throw ValueError("bundle is factorized; collapse it before table()");
    }
    return w_;
}

Matrix& EmbeddingBundle::w1_mut() {
    if (kind_ != BundleKind::Mlet) {
        throw ValueError("single-layer bundle has no w1");
    }
    return w1_;
}

Matrix& EmbeddingBundle::w2_mut() {
    if (kind_ != BundleKind::Mlet) {
        throw ValueError("single-layer bundle has no w2");
    }
    return w2_;
}

std::size_t EmbeddingBundle::parameter_count() const {
    return kind_ == BundleKind::SingleLayer ? d_ * n_ : d_ * k_ + k_ * n_;
}

EmbeddingBundle init_single(std::size_t d, std::size_t n, const InitSpec& spec) {
    Matrix w(d, n);
    Rng rng(spec.seed);
    fill_xavier_uniform(w, d, n, rng);
    return EmbeddingBundle::single(std::move(w));
}

EmbeddingBundle init_mlet(std::size_t d, std::size_t n, std::size_t k,
                          const InitSpec& spec) {
    if (spec.factor_std <= 0.0) {
        throw ValueError("init_mlet: factor_std must be positive, got " +
                         std::to_string(spec.factor_std));
    }
    Matrix w1(d, k);
    Matrix w2(k, n);
    Rng rng(spec.seed);
    // W2 is the table-shaped layer (columns are category vectors) and
    // keeps the conventional Xavier init; W1 is the added projection.
    fill_xavier_uniform(w2, k, n, rng);
    for (double& x : w1.data()) {
        x = rng.gaussian(0.0, spec.factor_std);
    }
    return EmbeddingBundle::mlet(std::move(w1), std::move(w2));
}

Matrix lookup(const EmbeddingBundle& bundle, const Query& query) {
    if (query.indices.empty()) {
        throw ValueError("lookup: empty query");
    }
    for (std::size_t idx : query.indices) {
        if (idx >= bundle.n()) {
            throw ValueError("lookup: index " + std::to_string(idx) +
                             " out of range for table with " +
                             std::to_string(bundle.n()) + " categories");
        }
    }
    const std::size_t d = bundle.d();
    const std::size_t b = query.indices.size();
    Matrix out(d, b);
    if (bundle.kind() == BundleKind::SingleLayer) {
        const Matrix& w = bundle.table();
        for (std::size_t j = 0; j < b; ++j) {
            const std::size_t idx = query.indices[j];
            for (std::size_t r = 0; r < d; ++r) {
                out(r, j) = w(r, idx);
            }
        }
        return out;
    }
    const Matrix& w1 = bundle.w1();
    const Matrix& w2 = bundle.w2();
    const std::size_t k = bundle.k();
    for (std::size_t j = 0; j < b; ++j) {
        const std::size_t idx = query.indices[j];
        for (std::size_t r = 0; r < d; ++r) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                s += w1(r, t) * w2(t, idx);
            }
            out(r, j) = s;
        }
    }
    return out;
}

CollapseResult collapse(const EmbeddingBundle& bundle) {
    if (bundle.kind() == BundleKind::SingleLayer) {
        return {bundle, true};
    }
    return {EmbeddingBundle::single(matmul(bundle.w1(), bundle.w2())), false};
}

}  // namespace mlet
