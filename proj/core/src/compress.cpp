#include "mlet/compress.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mlet/errors.hpp"
#include "mlet/serialize.hpp"
#include "mlet/svd.hpp"

namespace mlet {

LowRankFactors low_rank_approx(const Matrix& w, std::size_t r) {
    const std::size_t rmax = std::min(w.rows(), w.cols());
    if (r < 1 || r > rmax) {
        throw ValueError("rank " + std::to_string(r) + " out of range [1, " +
                         std::to_string(rmax) + "]");
    }
    const SvdResult svd = svd_thin(w);
    LowRankFactors out;
    out.sigma = svd.sigma;
    out.left = Matrix(w.rows(), r);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            out.left(i, j) = svd.u(i, j) * svd.sigma[j];
        }
    }
    out.right = Matrix(r, w.cols());
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            out.right(i, j) = svd.vt(i, j);
        }
    }
    out.reconstructed = matmul(out.left, out.right);
    return out;
}

QuantizedTable quantize_int8(const Matrix& w) {
    if (!w.all_finite()) {
        throw ValueError("quantize_int8: table has non-finite entries");
    }
    QuantizedTable q;
    q.rows = w.rows();
    q.cols = w.cols();
    q.codes.resize(w.size());

    const double amax = max_abs(w);
    if (amax == 0.0) {
        q.scale = 1.0;
        return q;
    }
    const double naive = amax / 127.0;

    // Grid multipliers i/256 for i in [128, 384): spans [0.5, 1.5) times
    // the naive scale and contains the naive scale exactly at i = 256.
    double best_scale = naive;
    double best_err = -1.0;
    for (int i = 128; i < 384; ++i) {
        const double scale = naive * (static_cast<double>(i) / 256.0);
        double err = 0.0;
        for (double x : w.data()) {
            const double code = std::clamp(std::round(x / scale), -127.0, 127.0);
            const double diff = x - code * scale;
            err += diff * diff;
        }
        if (best_err < 0.0 || err < best_err) {
            best_err = err;
            best_scale = scale;
        }
    }
    q.scale = best_scale;
    const auto data = w.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        q.codes[i] = static_cast<std::int8_t>(
            std::clamp(std::round(data[i] / best_scale), -127.0, 127.0));
    }
    return q;
}

Matrix dequantize(const QuantizedTable& q) {
    std::vector<double> data(q.codes.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = static_cast<double>(q.codes[i]) * q.scale;
    }
    return Matrix(q.rows, q.cols, std::move(data));
}

std::size_t quantized_bytes(const QuantizedTable& q) {
    return 6 + 16 + 8 + q.codes.size();
}

void write_quantized(std::ostream& os, const QuantizedTable& q) {
    write_magic(os, "MLETQ8");
    write_u64_le(os, q.rows);
    write_u64_le(os, q.cols);
    write_f64_le(os, q.scale);
    for (std::int8_t c : q.codes) {
        write_u8(os, static_cast<std::uint8_t>(c));
    }
}

QuantizedTable read_quantized(std::istream& is) {
    expect_magic(is, "MLETQ8");
    QuantizedTable q;
    q.rows = read_u64_le(is);
    q.cols = read_u64_le(is);
    q.scale = read_f64_le(is);
    if (q.rows == 0 || q.cols == 0 || q.scale <= 0.0) {
        throw IoError("quantized table header is invalid");
    }
    q.codes.resize(q.rows * q.cols);
    for (auto& c : q.codes) {
        c = static_cast<std::int8_t>(read_u8(is));
    }
    return q;
}

HashedTableSpec apply_hash(SyntheticCtrDataset& ds, std::size_t field,
                           std::size_t buckets) {
    if (field >= ds.field_count()) {
        throw ValueError("apply_hash: no such field " + std::to_string(field));
    }
    const std::size_t n = ds.spec().fields[field].categories;
    if (buckets == 0) {
        throw ValueError("apply_hash: bucket count must be >= 1");
    }
    if (buckets > n) {
        throw ValueError("apply_hash: bucket count " + std::to_string(buckets) +
                         " exceeds field cardinality " + std::to_string(n));
    }
    for (auto& smp : ds.samples_mut()) {
        smp.indices[field] = static_cast<std::uint32_t>(smp.indices[field] % buckets);
    }
    ds.set_field_cardinality(field, buckets);
    ds.recompute_train_frequencies();
    return HashedTableSpec{n, buckets};
}

}  // namespace mlet
