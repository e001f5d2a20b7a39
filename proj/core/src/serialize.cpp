#include "mlet/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mlet/errors.hpp"

namespace mlet {

namespace {

constexpr char kMatrixMagic[] = "MLETMAT1";

void write_bytes(std::ostream& os, const char* p, std::size_t len) {
    os.write(p, static_cast<std::streamsize>(len));
    if (!os) {
        throw IoError("write failed");
    }
}

void read_bytes(std::istream& is, char* p, std::size_t len) {
    is.read(p, static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(is.gcount()) != len) {
        throw IoError("unexpected end of stream");
    }
}

}  // namespace

void write_u8(std::ostream& os, std::uint8_t v) {
    write_bytes(os, reinterpret_cast<const char*>(&v), 1);
}

void write_u32_le(std::ostream& os, std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) {
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    }
    write_bytes(os, buf, 4);
}

void write_u64_le(std::ostream& os, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) {
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    }
    write_bytes(os, buf, 8);
}

void write_f64_le(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64_le(os, bits);
}

void write_f32_le(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32_le(os, bits);
}

std::uint8_t read_u8(std::istream& is) {
    char b;
    read_bytes(is, &b, 1);
    return static_cast<std::uint8_t>(b);
}

std::uint32_t read_u32_le(std::istream& is) {
    char buf[4];
    read_bytes(is, buf, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | static_cast<std::uint8_t>(buf[i]);
    }
    return v;
}

std::uint64_t read_u64_le(std::istream& is) {
    char buf[8];
    read_bytes(is, buf, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | static_cast<std::uint8_t>(buf[i]);
    }
    return v;
}

double read_f64_le(std::istream& is) {
    const std::uint64_t bits = read_u64_le(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

float read_f32_le(std::istream& is) {
    const std::uint32_t bits = read_u32_le(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void write_magic(std::ostream& os, const char* magic) {
    write_bytes(os, magic, std::strlen(magic));
}

void expect_magic(std::istream& is, const char* magic) {
    const std::size_t len = std::strlen(magic);
    char buf[16];
    read_bytes(is, buf, len);
    if (std::memcmp(buf, magic, len) != 0) {
        throw IoError(std::string("bad magic, expected \"") + magic + "\"");
    }
}

void write_matrix(std::ostream& os, const Matrix& m) {
    write_magic(os, kMatrixMagic);
    write_u64_le(os, m.rows());
    write_u64_le(os, m.cols());
    for (double x : m.data()) {
        write_f64_le(os, x);
    }
}

Matrix read_matrix(std::istream& is) {
    expect_magic(is, kMatrixMagic);
    const std::uint64_t rows = read_u64_le(is);
    const std::uint64_t cols = read_u64_le(is);
    if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24)) {
        throw IoError("matrix header has implausible shape");
    }
    std::vector<double> data(rows * cols);
    for (double& x : data) {
        x = read_f64_le(is);
    }
    Matrix m(rows, cols, std::move(data));
    if (!m.all_finite()) {
        throw IoError("matrix payload contains non-finite entries");
    }
    return m;
}

void write_matrix_file(const std::string& path, const Matrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_matrix(os, m);
}

Matrix read_matrix_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path);
    }
    return read_matrix(is);
}

std::size_t matrix_bytes(const Matrix& m) {
    return sizeof(kMatrixMagic) - 1 + 16 + 8 * m.size();
}

void write_bundle(std::ostream& os, const EmbeddingBundle& b) {
    write_u8(os, b.kind() == BundleKind::SingleLayer ? 0 : 1);
    write_u64_le(os, b.d());
    write_u64_le(os, b.n());
    write_u64_le(os, b.k());
    if (b.kind() == BundleKind::SingleLayer) {
        write_matrix(os, b.table());
    } else {
        write_matrix(os, b.w1());
        write_matrix(os, b.w2());
    }
}

EmbeddingBundle read_bundle(std::istream& is) {
    const std::uint8_t tag = read_u8(is);
    const std::uint64_t d = read_u64_le(is);
    const std::uint64_t n = read_u64_le(is);
    const std::uint64_t k = read_u64_le(is);
    if (tag == 0) {
        Matrix w = read_matrix(is);
        if (w.rows() != d || w.cols() != n) {
            throw IoError("bundle table shape disagrees with header");
        }
        return EmbeddingBundle::single(std::move(w));
    }
    if (tag == 1) {
        Matrix w1 = read_matrix(is);
        Matrix w2 = read_matrix(is);
        if (w1.rows() != d || w1.cols() != k || w2.rows() != k || w2.cols() != n) {
            throw IoError("bundle factor shapes disagree with header");
        }
        return EmbeddingBundle::mlet(std::move(w1), std::move(w2));
    }
    throw IoError("unknown bundle variant tag");
}

std::size_t bundle_bytes(const EmbeddingBundle& b) {
    std::size_t bytes = 1 + 24;
    if (b.kind() == BundleKind::SingleLayer) {
        bytes += matrix_bytes(b.table());
    } else {
        bytes += matrix_bytes(b.w1()) + matrix_bytes(b.w2());
    }
    return bytes;
}

}  // namespace mlet
