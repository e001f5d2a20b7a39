#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "mlet/embedding.hpp"
#include "mlet/matrix.hpp"

namespace mlet {

// Little-endian primitives shared by every binary format in the project.
void write_u8(std::ostream& os, std::uint8_t v);
void write_u32_le(std::ostream& os, std::uint32_t v);
void write_u64_le(std::ostream& os, std::uint64_t v);
void write_f64_le(std::ostream& os, double v);
void write_f32_le(std::ostream& os, float v);
std::uint8_t read_u8(std::istream& is);
std::uint32_t read_u32_le(std::istream& is);
std::uint64_t read_u64_le(std::istream& is);
double read_f64_le(std::istream& is);
float read_f32_le(std::istream& is);

void write_magic(std::ostream& os, const char* magic);
void expect_magic(std::istream& is, const char* magic);

/// Matrix format: magic "MLETMAT1", rows and cols as little-endian u64,
/// then row-major little-endian f64 entries.
void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);

void write_matrix_file(const std::string& path, const Matrix& m);
Matrix read_matrix_file(const std::string& path);

/// Serialized size of a matrix in bytes (header included).
std::size_t matrix_bytes(const Matrix& m);

/// Bundle format: one variant tag byte (0 single, 1 mlet), d/n/k as u64,
/// then the matrices in MLETMAT1 form (w, or w1 then w2).
void write_bundle(std::ostream& os, const EmbeddingBundle& b);
EmbeddingBundle read_bundle(std::istream& is);
std::size_t bundle_bytes(const EmbeddingBundle& b);

}  // namespace mlet
