#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include "mpaud/array.hpp"

namespace mpaud {

/// Binary layout for complex matrices used for cross-implementation
/// regression dumps: a 16-byte header of rows and cols as little-endian
/// 64-bit unsigned integers, followed by the entries in column-major
/// order as interleaved (real, imag) little-endian 64-bit floats.
inline void write_complex_matrix(const std::string& path, const MatrixXc& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_complex_matrix: cannot open " + path);
    const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    // Eigen stores column-major std::complex<double>, which is exactly the
    // interleaved (real, imag) layout required.
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(Complex) * m.size()));
    if (!out) throw std::runtime_error("write_complex_matrix: short write to " + path);
}

inline MatrixXc read_complex_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_complex_matrix: cannot open " + path);
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    if (!in) throw std::runtime_error("read_complex_matrix: bad header in " + path);
    MatrixXc m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(Complex) * m.size()));
    if (!in) throw std::runtime_error("read_complex_matrix: truncated payload in " + path);
    return m;
}

}  // namespace mpaud
