#pragma once

#include <stdexcept>
#include <vector>

#include "mpaud/array.hpp"
#include "mpaud/rng.hpp"

namespace mpaud {

/// Pilot book: column g is the pilot vector of OFDM symbol g, a column
/// of the K-point DFT matrix (entries unit modulus, unscaled). Column
/// indices are distinct across symbols so that the stacked row blocks of
/// the sensing operator stay mutually orthogonal.
struct PilotBook {
    MatrixXc s;                        ///< K x G
    std::vector<std::size_t> dft_columns;  ///< chosen DFT column per symbol

    int population() const { return static_cast<int>(s.rows()); }
    int symbols() const { return static_cast<int>(s.cols()); }
};

/// Sample G distinct DFT columns without replacement. With duplicated
/// columns the stacked operator would have linearly dependent row blocks,
/// so G must not exceed K.
inline PilotBook gen_pilots(int population, int symbols, Rng& rng) {
    if (symbols > population)
        throw std::invalid_argument("gen_pilots: more symbols than DFT columns (G > K)");
    if (symbols < 1 || population < 1)
        throw std::invalid_argument("gen_pilots: K and G must be >= 1");
    PilotBook book;
    book.dft_columns = rng.sample_without_replacement(population, symbols);
    book.s.resize(population, symbols);
    for (int g = 0; g < symbols; ++g) {
        const double col = static_cast<double>(book.dft_columns[g]);
        for (int m = 0; m < population; ++m)
            book.s(m, g) = std::polar(1.0, -2.0 * M_PI * m * col / population);
    }
    return book;
}

}  // namespace mpaud
