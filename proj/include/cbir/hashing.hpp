#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cbir/codebook.hpp"
#include "cbir/common.hpp"

namespace cbir {

// Per-code-vector bit strings over separating hyperplanes. Bit t of row
// k is 1 iff row k lies on the non-negative side of the hyperplane
// bisecting the pair pairs[t]. Rows are packed little-endian, 64 bits
// per word; trailing pad bits of the last word are zero.
struct BinaryCodebook {
    int k = 0;
    int e_bits = 0;
    std::vector<std::pair<int, int>> pairs;  // (i,j), i<j, 0-based
    std::vector<std::uint64_t> words;        // k * words_per_row

    int words_per_row() const { return (e_bits + 63) / 64; }
    std::span<const std::uint64_t> row(int i) const {
        return {words.data() + static_cast<std::size_t>(i) * words_per_row(),
                static_cast<std::size_t>(words_per_row())};
    }
    bool bit(int r, int t) const {
        const std::uint64_t w =
            words[static_cast<std::size_t>(r) * words_per_row() + t / 64];
        return (w >> (t % 64)) & 1u;
    }
    void set_bit(int r, int t) {
        words[static_cast<std::size_t>(r) * words_per_row() + t / 64] |=
            std::uint64_t{1} << (t % 64);
    }
};

// Rows with L2 norm below threshold are replaced by the zero vector.
Codebook round_small_norms(const Codebook& cb, double threshold = 1e-5);

// Signed evaluation of the hyperplane bisecting the segment e_i--e_j at
// point x: (e_i - e_j)·x - (||e_i||^2 - ||e_j||^2)/2.
double hyperplane_eval(std::span<const double> e_i,
                       std::span<const double> e_j,
                       std::span<const double> x);

// Code vectors found exactly on a hyperplane (|value| < 1e-12). The bit
// is still set per sgn(0) = +1; incidences are only reported.
struct BinarizeReport {
    long incidence_count = 0;
    std::vector<std::array<int, 3>> samples;  // (row, i, j), capped
};

// All C(K,2) hyperplane bits per row, pairs in lexicographic order.
BinaryCodebook binarize_codebook(const Codebook& cb,
                                 BinarizeReport* report = nullptr);

int hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
inline int hamming(const BinaryCodebook& bcb, int i, int j) {
    return hamming(bcb.row(i), bcb.row(j));
}

// Greedy sequential bit removal preserving every row's Hamming
// nearest-neighbor set; restarts the scan after each removal and stops
// at a fixed point. Never removes the last remaining bit.
BinaryCodebook optimize_bits(const BinaryCodebook& bcb);

// Mean Jaccard agreement between top-q neighbor sets under continuous
// Euclidean and binary Hamming distances; ties break to lowest index.
double concordance(const Codebook& cb, const BinaryCodebook& bcb, int q);

double compression_ratio(const BinaryCodebook& optimized,
                         const BinaryCodebook& original);

}  // namespace cbir
