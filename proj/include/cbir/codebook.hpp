#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cbir/common.hpp"

namespace cbir {

// K continuous D-dimensional code vectors for one semantic stream.
// Row index is the code-vector identity; rows are never reordered.
struct Codebook {
    int k = 0;
    int d = 0;
    Stream stream = Stream::Normal;
    std::vector<double> vectors;  // k*d, row-major

    std::span<const double> row(int i) const {
        return {vectors.data() + static_cast<std::size_t>(i) * d,
                static_cast<std::size_t>(d)};
    }
    std::span<double> row(int i) {
        return {vectors.data() + static_cast<std::size_t>(i) * d,
                static_cast<std::size_t>(d)};
    }
    void validate() const;
};

// Grid of codebook indices for one image's one semantic stream.
struct LatentCode {
    int grid_h = 0;
    int grid_w = 0;
    std::vector<int> indices;  // grid_h*grid_w, row-major

    int cells() const { return grid_h * grid_w; }
};

// Grid of continuous feature vectors, the input to quantization.
struct FeatureGrid {
    int grid_h = 0;
    int grid_w = 0;
    int d = 0;
    std::vector<double> values;  // grid_h*grid_w*d

    int cells() const { return grid_h * grid_w; }
    std::span<const double> cell(int i) const {
        return {values.data() + static_cast<std::size_t>(i) * d,
                static_cast<std::size_t>(d)};
    }
    std::span<double> cell(int i) {
        return {values.data() + static_cast<std::size_t>(i) * d,
                static_cast<std::size_t>(d)};
    }
};

double squared_l2(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

// Nearest code-vector index for a single feature vector; ties break to
// the lowest row index.
int nearest_code(std::span<const double> x, const Codebook& cb);

struct QuantizeResult {
    LatentCode code;
    FeatureGrid replaced;  // each cell replaced by its chosen code vector
};

QuantizeResult quantize(const FeatureGrid& grid, const Codebook& cb);

struct LatentLoss {
    double total = 0.0;
    double codebook_term = 0.0;
    double commitment_term = 0.0;
};

// code must be the quantization of grid against cb.
LatentLoss latent_loss(const FeatureGrid& grid, const Codebook& cb,
                       const LatentCode& code, double beta = 0.25);

// EMA codebook learner. Rows with zero accumulated usage stay at their
// near-zero initialization, which is what makes compactness observable.
struct CodebookLearnerState {
    Codebook codebook;
    std::vector<double> ema_counts;  // k
    std::vector<double> ema_sums;    // k*d
    double decay = 0.99;
    double epsilon = 1e-5;
};

CodebookLearnerState make_learner(int k, int d, Stream stream,
                                  std::uint64_t seed);

// batch is n*d row-major. Empty batch leaves the state unchanged.
void ema_update(CodebookLearnerState& state,
                std::span<const double> batch);

// Iterated quantize + ema_update over the whole stream; deterministic
// for a fixed seed.
Codebook learn_codebook(std::span<const double> vectors, int d, int k,
                        int epochs, std::uint64_t seed,
                        Stream stream = Stream::Normal);

// Fraction of code vectors with L2 norm below threshold.
double compactness(const Codebook& cb, double threshold = 1e-5);

// All K row norms, descending.
std::vector<double> norm_stats(const Codebook& cb);

}  // namespace cbir
