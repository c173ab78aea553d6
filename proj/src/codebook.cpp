#include "cbir/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace cbir {

void Codebook::validate() const {
    if (k < 2) throw ContractError("codebook requires k >= 2");
    if (d < 1) throw ContractError("codebook requires d >= 1");
    if (vectors.size() != static_cast<std::size_t>(k) * d)
        throw ContractError("codebook vector storage has wrong size");
    for (double v : vectors)
        if (!std::isfinite(v))
            throw ContractError("codebook contains non-finite entries");
}

double squared_l2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        double diff = a[t] - b[t];
        s += diff * diff;
    }
    return s;
}

double l2_norm(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

int nearest_code(std::span<const double> x, const Codebook& cb) {
    int best = 0;
    double best_d = squared_l2(x, cb.row(0));
    for (int r = 1; r < cb.k; ++r) {
        double d2 = squared_l2(x, cb.row(r));
        if (d2 < best_d) {
            best_d = d2;
            best = r;
        }
    }
    return best;
}

QuantizeResult quantize(const FeatureGrid& grid, const Codebook& cb) {
    if (grid.d != cb.d)
        throw ContractError("quantize: feature dimension mismatch");
    QuantizeResult out;
    out.code.grid_h = grid.grid_h;
    out.code.grid_w = grid.grid_w;
    out.code.indices.resize(grid.cells());
    out.replaced = grid;
    for (int i = 0; i < grid.cells(); ++i) {
        int r = nearest_code(grid.cell(i), cb);
        out.code.indices[i] = r;
        auto dst = out.replaced.cell(i);
        auto src = cb.row(r);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return out;
}

LatentLoss latent_loss(const FeatureGrid& grid, const Codebook& cb,
                       const LatentCode& code, double beta) {
    if (grid.d != cb.d)
        throw ContractError("latent_loss: feature dimension mismatch");
    if (code.grid_h != grid.grid_h || code.grid_w != grid.grid_w)
        throw ContractError("latent_loss: code/grid shape mismatch");
    double dist = 0.0;
    for (int i = 0; i < grid.cells(); ++i) {
        int r = code.indices[i];
        if (r < 0 || r >= cb.k)
            throw ContractError("latent_loss: code index out of range");
        dist += squared_l2(grid.cell(i), cb.row(r));
    }
    LatentLoss loss;
    loss.codebook_term = dist;
    loss.commitment_term = beta * dist;
    loss.total = loss.codebook_term + loss.commitment_term;
    return loss;
}

CodebookLearnerState make_learner(int k, int d, Stream stream,
                                  std::uint64_t seed) {
    if (k < 2) throw ContractError("learner requires k >= 2");
    if (d < 1) throw ContractError("learner requires d >= 1");
    CodebookLearnerState state;
    state.codebook.k = k;
    state.codebook.d = d;
    state.codebook.stream = stream;
    state.codebook.vectors.resize(static_cast<std::size_t>(k) * d);
    // Near-zero init keeps unused rows at negligible norm.
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> init(0.0, 1e-8);
    for (double& v : state.codebook.vectors) v = init(rng);
    state.ema_counts.assign(k, 0.0);
    state.ema_sums.assign(static_cast<std::size_t>(k) * d, 0.0);
    return state;
}

void ema_update(CodebookLearnerState& state, std::span<const double> batch) {
    const int d = state.codebook.d;
    const int k = state.codebook.k;
    if (batch.empty()) return;
    if (batch.size() % d != 0)
        throw ContractError("ema_update: batch size not a multiple of d");
    const int n = static_cast<int>(batch.size()) / d;

    std::vector<double> counts(k, 0.0);
    std::vector<double> sums(static_cast<std::size_t>(k) * d, 0.0);
    for (int i = 0; i < n; ++i) {
        std::span<const double> x(batch.data() + static_cast<std::size_t>(i) * d,
                                  static_cast<std::size_t>(d));
        int r = nearest_code(x, state.codebook);
        counts[r] += 1.0;
        double* dst = sums.data() + static_cast<std::size_t>(r) * d;
        for (int t = 0; t < d; ++t) dst[t] += x[t];
    }

    const double g = state.decay;
    for (int r = 0; r < k; ++r) {
        state.ema_counts[r] = g * state.ema_counts[r] + (1.0 - g) * counts[r];
        double* s = state.ema_sums.data() + static_cast<std::size_t>(r) * d;
        const double* b = sums.data() + static_cast<std::size_t>(r) * d;
        for (int t = 0; t < d; ++t) s[t] = g * s[t] + (1.0 - g) * b[t];
        if (state.ema_counts[r] > 0.0) {
            auto row = state.codebook.row(r);
            double denom = state.ema_counts[r] + state.epsilon;
            for (int t = 0; t < d; ++t) row[t] = s[t] / denom;
        }
    }
}

Codebook learn_codebook(std::span<const double> vectors, int d, int k,
                        int epochs, std::uint64_t seed, Stream stream) {
    if (vectors.empty()) throw ContractError("learn_codebook: empty stream");
    if (k < 2) throw ContractError("learn_codebook: k must be >= 2");
    if (d < 1 || vectors.size() % d != 0)
        throw ContractError("learn_codebook: vector storage not a multiple of d");
    CodebookLearnerState state = make_learner(k, d, stream, seed);
    for (int e = 0; e < epochs; ++e) ema_update(state, vectors);
    state.codebook.validate();
    return state.codebook;
}

double compactness(const Codebook& cb, double threshold) {
    int small = 0;
    for (int r = 0; r < cb.k; ++r)
        if (l2_norm(cb.row(r)) < threshold) ++small;
    return static_cast<double>(small) / cb.k;
}

std::vector<double> norm_stats(const Codebook& cb) {
    std::vector<double> norms(cb.k);
    for (int r = 0; r < cb.k; ++r) norms[r] = l2_norm(cb.row(r));
    std::sort(norms.begin(), norms.end(), std::greater<double>());
    return norms;
}

}  // namespace cbir
