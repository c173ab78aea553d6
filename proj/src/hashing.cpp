#include "cbir/hashing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

namespace cbir {

Codebook round_small_norms(const Codebook& cb, double threshold) {
    Codebook out = cb;
    for (int r = 0; r < out.k; ++r) {
        if (l2_norm(out.row(r)) < threshold) {
            auto row = out.row(r);
            std::fill(row.begin(), row.end(), 0.0);
        }
    }
    return out;
}

double hyperplane_eval(std::span<const double> e_i,
                       std::span<const double> e_j,
                       std::span<const double> x) {
    if (e_i.size() != e_j.size() || e_i.size() != x.size())
        throw ContractError("hyperplane_eval: dimension mismatch");
    double dot = 0.0, ni = 0.0, nj = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        dot += (e_i[t] - e_j[t]) * x[t];
        ni += e_i[t] * e_i[t];
        nj += e_j[t] * e_j[t];
    }
    return dot - 0.5 * (ni - nj);
}

BinaryCodebook binarize_codebook(const Codebook& cb, BinarizeReport* report) {
    if (cb.k < 2) throw ContractError("binarize_codebook: k must be >= 2");
    const int k = cb.k;
    const int d = cb.d;

    BinaryCodebook bcb;
    bcb.k = k;
    bcb.e_bits = k * (k - 1) / 2;
    bcb.pairs.reserve(bcb.e_bits);
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) bcb.pairs.emplace_back(i, j);
    bcb.words.assign(static_cast<std::size_t>(k) * bcb.words_per_row(), 0);

    // Gram matrix makes each hyperplane evaluation a 3-term expression:
    // H_(i,j)(e_r) = <e_r,e_i> - <e_r,e_j> - (<e_i,e_i> - <e_j,e_j>)/2.
    std::vector<double> gram(static_cast<std::size_t>(k) * k);
    for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) {
            double s = 0.0;
            auto a = cb.row(i);
            auto b = cb.row(j);
            for (int t = 0; t < d; ++t) s += a[t] * b[t];
            gram[static_cast<std::size_t>(i) * k + j] = s;
            gram[static_cast<std::size_t>(j) * k + i] = s;
        }
    }

    constexpr double kIncidenceTol = 1e-12;
    constexpr std::size_t kMaxSamples = 32;
    for (int r = 0; r < k; ++r) {
        const double* gr = gram.data() + static_cast<std::size_t>(r) * k;
        int t = 0;
        for (int i = 0; i < k; ++i) {
            const double gii = gram[static_cast<std::size_t>(i) * k + i];
            for (int j = i + 1; j < k; ++j, ++t) {
                const double gjj = gram[static_cast<std::size_t>(j) * k + j];
                const double v = gr[i] - gr[j] - 0.5 * (gii - gjj);
                if (v >= 0.0) bcb.set_bit(r, t);
                if (report && std::fabs(v) < kIncidenceTol) {
                    ++report->incidence_count;
                    if (report->samples.size() < kMaxSamples)
                        report->samples.push_back({r, i, j});
                }
            }
        }
    }
    return bcb;
}

int hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
    int s = 0;
    for (std::size_t w = 0; w < a.size(); ++w)
        s += std::popcount(a[w] ^ b[w]);
    return s;
}

namespace {

// Working state for the bit-length optimization: current pairwise
// Hamming distances plus, per anchor, the argmin shell A (distance m)
// and the next shell B (distance m+1). A bit is removable iff for every
// anchor either all of A disagrees on it (the whole shell shifts down
// together) or none of A and none of B disagrees (nothing moves into or
// out of the shell).
struct OptimizerState {
    const BinaryCodebook* bcb;
    int k;
    std::vector<std::int32_t> dist;      // k*k
    std::vector<std::int32_t> min_dist;  // per anchor
    std::vector<std::vector<int>> shell_a;
    std::vector<std::vector<int>> shell_b;

    std::vector<std::uint32_t> version;  // bumped when an anchor's shells change
    std::vector<int> scratch_a, scratch_b;

    void rebuild_shells(int i) {
        const std::int32_t* row = dist.data() + static_cast<std::size_t>(i) * k;
        std::int32_t m = INT32_MAX;
        for (int j = 0; j < k; ++j)
            if (j != i && row[j] < m) m = row[j];
        scratch_a.clear();
        scratch_b.clear();
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            if (row[j] == m) scratch_a.push_back(j);
            else if (row[j] == m + 1) scratch_b.push_back(j);
        }
        if (m != min_dist[i] || scratch_a != shell_a[i] ||
            scratch_b != shell_b[i]) {
            min_dist[i] = m;
            shell_a[i] = scratch_a;
            shell_b[i] = scratch_b;
            ++version[i];
        }
    }

    bool anchor_blocks(int i, int t) const {
        const bool bi = bcb->bit(i, t);
        bool any_agree = false, any_disagree = false;
        for (int j : shell_a[i]) {
            if (bcb->bit(j, t) != bi) any_disagree = true;
            else any_agree = true;
            if (any_agree && any_disagree) return true;
        }
        if (any_disagree) return false;  // whole shell shifts by one
        for (int j : shell_b[i])
            if (bcb->bit(j, t) != bi) return true;
        return false;
    }

    // Deletability is a pure function of the current shells, so caching
    // the anchor that last blocked each bit and re-testing it first
    // rejects still-blocked bits cheaply (watched-blocker trick). If the
    // blocker's shells have not changed since, skip even the re-test.
    std::vector<int> last_blocker;
    std::vector<std::uint32_t> blocker_version;

    bool deletable(int t) {
        const int w = last_blocker[t];
        if (blocker_version[t] == version[w]) return false;
        if (anchor_blocks(w, t)) {
            blocker_version[t] = version[w];
            return false;
        }
        for (int i = 0; i < k; ++i) {
            if (i == w) continue;
            if (anchor_blocks(i, t)) {
                last_blocker[t] = i;
                blocker_version[t] = version[i];
                return false;
            }
        }
        return true;
    }

    void remove_bit(int t) {
        // Only pairs disagreeing at t move, and an anchor's shells can
        // only change if a distance inside its [m, m+2] window moved.
        std::vector<int> zeros, ones;
        for (int i = 0; i < k; ++i)
            (bcb->bit(i, t) ? ones : zeros).push_back(i);
        std::vector<std::int8_t> touched(k, 0);
        for (int i : ones) {
            std::int32_t* row = dist.data() + static_cast<std::size_t>(i) * k;
            for (int j : zeros) {
                if (row[j] <= min_dist[i] + 2) touched[i] = 1;
                if (row[j] <= min_dist[j] + 2) touched[j] = 1;
                --row[j];
                --dist[static_cast<std::size_t>(j) * k + i];
            }
        }
        for (int i = 0; i < k; ++i)
            if (touched[i]) rebuild_shells(i);
    }
};

}  // namespace

BinaryCodebook optimize_bits(const BinaryCodebook& bcb) {
    const int k = bcb.k;
    const int e = bcb.e_bits;
    if (k < 2 || e == 0) return bcb;

    OptimizerState st;
    st.bcb = &bcb;
    st.k = k;
    st.dist.resize(static_cast<std::size_t>(k) * k, 0);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            std::int32_t h = hamming(bcb, i, j);
            st.dist[static_cast<std::size_t>(i) * k + j] = h;
            st.dist[static_cast<std::size_t>(j) * k + i] = h;
        }
    }
    st.min_dist.assign(k, -1);
    st.shell_a.resize(k);
    st.shell_b.resize(k);
    st.version.assign(k, 0);
    st.last_blocker.assign(e, 0);
    st.blocker_version.assign(e, UINT32_MAX);
    for (int i = 0; i < k; ++i) st.rebuild_shells(i);

    // Kept bit positions as a singly linked list in original order, so
    // removal is O(1) and every restart rescans from the first kept bit.
    std::vector<int> next(e + 1);
    std::iota(next.begin(), next.end(), 1);
    int head = 0;
    int kept = e;

    bool removed = true;
    while (removed && kept > 1) {
        removed = false;
        int prev = -1;
        for (int t = head; t < e; t = next[t]) {
            if (st.deletable(t)) {
                st.remove_bit(t);
                if (prev < 0) head = next[t];
                else next[prev] = next[t];
                --kept;
                removed = true;
                break;
            }
            prev = t;
        }
    }

    BinaryCodebook out;
    out.k = k;
    out.e_bits = kept;
    out.pairs.reserve(kept);
    std::vector<int> kept_positions;
    kept_positions.reserve(kept);
    for (int t = head; t < e; t = next[t]) {
        out.pairs.push_back(bcb.pairs[t]);
        kept_positions.push_back(t);
    }
    out.words.assign(static_cast<std::size_t>(k) * out.words_per_row(), 0);
    for (int r = 0; r < k; ++r)
        for (int u = 0; u < kept; ++u)
            if (bcb.bit(r, kept_positions[u])) out.set_bit(r, u);
    return out;
}

namespace {

// Indices of the q nearest neighbors of anchor (self excluded); ties
// break to the lowest index.
template <typename DistFn>
std::vector<int> topq_indices(int anchor, int k, int q, DistFn&& dist) {
    std::vector<std::pair<double, int>> order;
    order.reserve(k - 1);
    for (int j = 0; j < k; ++j)
        if (j != anchor) order.emplace_back(dist(j), j);
    std::partial_sort(order.begin(), order.begin() + q, order.end());
    std::vector<int> out(q);
    for (int t = 0; t < q; ++t) out[t] = order[t].second;
    return out;
}

}  // namespace

double concordance(const Codebook& cb, const BinaryCodebook& bcb, int q) {
    if (cb.k != bcb.k) throw ContractError("concordance: K mismatch");
    if (q < 1 || q >= cb.k) throw ContractError("concordance: require 1 <= q < K");
    double total = 0.0;
    for (int i = 0; i < cb.k; ++i) {
        auto euclid = topq_indices(i, cb.k, q, [&](int j) {
            return squared_l2(cb.row(i), cb.row(j));
        });
        auto binary = topq_indices(i, cb.k, q, [&](int j) {
            return static_cast<double>(hamming(bcb, i, j));
        });
        std::sort(euclid.begin(), euclid.end());
        std::sort(binary.begin(), binary.end());
        std::vector<int> inter;
        std::set_intersection(euclid.begin(), euclid.end(), binary.begin(),
                              binary.end(), std::back_inserter(inter));
        std::size_t uni = euclid.size() + binary.size() - inter.size();
        total += static_cast<double>(inter.size()) / static_cast<double>(uni);
    }
    return total / cb.k;
}

double compression_ratio(const BinaryCodebook& optimized,
                         const BinaryCodebook& original) {
    if (optimized.k != original.k)
        throw ContractError("compression_ratio: K mismatch");
    if (original.e_bits == 0)
        throw ContractError("compression_ratio: original has no bits");
    return static_cast<double>(optimized.e_bits) /
           static_cast<double>(original.e_bits);
}

}  // namespace cbir
