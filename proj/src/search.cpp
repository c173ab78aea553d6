#include "cbir/search.hpp"

#include <algorithm>
#include <cmath>

namespace cbir {

const char* to_string(Metric m) {
    switch (m) {
        case Metric::Euclidean: return "euclidean";
        case Metric::Angular: return "angular";
        case Metric::Hamming: return "hamming";
    }
    return "?";
}

const char* to_string(Semantics s) {
    switch (s) {
        case Semantics::Normal: return "normal";
        case Semantics::Abnormal: return "abnormal";
        case Semantics::Sum: return "sum";
    }
    return "?";
}

Metric metric_from_string(const std::string& s) {
    if (s == "euclidean") return Metric::Euclidean;
    if (s == "angular") return Metric::Angular;
    if (s == "hamming") return Metric::Hamming;
    throw ContractError("unknown metric: " + s);
}

Semantics semantics_from_string(const std::string& s) {
    if (s == "normal") return Semantics::Normal;
    if (s == "abnormal") return Semantics::Abnormal;
    if (s == "sum") return Semantics::Sum;
    throw ContractError("unknown semantics: " + s);
}

ReferenceIndex ReferenceIndex::build(std::vector<CodeRecord> records,
                                     Codebook normal_cb, Codebook abnormal_cb,
                                     BinaryCodebook normal_bcb,
                                     BinaryCodebook abnormal_bcb) {
    ReferenceIndex index;
    // Group by volume preserving first-seen order; slices keep their
    // relative order within a volume.
    std::stable_sort(records.begin(), records.end(),
                     [](const CodeRecord& a, const CodeRecord& b) {
                         if (a.volume_id != b.volume_id)
                             return a.volume_id < b.volume_id;
                         return a.slice_index < b.slice_index;
                     });
    for (std::size_t i = 0; i + 1 < records.size(); ++i) {
        if (records[i].volume_id == records[i + 1].volume_id &&
            records[i].slice_index == records[i + 1].slice_index)
            throw ContractError("duplicate (volume_id, slice_index): " +
                                records[i].volume_id);
    }
    for (const CodeRecord& r : records) {
        for (int idx : r.normal_code.indices)
            if (idx < 0 || idx >= normal_cb.k)
                throw ContractError("normal code index out of range");
        for (int idx : r.abnormal_code.indices)
            if (idx < 0 || idx >= abnormal_cb.k)
                throw ContractError("abnormal code index out of range");
    }
    index.records = std::move(records);
    const int n = static_cast<int>(index.records.size());
    int begin = 0;
    for (int i = 1; i <= n && n > 0; ++i) {
        if (i == n || index.records[i].volume_id != index.records[begin].volume_id) {
            index.volumes.emplace_back(index.records[begin].volume_id,
                                       std::make_pair(begin, i));
            begin = i;
        }
    }
    index.normal_cb = std::move(normal_cb);
    index.abnormal_cb = std::move(abnormal_cb);
    index.normal_bcb = std::move(normal_bcb);
    index.abnormal_bcb = std::move(abnormal_bcb);
    return index;
}

double vector_distance(Metric metric, std::span<const double> a,
                       std::span<const double> b) {
    if (a.size() != b.size())
        throw ContractError("vector_distance: dimension mismatch");
    switch (metric) {
        case Metric::Euclidean:
            return std::sqrt(squared_l2(a, b));
        case Metric::Angular: {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t t = 0; t < a.size(); ++t) {
                dot += a[t] * b[t];
                na += a[t] * a[t];
                nb += b[t] * b[t];
            }
            if (na == 0.0 && nb == 0.0) return 0.0;
            if (na == 0.0 || nb == 0.0) return 1.0;
            return 1.0 - dot / std::sqrt(na * nb);
        }
        case Metric::Hamming:
            throw ContractError(
                "vector_distance: Hamming operates on bit rows, use "
                "code_distance");
    }
    throw ContractError("vector_distance: unknown metric");
}

double code_distance(Metric metric, const LatentCode& a, const LatentCode& b,
                     const Codebook& cb, const BinaryCodebook* bcb) {
    if (a.grid_h != b.grid_h || a.grid_w != b.grid_w)
        throw ContractError("code_distance: grid shape mismatch");
    double total = 0.0;
    if (metric == Metric::Hamming) {
        if (bcb == nullptr || bcb->k != cb.k)
            throw ContractError("code_distance: no matching binary codebook");
        for (int i = 0; i < a.cells(); ++i)
            total += hamming(*bcb, a.indices[i], b.indices[i]);
    } else {
        for (int i = 0; i < a.cells(); ++i)
            total += vector_distance(metric, cb.row(a.indices[i]),
                                     cb.row(b.indices[i]));
    }
    return total;
}

double similarity(Semantics semantics, Metric metric, const CodeRecord& query,
                  const CodeRecord& ref, const ReferenceIndex& index) {
    auto stream_distance = [&](Stream s) {
        const LatentCode& a =
            s == Stream::Normal ? query.normal_code : query.abnormal_code;
        const LatentCode& b =
            s == Stream::Normal ? ref.normal_code : ref.abnormal_code;
        const BinaryCodebook& bcb = index.binary_codebook(s);
        return code_distance(metric, a, b, index.codebook(s),
                             bcb.k > 0 ? &bcb : nullptr);
    };
    switch (semantics) {
        case Semantics::Normal: return stream_distance(Stream::Normal);
        case Semantics::Abnormal: return stream_distance(Stream::Abnormal);
        case Semantics::Sum:
            return stream_distance(Stream::Normal) +
                   stream_distance(Stream::Abnormal);
    }
    throw ContractError("similarity: unknown semantics");
}

RankedResult volume_topq(const CodeRecord& query, const ReferenceIndex& index,
                         Semantics semantics, Metric metric, int q,
                         bool exclude_query_volume, int jobs) {
    if (q < 1) throw ContractError("volume_topq: q must be positive");
    const int n_volumes = static_cast<int>(index.volumes.size());

    // One slot per volume keeps the parallel scan deterministic.
    struct Candidate {
        bool valid = false;
        RankedEntry entry;
    };
    std::vector<Candidate> candidates(n_volumes);
    parallel_for(0, n_volumes, jobs, [&](int v) {
        const auto& [volume_id, range] = index.volumes[v];
        if (exclude_query_volume && volume_id == query.volume_id) return;
        Candidate best;
        for (int i = range.first; i < range.second; ++i) {
            double score = similarity(semantics, metric, query,
                                      index.records[i], index);
            if (!best.valid || score < best.entry.score ||
                (score == best.entry.score &&
                 index.records[i].slice_index < best.entry.slice_index)) {
                best.valid = true;
                best.entry = {volume_id, index.records[i].slice_index, score};
            }
        }
        candidates[v] = std::move(best);
    });

    std::vector<RankedEntry> entries;
    for (auto& c : candidates)
        if (c.valid) entries.push_back(std::move(c.entry));
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RankedEntry& a, const RankedEntry& b) {
                         if (a.score != b.score) return a.score < b.score;
                         return a.volume_id < b.volume_id;
                     });

    RankedResult result;
    result.semantics = semantics;
    result.metric = metric;
    if (static_cast<int>(entries.size()) > q) entries.resize(q);
    else result.short_of_q = static_cast<int>(entries.size()) < q;
    result.entries = std::move(entries);
    return result;
}

}  // namespace cbir
