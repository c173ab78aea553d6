#pragma once

#include <string>
#include <vector>

#include "cbir/codebook.hpp"
#include "cbir/hashing.hpp"
#include "cbir/metrics.hpp"

namespace cbir {

enum class Metric { Euclidean, Angular, Hamming };
enum class Semantics { Normal, Abnormal, Sum };

const char* to_string(Metric m);
const char* to_string(Semantics s);
Metric metric_from_string(const std::string& s);
Semantics semantics_from_string(const std::string& s);

// One image slice: decomposed latent codes plus ground-truth labels.
struct CodeRecord {
    std::string volume_id;
    int slice_index = 0;
    LatentCode normal_code;
    LatentCode abnormal_code;
    LabelMap normal_labels;
    LabelMap abnormal_labels;
};

// Immutable query-ready collection of records grouped by volume, with
// continuous and binary codebooks attached.
struct ReferenceIndex {
    std::vector<CodeRecord> records;
    // volume id -> [begin, end) into records, in first-seen volume order
    std::vector<std::pair<std::string, std::pair<int, int>>> volumes;
    Codebook normal_cb;
    Codebook abnormal_cb;
    BinaryCodebook normal_bcb;
    BinaryCodebook abnormal_bcb;

    static ReferenceIndex build(std::vector<CodeRecord> records,
                                Codebook normal_cb, Codebook abnormal_cb,
                                BinaryCodebook normal_bcb = {},
                                BinaryCodebook abnormal_bcb = {});
    const Codebook& codebook(Stream s) const {
        return s == Stream::Normal ? normal_cb : abnormal_cb;
    }
    const BinaryCodebook& binary_codebook(Stream s) const {
        return s == Stream::Normal ? normal_bcb : abnormal_bcb;
    }
};

struct RankedEntry {
    std::string volume_id;
    int slice_index = 0;
    double score = 0.0;  // lower is more similar
};

struct RankedResult {
    std::vector<RankedEntry> entries;
    Semantics semantics = Semantics::Sum;
    Metric metric = Metric::Euclidean;
    bool short_of_q = false;  // fewer volumes available than requested
};

// Continuous-vector distances. Hamming operates on bit rows and goes
// through code_distance instead.
double vector_distance(Metric metric, std::span<const double> a,
                       std::span<const double> b);

// Position-wise code-vector distance summed over the grid. For Hamming
// the optimized binary codebook attached to the index is used.
double code_distance(Metric metric, const LatentCode& a, const LatentCode& b,
                     const Codebook& cb, const BinaryCodebook* bcb);

// S_normal, S_abnormal, or their exact sum.
double similarity(Semantics semantics, Metric metric, const CodeRecord& query,
                  const CodeRecord& ref, const ReferenceIndex& index);

// Per reference volume, the minimum-similarity slice (ties: lowest
// slice_index); volumes ranked by that score (ties: volume_id); first q
// returned. The query's own volume is skipped when exclude_volume is set.
RankedResult volume_topq(const CodeRecord& query, const ReferenceIndex& index,
                         Semantics semantics, Metric metric, int q,
                         bool exclude_query_volume = true, int jobs = 1);

}  // namespace cbir
