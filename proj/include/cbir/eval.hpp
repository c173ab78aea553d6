#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cbir/search.hpp"

namespace cbir {

// Ground-truth label overlap used to score retrieval results. Sum
// semantics averages the normal-category and abnormal-category means.
double retrieval_dice(Semantics semantics, const CodeRecord& query,
                      const CodeRecord& ref);

struct QuerySelection {
    std::vector<int> record_indices;            // into index.records
    std::vector<std::string> excluded_volumes;  // no abnormal pixels
};

// One query per volume: the slice with the largest abnormal area
// (ties: lowest slice_index). All-healthy volumes are excluded.
QuerySelection select_queries(const ReferenceIndex& index);

// Label-overlap-maximizing oracle; per volume the slice with the best
// retrieval_dice, then top-q volumes by that score, descending.
RankedResult brutal_search(const CodeRecord& query, const ReferenceIndex& index,
                           Semantics semantics, int q,
                           bool exclude_query_volume = true, int jobs = 1);

// Seeded random volume/slice selection; a floor reference for sanity
// checks, not a real retrieval method.
RankedResult random_baseline(const CodeRecord& query,
                             const ReferenceIndex& index, Semantics semantics,
                             int q, std::uint64_t seed);

struct BenchmarkConfig {
    int topq = 10;
    std::vector<Metric> metrics = {Metric::Euclidean, Metric::Angular,
                                   Metric::Hamming};
    std::vector<Semantics> semantics = {Semantics::Normal, Semantics::Abnormal,
                                        Semantics::Sum};
    bool include_oracle = true;
    bool include_random_baseline = true;
    std::uint64_t baseline_seed = 0;
    int jobs = 1;
};

struct CellStats {
    double mean = 0.0;
    double stddev = 0.0;  // population std over queries
};

struct BenchmarkCell {
    std::string row;  // euclidean | angular | hamming | brutal | random
    Semantics semantics = Semantics::Normal;
    CellStats stats;
};

struct BenchmarkReport {
    int topq = 0;
    int n_queries = 0;
    std::uint64_t baseline_seed = 0;
    std::string dataset_id;
    std::vector<std::string> excluded_volumes;
    std::vector<BenchmarkCell> cells;
    double elapsed_ms = 0.0;

    const CellStats* find(const std::string& row, Semantics s) const;
};

BenchmarkReport retrieval_benchmark(const ReferenceIndex& index,
                                    const BenchmarkConfig& config);

// Aligned-column text table, rows D_E/D_A/D_H/brutal/random by
// S_normal/S_abnormal/S_sum.
std::string report_table(const BenchmarkReport& report);

struct TimingResult {
    double t_euclidean_ms = 0.0;
    double t_hamming_ms = 0.0;
    double reduction = 0.0;  // 1 - t_H / t_E
    int repeats = 0;
};

// Exhaustive K x K distance loops, single-threaded, averaged over
// `repeats` runs; serialization and index build are not measured.
TimingResult timing_bench(const Codebook& cb, const BinaryCodebook& bcb_opt,
                          int repeats = 5);

}  // namespace cbir
