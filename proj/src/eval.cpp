#include "cbir/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_map>

namespace cbir {

namespace {

long abnormal_area(const CodeRecord& r) {
    long n = 0;
    for (int v : r.abnormal_labels.values)
        if (v != 0) ++n;
    return n;
}

const CodeRecord& record_at(const ReferenceIndex& index,
                            const std::string& volume_id, int slice_index) {
    for (const auto& [vid, range] : index.volumes) {
        if (vid != volume_id) continue;
        for (int i = range.first; i < range.second; ++i)
            if (index.records[i].slice_index == slice_index)
                return index.records[i];
    }
    throw ContractError("record not found: " + volume_id);
}

double population_std(const std::vector<double>& xs, double mean) {
    if (xs.empty()) return 0.0;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / xs.size());
}

}  // namespace

double retrieval_dice(Semantics semantics, const CodeRecord& query,
                      const CodeRecord& ref) {
    switch (semantics) {
        case Semantics::Normal:
            return mean_category_dice(query.normal_labels, ref.normal_labels);
        case Semantics::Abnormal:
            return mean_category_dice(query.abnormal_labels,
                                      ref.abnormal_labels);
        case Semantics::Sum:
            return 0.5 * (mean_category_dice(query.normal_labels,
                                             ref.normal_labels) +
                          mean_category_dice(query.abnormal_labels,
                                             ref.abnormal_labels));
    }
    throw ContractError("retrieval_dice: unknown semantics");
}

QuerySelection select_queries(const ReferenceIndex& index) {
    if (index.records.empty())
        throw ContractError("select_queries: empty dataset");
    QuerySelection sel;
    for (const auto& [volume_id, range] : index.volumes) {
        int best = -1;
        long best_area = 0;
        for (int i = range.first; i < range.second; ++i) {
            long area = abnormal_area(index.records[i]);
            if (area > best_area) {
                best_area = area;
                best = i;
            }
        }
        if (best < 0) sel.excluded_volumes.push_back(volume_id);
        else sel.record_indices.push_back(best);
    }
    return sel;
}

RankedResult brutal_search(const CodeRecord& query, const ReferenceIndex& index,
                           Semantics semantics, int q,
                           bool exclude_query_volume, int jobs) {
    if (q < 1) throw ContractError("brutal_search: q must be positive");
    const int n_volumes = static_cast<int>(index.volumes.size());

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
            double score = retrieval_dice(semantics, query, index.records[i]);
            if (!best.valid || score > best.entry.score ||
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
                         if (a.score != b.score) return a.score > b.score;
                         if (a.slice_index != b.slice_index)
                             return a.slice_index < b.slice_index;
                         return a.volume_id < b.volume_id;
                     });

    RankedResult result;
    result.semantics = semantics;
    result.metric = Metric::Euclidean;  // not meaningful for the oracle
    if (static_cast<int>(entries.size()) > q) entries.resize(q);
    else result.short_of_q = static_cast<int>(entries.size()) < q;
    result.entries = std::move(entries);
    return result;
}

RankedResult random_baseline(const CodeRecord& query,
                             const ReferenceIndex& index, Semantics semantics,
                             int q, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, fnv1a(query.volume_id)));
    std::vector<int> volume_ids;
    for (int v = 0; v < static_cast<int>(index.volumes.size()); ++v)
        if (index.volumes[v].first != query.volume_id) volume_ids.push_back(v);
    std::shuffle(volume_ids.begin(), volume_ids.end(), rng);
    if (static_cast<int>(volume_ids.size()) > q) volume_ids.resize(q);

    RankedResult result;
    result.semantics = semantics;
    result.short_of_q = static_cast<int>(volume_ids.size()) < q;
    for (int v : volume_ids) {
        const auto& [volume_id, range] = index.volumes[v];
        std::uniform_int_distribution<int> pick(range.first, range.second - 1);
        const CodeRecord& r = index.records[pick(rng)];
        result.entries.push_back({volume_id, r.slice_index, 0.0});
    }
    return result;
}

const CellStats* BenchmarkReport::find(const std::string& row,
                                       Semantics s) const {
    for (const auto& c : cells)
        if (c.row == row && c.semantics == s) return &c.stats;
    return nullptr;
}

BenchmarkReport retrieval_benchmark(const ReferenceIndex& index,
                                    const BenchmarkConfig& config) {
    if (index.volumes.size() < 2)
        throw ContractError("retrieval_benchmark: need at least 2 volumes");
    const auto t0 = std::chrono::steady_clock::now();

    QuerySelection sel = select_queries(index);
    const int n_queries = static_cast<int>(sel.record_indices.size());

    std::vector<std::pair<std::string, Semantics>> layout;
    for (Metric m : config.metrics)
        for (Semantics s : config.semantics)
            layout.emplace_back(to_string(m), s);
    if (config.include_oracle)
        for (Semantics s : config.semantics) layout.emplace_back("brutal", s);
    if (config.include_random_baseline)
        for (Semantics s : config.semantics) layout.emplace_back("random", s);

    // per cell, per query: average Dice over the retrieved records
    std::vector<std::vector<double>> per_query(layout.size(),
                                               std::vector<double>(n_queries));
    parallel_for(0, n_queries, config.jobs, [&](int qi) {
        const CodeRecord& query = index.records[sel.record_indices[qi]];
        for (std::size_t c = 0; c < layout.size(); ++c) {
            const auto& [row, semantics] = layout[c];
            RankedResult ranked;
            if (row == "brutal") {
                ranked = brutal_search(query, index, semantics, config.topq);
            } else if (row == "random") {
                ranked = random_baseline(query, index, semantics, config.topq,
                                         config.baseline_seed);
            } else {
                ranked = volume_topq(query, index, semantics,
                                     metric_from_string(row), config.topq);
            }
            double acc = 0.0;
            for (const RankedEntry& e : ranked.entries)
                acc += retrieval_dice(
                    semantics, query,
                    record_at(index, e.volume_id, e.slice_index));
            per_query[c][qi] =
                ranked.entries.empty() ? 0.0 : acc / ranked.entries.size();
        }
    });

    BenchmarkReport report;
    report.topq = config.topq;
    report.n_queries = n_queries;
    report.baseline_seed = config.baseline_seed;
    report.excluded_volumes = sel.excluded_volumes;
    for (std::size_t c = 0; c < layout.size(); ++c) {
        BenchmarkCell cell;
        cell.row = layout[c].first;
        cell.semantics = layout[c].second;
        double mean = 0.0;
        for (double x : per_query[c]) mean += x;
        mean = n_queries > 0 ? mean / n_queries : 0.0;
        cell.stats.mean = mean;
        cell.stats.stddev = population_std(per_query[c], mean);
        report.cells.push_back(std::move(cell));
    }
    report.elapsed_ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - t0)
            .count();
    return report;
}

std::string report_table(const BenchmarkReport& report) {
    static const std::pair<const char*, const char*> kRows[] = {
        {"euclidean", "D_E"}, {"angular", "D_A"},   {"hamming", "D_H"},
        {"brutal", "brutal"}, {"random", "random"},
    };
    static const Semantics kCols[] = {Semantics::Normal, Semantics::Abnormal,
                                      Semantics::Sum};
    std::ostringstream out;
    out << "retrieval (mean Dice +/- std, Q=" << report.topq
        << ", queries=" << report.n_queries << ")\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-8s %15s %15s %15s\n", "", "S_normal",
                  "S_abnormal", "S_sum");
    out << line;
    for (const auto& [key, label] : kRows) {
        bool any = false;
        std::string cols[3];
        for (int c = 0; c < 3; ++c) {
            if (const CellStats* st = report.find(key, kCols[c])) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.3f +/- %.3f", st->mean,
                              st->stddev);
                cols[c] = buf;
                any = true;
            } else {
                cols[c] = "-";
            }
        }
        if (!any) continue;
        std::snprintf(line, sizeof(line), "%-8s %15s %15s %15s\n", label,
                      cols[0].c_str(), cols[1].c_str(), cols[2].c_str());
        out << line;
    }
    return out.str();
}

namespace {
volatile double g_timing_sink = 0.0;
}

TimingResult timing_bench(const Codebook& cb, const BinaryCodebook& bcb_opt,
                          int repeats) {
    if (cb.k != bcb_opt.k) throw ContractError("timing_bench: K mismatch");
    if (repeats < 1) throw ContractError("timing_bench: repeats must be >= 1");
    const int k = cb.k;
    using clock = std::chrono::steady_clock;

    TimingResult result;
    result.repeats = repeats;
    for (int rep = 0; rep < repeats; ++rep) {
        auto t0 = clock::now();
        double acc = 0.0;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                acc += std::sqrt(squared_l2(cb.row(i), cb.row(j)));
        g_timing_sink = acc;
        auto t1 = clock::now();
        long hacc = 0;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) hacc += hamming(bcb_opt, i, j);
        g_timing_sink = static_cast<double>(hacc);
        auto t2 = clock::now();
        result.t_euclidean_ms +=
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        result.t_hamming_ms +=
            std::chrono::duration<double, std::milli>(t2 - t1).count();
    }
    result.t_euclidean_ms /= repeats;
    result.t_hamming_ms /= repeats;
    result.reduction = 1.0 - result.t_hamming_ms / result.t_euclidean_ms;
    return result;
}

}  // namespace cbir
