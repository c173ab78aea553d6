#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "cbir/search.hpp"

using namespace cbir;

namespace {

Codebook make_codebook(std::vector<std::vector<double>> rows,
                       Stream stream = Stream::Normal) {
    Codebook cb;
    cb.k = static_cast<int>(rows.size());
    cb.d = static_cast<int>(rows[0].size());
    cb.stream = stream;
    for (auto& r : rows) cb.vectors.insert(cb.vectors.end(), r.begin(), r.end());
    return cb;
}

LatentCode make_code(int h, int w, std::vector<int> idx) {
    LatentCode c;
    c.grid_h = h;
    c.grid_w = w;
    c.indices = std::move(idx);
    return c;
}

LabelMap blank_labels(CategorySet set) {
    LabelMap m;
    m.h = 2;
    m.w = 2;
    m.category_set = set;
    m.values = {0, 0, 0, 0};
    return m;
}

CodeRecord make_record(const std::string& vid, int slice, LatentCode normal,
                       LatentCode abnormal) {
    CodeRecord r;
    r.volume_id = vid;
    r.slice_index = slice;
    r.normal_code = std::move(normal);
    r.abnormal_code = std::move(abnormal);
    r.normal_labels = blank_labels(CategorySet::Normal6);
    r.abnormal_labels = blank_labels(CategorySet::Abnormal3);
    return r;
}

// Small deterministic index: codebook rows on a line so distances are
// easy to compute by hand.
ReferenceIndex line_index() {
    Codebook ncb = make_codebook({{0, 0}, {1, 0}, {2, 0}, {3, 0}});
    Codebook acb = make_codebook({{0, 1}, {0, 2}, {0, 3}, {0, 4}},
                                 Stream::Abnormal);
    std::vector<CodeRecord> records;
    records.push_back(make_record("v000", 0, make_code(1, 2, {0, 1}),
                                  make_code(1, 2, {0, 0})));
    records.push_back(make_record("v000", 1, make_code(1, 2, {1, 1}),
                                  make_code(1, 2, {0, 1})));
    records.push_back(make_record("v001", 0, make_code(1, 2, {2, 3}),
                                  make_code(1, 2, {1, 1})));
    records.push_back(make_record("v001", 1, make_code(1, 2, {0, 1}),
                                  make_code(1, 2, {0, 0})));
    records.push_back(make_record("v002", 0, make_code(1, 2, {3, 3}),
                                  make_code(1, 2, {3, 3})));
    return ReferenceIndex::build(std::move(records), std::move(ncb),
                                 std::move(acb));
}

}  // namespace

TEST_CASE("vector distances") {
    std::vector<double> a = {0, 0}, b = {3, 4};
    CHECK(vector_distance(Metric::Euclidean, a, b) == doctest::Approx(5.0));

    std::vector<double> v = {0.3, -0.4, 1.1};
    std::vector<double> v2 = {0.6, -0.8, 2.2};
    CHECK(vector_distance(Metric::Angular, v, v2) ==
          doctest::Approx(0.0).epsilon(1e-12));

    // zero-vector conventions
    std::vector<double> zero = {0, 0, 0};
    CHECK(vector_distance(Metric::Angular, zero, zero) == 0.0);
    CHECK(vector_distance(Metric::Angular, zero, v) == 1.0);

    CHECK_THROWS_AS(vector_distance(Metric::Hamming, a, b), ContractError);
    CHECK_THROWS_AS(vector_distance(Metric::Euclidean, a, v), ContractError);
}

TEST_CASE("metrics are symmetric with zero self-distance") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(5), b(5);
        for (auto& x : a) x = uni(rng);
        for (auto& x : b) x = uni(rng);
        for (Metric m : {Metric::Euclidean, Metric::Angular}) {
            CHECK(vector_distance(m, a, b) ==
                  doctest::Approx(vector_distance(m, b, a)));
            CHECK(vector_distance(m, a, a) == doctest::Approx(0.0));
        }
    }
}

TEST_CASE("code distance sums per-cell row distances") {
    ReferenceIndex index = line_index();
    LatentCode a = make_code(1, 2, {0, 1});
    CHECK(code_distance(Metric::Euclidean, a, a, index.normal_cb, nullptr) ==
          0.0);

    // differs only in the second cell: rows 1 vs 3, distance 2
    LatentCode b = make_code(1, 2, {0, 3});
    CHECK(code_distance(Metric::Euclidean, a, b, index.normal_cb, nullptr) ==
          doctest::Approx(2.0));

    LatentCode wrong = make_code(2, 1, {0, 1});
    CHECK_THROWS_AS(
        code_distance(Metric::Euclidean, a, wrong, index.normal_cb, nullptr),
        ContractError);
}

TEST_CASE("code distance equals brute-force per-cell recomputation") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    Codebook cb;
    cb.k = 6;
    cb.d = 3;
    cb.vectors.resize(18);
    for (double& v : cb.vectors) v = uni(rng);
    std::uniform_int_distribution<int> pick(0, 5);
    for (int trial = 0; trial < 100; ++trial) {
        LatentCode a = make_code(2, 2, {pick(rng), pick(rng), pick(rng), pick(rng)});
        LatentCode b = make_code(2, 2, {pick(rng), pick(rng), pick(rng), pick(rng)});
        for (Metric m : {Metric::Euclidean, Metric::Angular}) {
            double expected = 0.0;
            for (int i = 0; i < 4; ++i)
                expected +=
                    vector_distance(m, cb.row(a.indices[i]), cb.row(b.indices[i]));
            CHECK(code_distance(m, a, b, cb, nullptr) ==
                  doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("similarity: sum semantics is exactly additive") {
    ReferenceIndex index = line_index();
    const CodeRecord& q = index.records[0];
    for (const CodeRecord& r : index.records) {
        double sn = similarity(Semantics::Normal, Metric::Euclidean, q, r, index);
        double sa =
            similarity(Semantics::Abnormal, Metric::Euclidean, q, r, index);
        double ss = similarity(Semantics::Sum, Metric::Euclidean, q, r, index);
        CHECK(ss == sn + sa);  // bit-exact
    }
    CHECK(similarity(Semantics::Sum, Metric::Euclidean, q, q, index) == 0.0);
}

TEST_CASE("volume_topq ranks per-volume minima") {
    ReferenceIndex index = line_index();
    CodeRecord query = make_record("vq", 0, make_code(1, 2, {0, 1}),
                                   make_code(1, 2, {0, 0}));
    RankedResult result =
        volume_topq(query, index, Semantics::Normal, Metric::Euclidean, 3);
    REQUIRE(result.entries.size() == 3);
    // v000 slice 0 and v001 slice 1 both match exactly (score 0);
    // volume tie breaks lexicographically.
    CHECK(result.entries[0].volume_id == "v000");
    CHECK(result.entries[0].score == 0.0);
    CHECK(result.entries[1].volume_id == "v001");
    CHECK(result.entries[1].score == 0.0);
    CHECK(result.entries[1].slice_index == 1);
    CHECK(result.entries[2].volume_id == "v002");

    // q greater than the number of volumes: all returned, flagged short
    RankedResult all =
        volume_topq(query, index, Semantics::Normal, Metric::Euclidean, 10);
    CHECK(all.entries.size() == 3);
    CHECK(all.short_of_q);

    // query volume exclusion
    CodeRecord self = index.records[0];
    RankedResult excl =
        volume_topq(self, index, Semantics::Normal, Metric::Euclidean, 3);
    for (const auto& e : excl.entries) CHECK(e.volume_id != "v000");
}

TEST_CASE("volume_topq matches a brute-force double loop on a synthetic index") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    Codebook ncb, acb;
    ncb.k = acb.k = 8;
    ncb.d = acb.d = 3;
    acb.stream = Stream::Abnormal;
    ncb.vectors.resize(24);
    acb.vectors.resize(24);
    for (double& v : ncb.vectors) v = uni(rng);
    for (double& v : acb.vectors) v = uni(rng);
    std::uniform_int_distribution<int> pick(0, 7);
    std::vector<CodeRecord> records;
    for (int v = 0; v < 10; ++v) {
        for (int s = 0; s < 4; ++s) {
            char vid[8];
            std::snprintf(vid, sizeof(vid), "v%03d", v);
            records.push_back(make_record(
                vid, s,
                make_code(1, 3, {pick(rng), pick(rng), pick(rng)}),
                make_code(1, 3, {pick(rng), pick(rng), pick(rng)})));
        }
    }
    ReferenceIndex index = ReferenceIndex::build(records, ncb, acb);
    CodeRecord query = make_record(
        "vq", 0, make_code(1, 3, {pick(rng), pick(rng), pick(rng)}),
        make_code(1, 3, {pick(rng), pick(rng), pick(rng)}));

    for (Semantics sem : {Semantics::Normal, Semantics::Abnormal, Semantics::Sum}) {
        RankedResult got =
            volume_topq(query, index, sem, Metric::Euclidean, 5);

        // oracle: exhaustive double loop
        std::vector<RankedEntry> best;
        for (const auto& [vid, range] : index.volumes) {
            RankedEntry e{vid, -1, 0.0};
            for (int i = range.first; i < range.second; ++i) {
                double score =
                    similarity(sem, Metric::Euclidean, query, index.records[i], index);
                if (e.slice_index < 0 || score < e.score)
                    e = {vid, index.records[i].slice_index, score};
            }
            best.push_back(e);
        }
        std::stable_sort(best.begin(), best.end(),
                         [](const RankedEntry& a, const RankedEntry& b) {
                             if (a.score != b.score) return a.score < b.score;
                             return a.volume_id < b.volume_id;
                         });
        best.resize(5);
        REQUIRE(got.entries.size() == 5);
        for (int i = 0; i < 5; ++i) {
            CHECK(got.entries[i].volume_id == best[i].volume_id);
            CHECK(got.entries[i].slice_index == best[i].slice_index);
            CHECK(got.entries[i].score == best[i].score);
        }
    }
}

TEST_CASE("volume_topq is independent of the worker count") {
    ReferenceIndex index = line_index();
    CodeRecord query = make_record("vq", 0, make_code(1, 2, {2, 2}),
                                   make_code(1, 2, {1, 2}));
    for (Metric m : {Metric::Euclidean, Metric::Angular}) {
        auto a = volume_topq(query, index, Semantics::Sum, m, 3, true, 1);
        auto b = volume_topq(query, index, Semantics::Sum, m, 3, true, 4);
        REQUIRE(a.entries.size() == b.entries.size());
        for (std::size_t i = 0; i < a.entries.size(); ++i) {
            CHECK(a.entries[i].volume_id == b.entries[i].volume_id);
            CHECK(a.entries[i].score == b.entries[i].score);
        }
    }
}

TEST_CASE("hamming code distance on the optimized codebook equals masked bits") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    Codebook cb;
    cb.k = 12;
    cb.d = 4;
    cb.vectors.resize(48);
    for (double& v : cb.vectors) v = uni(rng);
    BinaryCodebook full = binarize_codebook(cb);
    BinaryCodebook opt = optimize_bits(full);

    // independently re-mask the unoptimized codebook to the kept pairs
    BinaryCodebook masked;
    masked.k = full.k;
    masked.e_bits = opt.e_bits;
    masked.pairs = opt.pairs;
    masked.words.assign(static_cast<std::size_t>(masked.k) *
                            masked.words_per_row(),
                        0);
    for (int r = 0; r < full.k; ++r) {
        int u = 0;
        for (int t = 0; t < full.e_bits; ++t) {
            if (u < opt.e_bits && full.pairs[t] == opt.pairs[u]) {
                if (full.bit(r, t)) masked.set_bit(r, u);
                ++u;
            }
        }
    }

    std::uniform_int_distribution<int> pick(0, 11);
    for (int trial = 0; trial < 50; ++trial) {
        LatentCode a = make_code(2, 2, {pick(rng), pick(rng), pick(rng), pick(rng)});
        LatentCode b = make_code(2, 2, {pick(rng), pick(rng), pick(rng), pick(rng)});
        CHECK(code_distance(Metric::Hamming, a, b, cb, &opt) ==
              code_distance(Metric::Hamming, a, b, cb, &masked));
    }
}

TEST_CASE("duplicate (volume, slice) keys are rejected") {
    Codebook ncb = make_codebook({{0, 0}, {1, 0}});
    Codebook acb = make_codebook({{0, 0}, {1, 0}}, Stream::Abnormal);
    std::vector<CodeRecord> records;
    records.push_back(make_record("v0", 0, make_code(1, 1, {0}), make_code(1, 1, {0})));
    records.push_back(make_record("v0", 0, make_code(1, 1, {1}), make_code(1, 1, {1})));
    CHECK_THROWS_AS(ReferenceIndex::build(records, ncb, acb), ContractError);
}
