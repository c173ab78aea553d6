#include "cbir/io.hpp"

#include <fstream>
#include <sstream>

using nlohmann::json;

namespace cbir {

namespace {
constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        std::uint32_t chunk = data[i] << 16;
        if (i + 1 < len) chunk |= data[i + 1] << 8;
        if (i + 2 < len) chunk |= data[i + 2];
        out.push_back(kB64Alphabet[(chunk >> 18) & 0x3f]);
        out.push_back(kB64Alphabet[(chunk >> 12) & 0x3f]);
        out.push_back(i + 1 < len ? kB64Alphabet[(chunk >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < len ? kB64Alphabet[chunk & 0x3f] : '=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    static const auto lut = [] {
        std::array<int, 256> t{};
        t.fill(-1);
        for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kB64Alphabet[i])] = i;
        return t;
    }();
    std::vector<std::uint8_t> out;
    std::uint32_t chunk = 0;
    int have = 0;
    for (char c : text) {
        if (c == '=') break;
        int v = lut[static_cast<unsigned char>(c)];
        if (v < 0) throw IoError("invalid base64 character");
        chunk = (chunk << 6) | static_cast<std::uint32_t>(v);
        if (++have == 4) {
            out.push_back((chunk >> 16) & 0xff);
            out.push_back((chunk >> 8) & 0xff);
            out.push_back(chunk & 0xff);
            have = 0;
            chunk = 0;
        }
    }
    if (have == 2) out.push_back((chunk >> 4) & 0xff);
    else if (have == 3) {
        out.push_back((chunk >> 10) & 0xff);
        out.push_back((chunk >> 2) & 0xff);
    } else if (have == 1) {
        throw IoError("truncated base64 input");
    }
    return out;
}

json codebook_to_json(const Codebook& cb) {
    json vectors = json::array();
    for (int r = 0; r < cb.k; ++r) {
        json row = json::array();
        for (double v : cb.row(r)) row.push_back(v);
        vectors.push_back(std::move(row));
    }
    return json{{"kind", "codebook"},
                {"k", cb.k},
                {"d", cb.d},
                {"stream", to_string(cb.stream)},
                {"vectors", std::move(vectors)}};
}

Codebook codebook_from_json(const json& j) {
    if (j.value("kind", "") != "codebook")
        throw IoError("expected a codebook document");
    Codebook cb;
    cb.k = j.at("k").get<int>();
    cb.d = j.at("d").get<int>();
    cb.stream = stream_from_string(j.at("stream").get<std::string>());
    cb.vectors.reserve(static_cast<std::size_t>(cb.k) * cb.d);
    for (const auto& row : j.at("vectors")) {
        if (static_cast<int>(row.size()) != cb.d)
            throw IoError("codebook row has wrong dimension");
        for (const auto& v : row) cb.vectors.push_back(v.get<double>());
    }
    cb.validate();
    return cb;
}

json binary_codebook_to_json(const BinaryCodebook& bcb) {
    json pairs = json::array();
    for (const auto& [i, j] : bcb.pairs) pairs.push_back(json::array({i, j}));
    json rows = json::array();
    const int wpr = bcb.words_per_row();
    for (int r = 0; r < bcb.k; ++r) {
        std::vector<std::uint8_t> bytes(static_cast<std::size_t>(wpr) * 8);
        for (int w = 0; w < wpr; ++w) {
            std::uint64_t word = bcb.words[static_cast<std::size_t>(r) * wpr + w];
            for (int b = 0; b < 8; ++b)
                bytes[static_cast<std::size_t>(w) * 8 + b] =
                    static_cast<std::uint8_t>(word >> (8 * b));
        }
        rows.push_back(base64_encode(bytes.data(), bytes.size()));
    }
    return json{{"kind", "binary_codebook"},
                {"k", bcb.k},
                {"e", bcb.e_bits},
                {"pairs", std::move(pairs)},
                {"rows", std::move(rows)}};
}

BinaryCodebook binary_codebook_from_json(const json& j) {
    if (j.value("kind", "") != "binary_codebook")
        throw IoError("expected a binary_codebook document");
    BinaryCodebook bcb;
    bcb.k = j.at("k").get<int>();
    bcb.e_bits = j.at("e").get<int>();
    for (const auto& p : j.at("pairs"))
        bcb.pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    if (static_cast<int>(bcb.pairs.size()) != bcb.e_bits)
        throw IoError("binary codebook pair count does not match e");
    const int wpr = bcb.words_per_row();
    bcb.words.assign(static_cast<std::size_t>(bcb.k) * wpr, 0);
    const auto& rows = j.at("rows");
    if (static_cast<int>(rows.size()) != bcb.k)
        throw IoError("binary codebook row count does not match k");
    for (int r = 0; r < bcb.k; ++r) {
        auto bytes = base64_decode(rows[r].get<std::string>());
        if (bytes.size() != static_cast<std::size_t>(wpr) * 8)
            throw IoError("binary codebook row has wrong byte length");
        for (int w = 0; w < wpr; ++w) {
            std::uint64_t word = 0;
            for (int b = 0; b < 8; ++b)
                word |= static_cast<std::uint64_t>(
                            bytes[static_cast<std::size_t>(w) * 8 + b])
                        << (8 * b);
            bcb.words[static_cast<std::size_t>(r) * wpr + w] = word;
        }
    }
    return bcb;
}

namespace {

json label_map_to_json(const LabelMap& m) {
    json rows = json::array();
    for (int y = 0; y < m.h; ++y) {
        json row = json::array();
        for (int x = 0; x < m.w; ++x) row.push_back(m.at(y, x));
        rows.push_back(std::move(row));
    }
    return rows;
}

LabelMap label_map_from_json(const json& j, CategorySet set) {
    LabelMap m;
    m.category_set = set;
    m.h = static_cast<int>(j.size());
    m.w = m.h > 0 ? static_cast<int>(j.at(0).size()) : 0;
    m.values.reserve(static_cast<std::size_t>(m.h) * m.w);
    for (const auto& row : j) {
        if (static_cast<int>(row.size()) != m.w)
            throw IoError("ragged label map");
        for (const auto& v : row) m.values.push_back(v.get<int>());
    }
    m.validate();
    return m;
}

json code_to_json(const LatentCode& c) {
    json rows = json::array();
    for (int y = 0; y < c.grid_h; ++y) {
        json row = json::array();
        for (int x = 0; x < c.grid_w; ++x)
            row.push_back(c.indices[static_cast<std::size_t>(y) * c.grid_w + x]);
        rows.push_back(std::move(row));
    }
    return rows;
}

LatentCode code_from_json(const json& j) {
    LatentCode c;
    c.grid_h = static_cast<int>(j.size());
    c.grid_w = c.grid_h > 0 ? static_cast<int>(j.at(0).size()) : 0;
    if (c.grid_h * c.grid_w == 0) throw IoError("empty latent code grid");
    c.indices.reserve(static_cast<std::size_t>(c.grid_h) * c.grid_w);
    for (const auto& row : j) {
        if (static_cast<int>(row.size()) != c.grid_w)
            throw IoError("ragged latent code grid");
        for (const auto& v : row) c.indices.push_back(v.get<int>());
    }
    return c;
}

}  // namespace

json record_to_json(const CodeRecord& r) {
    return json{{"volume_id", r.volume_id},
                {"slice_index", r.slice_index},
                {"normal_code", code_to_json(r.normal_code)},
                {"abnormal_code", code_to_json(r.abnormal_code)},
                {"normal_labels", label_map_to_json(r.normal_labels)},
                {"abnormal_labels", label_map_to_json(r.abnormal_labels)}};
}

CodeRecord record_from_json(const json& j) {
    CodeRecord r;
    r.volume_id = j.at("volume_id").get<std::string>();
    r.slice_index = j.at("slice_index").get<int>();
    r.normal_code = code_from_json(j.at("normal_code"));
    r.abnormal_code = code_from_json(j.at("abnormal_code"));
    r.normal_labels =
        label_map_from_json(j.at("normal_labels"), CategorySet::Normal6);
    r.abnormal_labels =
        label_map_from_json(j.at("abnormal_labels"), CategorySet::Abnormal3);
    return r;
}

void save_codebook(const Codebook& cb, const std::filesystem::path& path) {
    write_file(path, codebook_to_json(cb).dump() + "\n");
}

Codebook load_codebook(const std::filesystem::path& path) {
    try {
        return codebook_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw IoError("failed to parse " + path.string() + ": " + e.what());
    }
}

void save_binary_codebook(const BinaryCodebook& bcb,
                          const std::filesystem::path& path) {
    write_file(path, binary_codebook_to_json(bcb).dump() + "\n");
}

BinaryCodebook load_binary_codebook(const std::filesystem::path& path) {
    try {
        return binary_codebook_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw IoError("failed to parse " + path.string() + ": " + e.what());
    }
}

void save_dataset(const std::vector<CodeRecord>& records,
                  const std::filesystem::path& path) {
    std::ostringstream out;
    for (const CodeRecord& r : records) out << record_to_json(r).dump() << "\n";
    write_file(path, out.str());
}

std::vector<CodeRecord> load_dataset(const std::filesystem::path& path) {
    std::vector<CodeRecord> records;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw IoError("bad record at " + path.string() + ":" +
                          std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

json report_to_json(const BenchmarkReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells)
        cells.push_back(json{{"row", c.row},
                             {"semantics", to_string(c.semantics)},
                             {"mean", c.stats.mean},
                             {"std", c.stats.stddev}});
    // Timings live under "meta" so the "results" subtree is reproducible
    // byte for byte across runs.
    return json{{"kind", "retrieval_report"},
                {"results",
                 json{{"topq", report.topq},
                      {"n_queries", report.n_queries},
                      {"baseline_seed", report.baseline_seed},
                      {"dataset_id", report.dataset_id},
                      {"excluded_volumes", report.excluded_volumes},
                      {"cells", std::move(cells)}}},
                {"meta", json{{"elapsed_ms", report.elapsed_ms}}}};
}

json timing_to_json(const TimingResult& t) {
    return json{{"kind", "timing_report"},
                {"repeats", t.repeats},
                {"t_euclidean_ms", t.t_euclidean_ms},
                {"t_hamming_ms", t.t_hamming_ms},
                {"reduction", t.reduction}};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

std::string file_digest(const std::filesystem::path& path) {
    std::string content = read_file(path);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(content)));
    return buf;
}

}  // namespace cbir
