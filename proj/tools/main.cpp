// Command-line surface for the latent-code retrieval pipeline:
// synth -> learn-codebook -> binarize -> optimize -> index/query/eval,
// plus verify, bench, and stats. Every command writes a run manifest
// with the resolved config and input/output digests.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbir/eval.hpp"
#include "cbir/io.hpp"
#include "cbir/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct Manifest {
    std::string command;
    json config = json::object();
    std::map<std::string, std::string> inputs;   // path -> digest
    std::map<std::string, std::string> outputs;  // path -> digest
    std::chrono::steady_clock::time_point start =
        std::chrono::steady_clock::now();

    void add_input(const fs::path& p) { inputs[p.string()] = cbir::file_digest(p); }
    void add_output(const fs::path& p) { outputs[p.string()] = cbir::file_digest(p); }

    void write(const fs::path& path) const {
        double elapsed =
            std::chrono::duration<double, std::milli>(
                std::chrono::steady_clock::now() - start)
                .count();
        json j{{"kind", "run_manifest"},
               {"tool_version", kToolVersion},
               {"command", command},
               {"config", config},
               {"inputs", inputs},
               {"outputs", outputs},
               {"elapsed_ms", elapsed}};
        cbir::write_file(path, j.dump(2) + "\n");
    }
};

fs::path manifest_path_for(const fs::path& out) {
    if (fs::is_directory(out)) return out / "manifest.json";
    return out.string() + ".manifest.json";
}

std::vector<cbir::Metric> parse_metrics(const std::string& spec) {
    std::vector<cbir::Metric> metrics;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) metrics.push_back(cbir::metric_from_string(tok));
    if (metrics.empty()) throw cbir::ContractError("no metrics selected");
    return metrics;
}

struct DatasetPaths {
    fs::path dataset, normal_cb, abnormal_cb, normal_bin, abnormal_bin;

    explicit DatasetPaths(const fs::path& dir)
        : dataset(dir / "dataset.jsonl"),
          normal_cb(dir / "codebook_normal.json"),
          abnormal_cb(dir / "codebook_abnormal.json"),
          normal_bin(dir / "binary_normal_opt.json"),
          abnormal_bin(dir / "binary_abnormal_opt.json") {}
};

cbir::ReferenceIndex load_index(const DatasetPaths& paths, bool need_binary,
                                Manifest& manifest) {
    manifest.add_input(paths.dataset);
    manifest.add_input(paths.normal_cb);
    manifest.add_input(paths.abnormal_cb);
    cbir::BinaryCodebook normal_bin, abnormal_bin;
    if (need_binary) {
        if (!fs::exists(paths.normal_bin) || !fs::exists(paths.abnormal_bin))
            throw cbir::ContractError(
                "hamming metric requires optimized binary codebooks "
                "(binary_normal_opt.json / binary_abnormal_opt.json); run "
                "`binarize` and `optimize` first");
        manifest.add_input(paths.normal_bin);
        manifest.add_input(paths.abnormal_bin);
        normal_bin = cbir::load_binary_codebook(paths.normal_bin);
        abnormal_bin = cbir::load_binary_codebook(paths.abnormal_bin);
    }
    return cbir::ReferenceIndex::build(
        cbir::load_dataset(paths.dataset), cbir::load_codebook(paths.normal_cb),
        cbir::load_codebook(paths.abnormal_cb), std::move(normal_bin),
        std::move(abnormal_bin));
}

void save_features(const std::vector<cbir::CodeRecord>& records,
                   cbir::Stream stream, const cbir::SynthConfig& cfg,
                   std::uint64_t noise_seed, const fs::path& path) {
    std::ostringstream out;
    for (const auto& r : records) {
        const cbir::LabelMap& labels =
            stream == cbir::Stream::Normal ? r.normal_labels : r.abnormal_labels;
        cbir::FeatureGrid g = cbir::features_for_labels(
            labels, cfg.grid_h, cfg.grid_w, cfg.d, noise_seed);
        for (int i = 0; i < g.cells(); ++i) {
            json vec = json::array();
            for (double v : g.cell(i)) vec.push_back(v);
            out << vec.dump() << "\n";
        }
    }
    cbir::write_file(path, out.str());
}

int run_synth(const cbir::SynthConfig& cfg, const fs::path& out_dir,
              bool emit_features) {
    Manifest manifest;
    manifest.command = "synth";
    manifest.config = {{"volumes", cfg.volumes},
                       {"slices_per_volume", cfg.slices_per_volume},
                       {"grid_h", cfg.grid_h},
                       {"grid_w", cfg.grid_w},
                       {"label_h", cfg.label_h},
                       {"label_w", cfg.label_w},
                       {"k", cfg.k},
                       {"d", cfg.d},
                       {"lesion_rate", cfg.lesion_rate},
                       {"epochs", cfg.epochs},
                       {"seed", cfg.seed},
                       {"jobs", cfg.jobs},
                       {"emit_features", emit_features}};
    fs::create_directories(out_dir);
    cbir::SynthDataset ds = cbir::generate(cfg);
    DatasetPaths paths(out_dir);
    cbir::save_dataset(ds.records, paths.dataset);
    cbir::save_codebook(ds.normal_cb, paths.normal_cb);
    cbir::save_codebook(ds.abnormal_cb, paths.abnormal_cb);
    manifest.add_output(paths.dataset);
    manifest.add_output(paths.normal_cb);
    manifest.add_output(paths.abnormal_cb);
    if (emit_features) {
        fs::path fn = out_dir / "features_normal.jsonl";
        fs::path fa = out_dir / "features_abnormal.jsonl";
        save_features(ds.records, cbir::Stream::Normal, cfg,
                      cbir::mix_seed(cfg.seed, 0x4e4f524d), fn);
        save_features(ds.records, cbir::Stream::Abnormal, cfg,
                      cbir::mix_seed(cfg.seed, 0x41424e4d), fa);
        manifest.add_output(fn);
        manifest.add_output(fa);
    }
    manifest.write(out_dir / "manifest.json");
    std::cout << "wrote " << ds.records.size() << " records to " << out_dir
              << "\n";
    return 0;
}

std::vector<double> load_feature_stream(const fs::path& path, int d) {
    std::vector<double> data;
    std::istringstream in(cbir::read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json vec = json::parse(line);
        if (static_cast<int>(vec.size()) != d)
            throw cbir::ContractError("feature vector dimension mismatch");
        for (const auto& v : vec) data.push_back(v.get<double>());
    }
    return data;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"similarity search over decomposed discrete latent codes"};
    app.require_subcommand(1);

    // synth
    cbir::SynthConfig synth_cfg;
    std::string synth_out = "data";
    bool emit_features = false;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--volumes", synth_cfg.volumes);
    synth->add_option("--slices", synth_cfg.slices_per_volume);
    synth->add_option("--grid", synth_cfg.grid_h)
        ->description("latent grid edge (grid is square)");
    synth->add_option("--label", synth_cfg.label_h)
        ->description("label map edge (maps are square)");
    synth->add_option("--k", synth_cfg.k);
    synth->add_option("--d", synth_cfg.d);
    synth->add_option("--lesion-rate", synth_cfg.lesion_rate);
    synth->add_option("--epochs", synth_cfg.epochs);
    synth->add_option("--seed", synth_cfg.seed);
    synth->add_option("--jobs", synth_cfg.jobs);
    synth->add_flag("--emit-features", emit_features);
    synth->add_option("--out", synth_out);

    // learn-codebook
    std::string learn_in, learn_out = "codebook.json", learn_stream = "normal";
    int learn_k = 512, learn_d = 64, learn_epochs = 10;
    std::uint64_t learn_seed = 0;
    auto* learn =
        app.add_subcommand("learn-codebook", "learn a codebook from features");
    learn->add_option("--in", learn_in)->required();
    learn->add_option("--k", learn_k);
    learn->add_option("--d", learn_d);
    learn->add_option("--epochs", learn_epochs);
    learn->add_option("--seed", learn_seed);
    learn->add_option("--stream", learn_stream);
    learn->add_option("--out", learn_out);

    // binarize
    std::string bin_in, bin_out = "binary.json";
    double bin_threshold = 1e-5;
    auto* binarize = app.add_subcommand(
        "binarize", "zero-round small rows and binarize a codebook");
    binarize->add_option("--in", bin_in)->required();
    binarize->add_option("--threshold", bin_threshold);
    binarize->add_option("--out", bin_out);

    // optimize
    std::string opt_in, opt_out = "binary_opt.json";
    auto* optimize =
        app.add_subcommand("optimize", "shorten binary codes preserving "
                                       "nearest-neighbor sets");
    optimize->add_option("--in", opt_in)->required();
    optimize->add_option("--out", opt_out);

    // verify
    std::string verify_a, verify_b;
    auto* verify = app.add_subcommand(
        "verify", "check argmin-set preservation between two binary codebooks");
    verify->add_option("--a", verify_a)->required();
    verify->add_option("--b", verify_b)->required();

    // index
    std::string index_dataset = "data", index_out = "index.json";
    bool index_with_binary = false;
    auto* index_cmd =
        app.add_subcommand("index", "validate a dataset and write an index summary");
    index_cmd->add_option("--dataset", index_dataset);
    index_cmd->add_flag("--with-binary", index_with_binary);
    index_cmd->add_option("--out", index_out);

    // query
    std::string query_dataset = "data", query_volume, query_semantics = "sum",
                query_metric = "euclidean", query_out;
    int query_slice = -1, query_topq = 10, query_jobs = 1;
    bool query_include_self = false;
    auto* query = app.add_subcommand("query", "volume-wise top-Q retrieval");
    query->add_option("--dataset", query_dataset);
    query->add_option("--volume", query_volume)->required();
    query->add_option("--slice", query_slice)
        ->description("slice index; defaults to the largest-lesion slice");
    query->add_option("--semantics", query_semantics);
    query->add_option("--metric", query_metric);
    query->add_option("--topq", query_topq);
    query->add_option("--jobs", query_jobs);
    query->add_flag("--include-self", query_include_self);
    query->add_option("--out", query_out);

    // eval
    std::string eval_dataset = "data", eval_metrics = "euclidean,angular,hamming",
                eval_format = "table", eval_out;
    int eval_topq = 10, eval_jobs = 1;
    bool eval_oracle = false, eval_no_random = false;
    std::uint64_t eval_baseline_seed = 0;
    auto* eval_cmd =
        app.add_subcommand("eval", "retrieval benchmark over all queries");
    eval_cmd->add_option("--dataset", eval_dataset);
    eval_cmd->add_option("--topq", eval_topq);
    eval_cmd->add_option("--metrics", eval_metrics);
    eval_cmd->add_flag("--oracle", eval_oracle);
    eval_cmd->add_flag("--no-random", eval_no_random);
    eval_cmd->add_option("--baseline-seed", eval_baseline_seed);
    eval_cmd->add_option("--format", eval_format)
        ->check(CLI::IsMember({"json", "table"}));
    eval_cmd->add_option("--jobs", eval_jobs);
    eval_cmd->add_option("--out", eval_out);

    // bench
    std::string bench_cb, bench_bin, bench_out;
    int bench_repeats = 5;
    auto* bench = app.add_subcommand(
        "bench", "time exhaustive Euclidean vs Hamming distance kernels");
    bench->add_option("--codebook", bench_cb)->required();
    bench->add_option("--binary", bench_bin)->required();
    bench->add_option("--repeats", bench_repeats);
    bench->add_option("--out", bench_out);

    // stats
    std::string stats_cb, stats_format = "table";
    double stats_threshold = 1e-5;
    auto* stats =
        app.add_subcommand("stats", "norm distribution and compactness");
    stats->add_option("--codebook", stats_cb)->required();
    stats->add_option("--threshold", stats_threshold);
    stats->add_option("--format", stats_format)
        ->check(CLI::IsMember({"json", "table"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 64;
    }

    try {
        if (*synth) {
            synth_cfg.grid_w = synth_cfg.grid_h;
            synth_cfg.label_w = synth_cfg.label_h;
            return run_synth(synth_cfg, synth_out, emit_features);
        }

        if (*learn) {
            Manifest manifest;
            manifest.command = "learn-codebook";
            manifest.config = {{"in", learn_in},     {"k", learn_k},
                               {"d", learn_d},       {"epochs", learn_epochs},
                               {"seed", learn_seed}, {"stream", learn_stream},
                               {"out", learn_out}};
            manifest.add_input(learn_in);
            auto data = load_feature_stream(learn_in, learn_d);
            cbir::Codebook cb = cbir::learn_codebook(
                data, learn_d, learn_k, learn_epochs, learn_seed,
                cbir::stream_from_string(learn_stream));
            cbir::save_codebook(cb, learn_out);
            manifest.add_output(learn_out);
            manifest.write(manifest_path_for(learn_out));
            return 0;
        }

        if (*binarize) {
            Manifest manifest;
            manifest.command = "binarize";
            manifest.config = {{"in", bin_in},
                               {"threshold", bin_threshold},
                               {"out", bin_out}};
            manifest.add_input(bin_in);
            cbir::Codebook cb = cbir::round_small_norms(
                cbir::load_codebook(bin_in), bin_threshold);
            cbir::BinarizeReport report;
            cbir::BinaryCodebook bcb = cbir::binarize_codebook(cb, &report);
            cbir::save_binary_codebook(bcb, bin_out);
            manifest.config["hyperplane_incidences"] = report.incidence_count;
            manifest.add_output(bin_out);
            manifest.write(manifest_path_for(bin_out));
            std::cout << "binarized K=" << bcb.k << " into " << bcb.e_bits
                      << " bits per row";
            if (report.incidence_count > 0)
                std::cout << " (warning: " << report.incidence_count
                          << " exact hyperplane incidences)";
            std::cout << "\n";
            return 0;
        }

        if (*optimize) {
            Manifest manifest;
            manifest.command = "optimize";
            manifest.config = {{"in", opt_in}, {"out", opt_out}};
            manifest.add_input(opt_in);
            cbir::BinaryCodebook bcb = cbir::load_binary_codebook(opt_in);
            cbir::BinaryCodebook opt = cbir::optimize_bits(bcb);
            cbir::save_binary_codebook(opt, opt_out);
            manifest.add_output(opt_out);
            manifest.write(manifest_path_for(opt_out));
            std::cout << "optimized " << bcb.e_bits << " -> " << opt.e_bits
                      << " bits (compression "
                      << cbir::compression_ratio(opt, bcb) << ")\n";
            return 0;
        }

        if (*verify) {
            cbir::BinaryCodebook a = cbir::load_binary_codebook(verify_a);
            cbir::BinaryCodebook b = cbir::load_binary_codebook(verify_b);
            if (a.k != b.k) throw cbir::ContractError("verify: K mismatch");
            bool preserved = true;
            for (int i = 0; i < a.k && preserved; ++i) {
                auto argmin_set = [&](const cbir::BinaryCodebook& bcb) {
                    std::vector<int> set;
                    int best = -1;
                    for (int j = 0; j < bcb.k; ++j) {
                        if (j == i) continue;
                        int h = cbir::hamming(bcb, i, j);
                        if (best < 0 || h < best) {
                            best = h;
                            set.clear();
                        }
                        if (h == best) set.push_back(j);
                    }
                    return set;
                };
                preserved = argmin_set(a) == argmin_set(b);
            }
            std::cout << "argmin sets preserved: "
                      << (preserved ? "true" : "false") << "\n";
            return preserved ? 0 : 1;
        }

        if (*index_cmd) {
            Manifest manifest;
            manifest.command = "index";
            manifest.config = {{"dataset", index_dataset},
                               {"with_binary", index_with_binary},
                               {"out", index_out}};
            DatasetPaths paths(index_dataset);
            cbir::ReferenceIndex index =
                load_index(paths, index_with_binary, manifest);
            json volumes = json::array();
            for (const auto& [vid, range] : index.volumes)
                volumes.push_back(
                    json{{"volume_id", vid},
                         {"slices", range.second - range.first}});
            json j{{"kind", "index_summary"},
                   {"records", index.records.size()},
                   {"volumes", std::move(volumes)},
                   {"inputs", manifest.inputs}};
            cbir::write_file(index_out, j.dump(2) + "\n");
            manifest.add_output(index_out);
            manifest.write(manifest_path_for(index_out));
            std::cout << "indexed " << index.records.size() << " records in "
                      << index.volumes.size() << " volumes\n";
            return 0;
        }

        if (*query) {
            Manifest manifest;
            manifest.command = "query";
            manifest.config = {{"dataset", query_dataset},
                               {"volume", query_volume},
                               {"slice", query_slice},
                               {"semantics", query_semantics},
                               {"metric", query_metric},
                               {"topq", query_topq},
                               {"jobs", query_jobs},
                               {"include_self", query_include_self}};
            cbir::Metric metric = cbir::metric_from_string(query_metric);
            DatasetPaths paths(query_dataset);
            cbir::ReferenceIndex index =
                load_index(paths, metric == cbir::Metric::Hamming, manifest);

            const cbir::CodeRecord* query_record = nullptr;
            long best_area = -1;
            for (const auto& r : index.records) {
                if (r.volume_id != query_volume) continue;
                if (query_slice >= 0) {
                    if (r.slice_index == query_slice) query_record = &r;
                } else {
                    long area = cbir::area_of(r, cbir::Stream::Abnormal);
                    if (area > best_area) {
                        best_area = area;
                        query_record = &r;
                    }
                }
            }
            if (!query_record)
                throw cbir::ContractError("query volume/slice not found: " +
                                          query_volume);
            cbir::RankedResult result = cbir::volume_topq(
                *query_record, index,
                cbir::semantics_from_string(query_semantics), metric,
                query_topq, !query_include_self, query_jobs);
            json rows = json::array();
            for (const auto& e : result.entries)
                rows.push_back(json{{"volume_id", e.volume_id},
                                    {"slice_index", e.slice_index},
                                    {"score", e.score}});
            json out{{"kind", "query_result"},
                     {"query_volume", query_record->volume_id},
                     {"query_slice", query_record->slice_index},
                     {"semantics", query_semantics},
                     {"metric", query_metric},
                     {"short_of_q", result.short_of_q},
                     {"rows", std::move(rows)}};
            std::cout << out.dump(2) << "\n";
            if (!query_out.empty()) {
                cbir::write_file(query_out, out.dump(2) + "\n");
                manifest.add_output(query_out);
                manifest.write(manifest_path_for(query_out));
            }
            return 0;
        }

        if (*eval_cmd) {
            Manifest manifest;
            manifest.command = "eval";
            cbir::BenchmarkConfig cfg;
            cfg.topq = eval_topq;
            cfg.metrics = parse_metrics(eval_metrics);
            cfg.include_oracle = eval_oracle;
            cfg.include_random_baseline = !eval_no_random;
            cfg.baseline_seed = eval_baseline_seed;
            cfg.jobs = eval_jobs;
            manifest.config = {{"dataset", eval_dataset},
                               {"topq", eval_topq},
                               {"metrics", eval_metrics},
                               {"oracle", eval_oracle},
                               {"random_baseline", cfg.include_random_baseline},
                               {"baseline_seed", eval_baseline_seed},
                               {"format", eval_format},
                               {"jobs", eval_jobs}};
            bool need_binary = false;
            for (cbir::Metric m : cfg.metrics)
                if (m == cbir::Metric::Hamming) need_binary = true;
            DatasetPaths paths(eval_dataset);
            cbir::ReferenceIndex index = load_index(paths, need_binary, manifest);
            cbir::BenchmarkReport report = cbir::retrieval_benchmark(index, cfg);
            report.dataset_id = cbir::file_digest(paths.dataset);
            if (eval_format == "json")
                std::cout << cbir::report_to_json(report).dump(2) << "\n";
            else
                std::cout << cbir::report_table(report);
            if (!eval_out.empty()) {
                cbir::write_file(eval_out,
                                 cbir::report_to_json(report).dump(2) + "\n");
                manifest.add_output(eval_out);
                manifest.write(manifest_path_for(eval_out));
            }
            return 0;
        }

        if (*bench) {
            Manifest manifest;
            manifest.command = "bench";
            manifest.config = {{"codebook", bench_cb},
                               {"binary", bench_bin},
                               {"repeats", bench_repeats}};
            manifest.add_input(bench_cb);
            manifest.add_input(bench_bin);
            cbir::Codebook cb = cbir::load_codebook(bench_cb);
            cbir::BinaryCodebook bcb = cbir::load_binary_codebook(bench_bin);
            cbir::TimingResult t = cbir::timing_bench(cb, bcb, bench_repeats);
            json j = cbir::timing_to_json(t);
            std::cout << j.dump(2) << "\n";
            if (!bench_out.empty()) {
                cbir::write_file(bench_out, j.dump(2) + "\n");
                manifest.add_output(bench_out);
                manifest.write(manifest_path_for(bench_out));
            }
            return 0;
        }

        if (*stats) {
            cbir::Codebook cb = cbir::load_codebook(stats_cb);
            auto norms = cbir::norm_stats(cb);
            double comp = cbir::compactness(cb, stats_threshold);
            if (stats_format == "json") {
                json j{{"kind", "codebook_stats"},
                       {"k", cb.k},
                       {"d", cb.d},
                       {"stream", cbir::to_string(cb.stream)},
                       {"compactness", comp},
                       {"threshold", stats_threshold},
                       {"norms_desc", norms}};
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << "codebook " << stats_cb << " (k=" << cb.k
                          << ", d=" << cb.d << ", stream="
                          << cbir::to_string(cb.stream) << ")\n"
                          << "compactness@" << stats_threshold << ": " << comp
                          << "\nnorms (desc):\n";
                for (double n : norms) std::cout << "  " << n << "\n";
            }
            return 0;
        }
    } catch (const cbir::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const cbir::ContractError& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
