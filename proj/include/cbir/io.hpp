#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cbir/codebook.hpp"
#include "cbir/eval.hpp"
#include "cbir/hashing.hpp"
#include "cbir/search.hpp"

#include <json.hpp>

namespace cbir {

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// {"kind":"codebook","k":...,"d":...,"stream":...,"vectors":[[...]...]}
nlohmann::json codebook_to_json(const Codebook& cb);
Codebook codebook_from_json(const nlohmann::json& j);
void save_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

// {"kind":"binary_codebook","k":...,"e":...,"pairs":[[i,j]...],
//  "rows":["<base64 little-endian words>"...]}
nlohmann::json binary_codebook_to_json(const BinaryCodebook& bcb);
BinaryCodebook binary_codebook_from_json(const nlohmann::json& j);
void save_binary_codebook(const BinaryCodebook& bcb,
                          const std::filesystem::path& path);
BinaryCodebook load_binary_codebook(const std::filesystem::path& path);

// JSON-lines dataset, one CodeRecord per line.
nlohmann::json record_to_json(const CodeRecord& r);
CodeRecord record_from_json(const nlohmann::json& j);
void save_dataset(const std::vector<CodeRecord>& records,
                  const std::filesystem::path& path);
std::vector<CodeRecord> load_dataset(const std::filesystem::path& path);

nlohmann::json report_to_json(const BenchmarkReport& report);
nlohmann::json timing_to_json(const TimingResult& t);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

// FNV-1a digest of file contents, as fixed-width hex.
std::string file_digest(const std::filesystem::path& path);

}  // namespace cbir
