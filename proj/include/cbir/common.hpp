#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cbir {

// Thrown when a caller violates an operation's preconditions.
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown on file read/write/parse failures.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Stream { Normal, Abnormal };

inline const char* to_string(Stream s) {
    return s == Stream::Normal ? "normal" : "abnormal";
}

inline Stream stream_from_string(const std::string& s) {
    if (s == "normal") return Stream::Normal;
    if (s == "abnormal") return Stream::Abnormal;
    throw ContractError("unknown stream: " + s);
}

// Runs fn(begin..end) partitioned over `jobs` threads. Results must be
// written to preallocated slots so the output is independent of the
// thread count.
inline void parallel_for(int begin, int end, int jobs,
                         const std::function<void(int)>& fn) {
    if (end <= begin) return;
    int n = end - begin;
    if (jobs <= 1 || n == 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
    int workers = std::min(jobs, n);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            for (int i = begin + w; i < end; i += workers) fn(i);
        });
    }
    for (auto& t : threads) t.join();
}

// FNV-1a, used for content digests and derived seeds.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s) {
    return fnv1a(s.data(), s.size());
}

// splitmix64, for deriving independent per-worker seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace cbir
