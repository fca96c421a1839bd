#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace styleaug {

// Error taxonomy. The CLI maps these onto exit codes:
//   ValidationError -> 2, StageDependencyError -> 3, NumericError -> 4.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class IngestionError : public ValidationError {
public:
    explicit IngestionError(const std::string& msg) : ValidationError(msg) {}
};

class FormatError : public ValidationError {
public:
    explicit FormatError(const std::string& msg) : ValidationError(msg) {}
};

class ShapeError : public ValidationError {
public:
    explicit ShapeError(const std::string& msg) : ValidationError(msg) {}
};

class ConfigError : public ValidationError {
public:
    explicit ConfigError(const std::string& msg) : ValidationError(msg) {}
};

class StageDependencyError : public std::runtime_error {
public:
    explicit StageDependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// 64-bit FNV-1a over raw bytes. Used for parameter/image checksums and
// artifact provenance records.
inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

inline uint64_t fnv1a64(const std::vector<double>& v, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(v.data(), v.size() * sizeof(double), h);
}

inline uint64_t fnv1a64(const std::vector<uint8_t>& v, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(v.data(), v.size(), h);
}

// splitmix64 step; used to derive independent per-stage / per-item seeds
// from a master seed without correlated streams.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    return splitmix64(seed ^ splitmix64(salt));
}

inline uint64_t mix_seed(uint64_t seed, const std::string& salt) {
    return mix_seed(seed, fnv1a64(salt));
}

std::string hex64(uint64_t v);

// Runs fn(begin, end, slot) over [0, n) split into contiguous blocks, one per
// worker slot. The partition depends only on (n, workers), never on thread
// scheduling, so reductions done slot-by-slot afterwards are deterministic.
void parallel_blocks(size_t n, int workers,
                     const std::function<void(size_t, size_t, int)>& fn);

}  // namespace styleaug
