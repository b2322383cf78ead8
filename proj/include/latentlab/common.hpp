#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace latentlab {

inline constexpr const char* kVersion = "0.1.0";

// Violated precondition or API misuse.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf or other numeric-domain failure.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Degenerate or malformed data (single-class labels, bad files, ...).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Generator cannot satisfy the requested size within its vocabulary.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training loss went non-finite.
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

inline std::string hash_hex(uint64_t h) {
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace latentlab
