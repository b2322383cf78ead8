#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace latentlab {

/// Deterministic RNG. All draws are built from the raw mt19937_64 stream with
/// hand-rolled transforms, so results are identical across platforms and
/// standard-library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t u64() { return eng_(); }

    /// Unbiased integer in [0, n).
    uint64_t below(uint64_t n);

    int range(int lo, int hi) { return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo))); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Box-Muller normal draw (cached spare).
    double normal(double mu = 0.0, double sigma = 1.0);

    bool coin() { return (eng_() & 1ull) != 0; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices from [0, n).
    std::vector<int> sample_indices(int n, int k);

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derive a child seed for a named stream. Per-module, per-purpose names keep
/// the streams independent of each other and of call order.
uint64_t split_seed(uint64_t root, std::string_view name);

inline Rng stream(uint64_t root, std::string_view name) { return Rng(split_seed(root, name)); }

}  // namespace latentlab
