#include "latentlab/rng.hpp"

#include <cmath>

#include "latentlab/common.hpp"

namespace latentlab {

uint64_t Rng::below(uint64_t n) {
    require(n > 0, "Rng::below: n must be positive");
    if (n == 1) return 0;
    // Mask-and-reject on the smallest covering power of two.
    uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    uint64_t x;
    do {
        x = eng_() & mask;
    } while (x >= n);
    return x;
}

double Rng::normal(double mu, double sigma) {
    if (has_spare_) {
        has_spare_ = false;
        return mu + sigma * spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mu + sigma * r * std::cos(a);
}

std::vector<int> Rng::sample_indices(int n, int k) {
    require(0 <= k && k <= n, "Rng::sample_indices: k out of range");
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    shuffle(idx);
    idx.resize(static_cast<size_t>(k));
    return idx;
}

uint64_t split_seed(uint64_t root, std::string_view name) {
    uint64_t h = fnv1a64(&root, sizeof root);
    h = fnv1a64(name, h);
    // splitmix64 finalizer so nearby roots map to distant seeds
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

}  // namespace latentlab
