#pragma once

#include <cstdint>
#include <vector>

namespace sandbox::rng {

// SplitMix64 (Steele, Lea, Vigna). Chosen because its output sequence is
// fully specified by the algorithm, so seeded corpora are identical across
// compilers and platforms; std:: distributions do not give that guarantee.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). Plain modulo: the bias is negligible for the pool
    // sizes here and the result is bit-portable.
    std::uint64_t bounded(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

    // Uniform double in [0, 1) with 53 bits of randomness.
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    template <typename T>
    const T& pick(const std::vector<T>& pool) {
        return pool[bounded(pool.size())];
    }

    // First k positions of a Fisher-Yates shuffle of 0..n-1.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

  private:
    std::uint64_t state_;
};

inline std::vector<std::size_t> SplitMix64::sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(bounded(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace sandbox::rng
