#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace efc {

// 64-bit FNV-1a over a byte string.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// splitmix64 finalizer. Derives an independent stream seed from (seed, salt),
// so per-class streams do not shift when other classes are added or removed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull + salt;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::mt19937_64 label_rng(std::uint64_t seed, std::string_view label) {
    return std::mt19937_64(mix_seed(seed, fnv1a64(label)));
}

// Uniform integer in [0, n) by rejection; the draw sequence is pinned by the
// mt19937_64 stream alone, not by any library distribution implementation.
inline std::uint64_t bounded_uint(std::mt19937_64& gen, std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = gen();
    while (v >= limit) v = gen();
    return v % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double unit_double(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Fisher-Yates.
template <typename T>
void shuffle_inplace(std::vector<T>& v, std::mt19937_64& gen) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[bounded_uint(gen, i)]);
    }
}

// k distinct indices drawn uniformly from [0, n), returned in ascending order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           std::mt19937_64& gen) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (k > n) k = n;
    // partial Fisher-Yates: the first k slots end up a uniform sample
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + bounded_uint(gen, n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace efc
