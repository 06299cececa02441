#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "efc/error.hpp"
#include "efc/preprocess.hpp"

namespace efc {

// Single-site symbol frequencies with a uniform pseudocount blend:
//   f_i(a) = (1-alpha) * count_i(a)/n + alpha/q
// Symbols are 1..q; storage is m*q row major.
struct SiteFrequencies {
    std::size_t m = 0;
    std::uint16_t q = 0;
    std::vector<double> f;  // m * q

    double at(std::size_t i, std::uint16_t a) const { return f[i * q + (a - 1)]; }
};

// Pairwise symbol frequencies for distinct sites, same blend with the
// pairwise pseudocount alpha/q^2:
//   f_ij(a,b) = (1-alpha) * count_ij(a,b)/n + alpha/q^2   (i != j)
// Only the upper triangle i<j is stored (one q*q block per pair); lookups
// transpose as needed. Same-site blocks are defined by f_ii(a,b) =
// f_i(a) * [a==b] and are derived from the embedded site frequencies.
struct PairFrequencies {
    std::size_t m = 0;
    std::uint16_t q = 0;
    SiteFrequencies site;
    std::vector<double> f;  // m*(m-1)/2 blocks of q*q

    static std::size_t block_index(std::size_t i, std::size_t j, std::size_t m) {
        // upper-triangle pair (i,j), i<j, in row-by-row order
        return i * m - i * (i + 1) / 2 + (j - i - 1);
    }

    double at(std::size_t i, std::uint16_t a, std::size_t j, std::uint16_t b) const {
        if (i == j) return a == b ? site.at(i, a) : 0.0;
        if (i > j) {
            std::swap(i, j);
            std::swap(a, b);
        }
        const std::size_t block = block_index(i, j, m);
        return f[(block * q + (a - 1)) * q + (b - 1)];
    }
};

namespace detail {

inline void check_freq_args(const DiscretizedTable& t, const std::vector<std::size_t>& rows,
                            double alpha) {
    if (rows.empty()) throw ValidationError("frequency estimation needs at least one row");
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw ValidationError("pseudocount weight must lie in [0,1), got " +
                              std::to_string(alpha));
    }
    if (t.q < 2) throw ValidationError("discretized table has no alphabet");
    for (std::size_t r : rows) {
        if (r >= t.n_rows) throw ValidationError("row index out of range");
    }
}

}  // namespace detail

inline SiteFrequencies site_freq(const DiscretizedTable& t, const std::vector<std::size_t>& rows,
                                 double alpha) {
    detail::check_freq_args(t, rows, alpha);
    SiteFrequencies out;
    out.m = t.m;
    out.q = t.q;
    out.f.assign(t.m * t.q, 0.0);
    const double w = (1.0 - alpha) / static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        const std::uint16_t* sym = t.symbols.data() + r * t.m;
        for (std::size_t i = 0; i < t.m; ++i) out.f[i * t.q + (sym[i] - 1)] += w;
    }
    const double pseudo = alpha / static_cast<double>(t.q);
    for (double& v : out.f) v += pseudo;
    return out;
}

inline PairFrequencies pair_freq(const DiscretizedTable& t, const std::vector<std::size_t>& rows,
                                 double alpha) {
    detail::check_freq_args(t, rows, alpha);
    PairFrequencies out;
    out.m = t.m;
    out.q = t.q;
    out.site = site_freq(t, rows, alpha);
    const std::size_t n_blocks = t.m * (t.m - 1) / 2;
    const std::size_t qq = static_cast<std::size_t>(t.q) * t.q;
    out.f.assign(n_blocks * qq, 0.0);
    const double w = (1.0 - alpha) / static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        const std::uint16_t* sym = t.symbols.data() + r * t.m;
        std::size_t block = 0;
        for (std::size_t i = 0; i < t.m; ++i) {
            const std::size_t a0 = sym[i] - 1u;
            for (std::size_t j = i + 1; j < t.m; ++j, ++block) {
                out.f[(block * t.q + a0) * t.q + (sym[j] - 1u)] += w;
            }
        }
    }
    const double pseudo = alpha / static_cast<double>(qq);
    for (double& v : out.f) v += pseudo;
    return out;
}

}  // namespace efc
