#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "efc/error.hpp"
#include "efc/rng.hpp"
#include "efc/table.hpp"

namespace efc {

// Fitted state for one continuous feature: max-abs scale plus quantile cut
// points in normalized space. Edges are strictly increasing; a value v maps
// to symbol 1 + #(edges < v/scale), so at most edges.size()+1 <= q symbols.
struct ContinuousFeatureState {
    double scale = 1.0;
    std::vector<double> edges;

    std::uint16_t symbol(double v) const {
        const double x = v / scale;
        const std::size_t below =
            std::lower_bound(edges.begin(), edges.end(), x) - edges.begin();
        return static_cast<std::uint16_t>(below + 1);
    }
};

// Fitted state for one symbolic feature: categories in first-appearance
// order. Category at appearance position p (1-based) gets code min(p, q);
// unseen categories map to q, so q doubles as the rare/unknown symbol.
struct SymbolicFeatureState {
    std::vector<std::string> vocab;

    std::uint16_t symbol(const std::string& v, std::uint16_t q) const {
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            if (vocab[i] == v) return static_cast<std::uint16_t>(std::min<std::size_t>(i + 1, q));
        }
        return q;
    }
};

struct PreprocessorState {
    DatasetSchema schema;
    std::uint16_t q = 0;
    // parallel to schema.features; exactly one entry active per feature
    std::vector<ContinuousFeatureState> continuous;
    std::vector<SymbolicFeatureState> symbolic;
};

// Discretized dataset, row major. Symbols are 1..q. Labels are stored as a
// sorted vocabulary plus per-row ids.
struct DiscretizedTable {
    std::size_t n_rows = 0;
    std::size_t m = 0;
    std::uint16_t q = 0;
    std::vector<std::uint16_t> symbols;  // n_rows * m
    std::vector<std::string> label_vocab;
    std::vector<std::uint32_t> label_ids;  // n_rows entries, or empty when unlabeled

    std::uint16_t at(std::size_t row, std::size_t feature) const {
        return symbols[row * m + feature];
    }
    bool has_labels() const { return !label_ids.empty(); }
    const std::string& label(std::size_t row) const { return label_vocab[label_ids[row]]; }
};

namespace detail {

// Cut points for one normalized column: the empirical q/Q quantiles by the
// nearest-rank rule (1-based rank ceil(n*q/Q)), deduplicated, with any edge
// equal to the column maximum removed so a constant column yields no edges.
inline std::vector<double> quantile_edges(std::vector<double> sorted_normalized,
                                          std::uint16_t q) {
    const std::size_t n = sorted_normalized.size();
    std::vector<double> edges;
    edges.reserve(q - 1);
    for (std::uint16_t k = 1; k < q; ++k) {
        const std::size_t rank = static_cast<std::size_t>(
            std::ceil(static_cast<double>(n) * static_cast<double>(k) / static_cast<double>(q)));
        const double e = sorted_normalized[rank - 1];
        if (edges.empty() || e > edges.back()) edges.push_back(e);
    }
    while (!edges.empty() && edges.back() >= sorted_normalized.back()) edges.pop_back();
    return edges;
}

}  // namespace detail

inline PreprocessorState fit_preprocessor(const RawFlowTable& t, std::uint16_t q) {
    if (q < 2) throw ValidationError("bin count must be at least 2, got " + std::to_string(q));
    if (t.n_rows == 0) throw ValidationError("cannot fit a preprocessor on an empty table");
    t.schema.validate();

    PreprocessorState st;
    st.schema = t.schema;
    st.q = q;
    const std::size_t m = t.schema.features.size();
    st.continuous.resize(m);
    st.symbolic.resize(m);

    for (std::size_t k = 0; k < m; ++k) {
        if (t.schema.features[k].kind == FeatureKind::continuous) {
            const auto& col = t.numeric[k];
            double max_abs = 0.0;
            for (double v : col) max_abs = std::max(max_abs, std::abs(v));
            if (max_abs == 0.0) max_abs = 1.0;
            std::vector<double> norm(col.size());
            for (std::size_t r = 0; r < col.size(); ++r) norm[r] = col[r] / max_abs;
            std::sort(norm.begin(), norm.end());
            st.continuous[k].scale = max_abs;
            st.continuous[k].edges = detail::quantile_edges(std::move(norm), q);
        } else {
            auto& vocab = st.symbolic[k].vocab;
            std::unordered_map<std::string, bool> seen;
            for (const auto& v : t.symbolic[k]) {
                if (seen.emplace(v, true).second) vocab.push_back(v);
            }
        }
    }
    return st;
}

inline DiscretizedTable transform(const PreprocessorState& st, const RawFlowTable& t) {
    if (t.schema.features != st.schema.features) {
        throw ValidationError("table schema does not match the fitted preprocessor");
    }
    DiscretizedTable out;
    out.n_rows = t.n_rows;
    out.m = st.schema.features.size();
    out.q = st.q;
    out.symbols.resize(out.n_rows * out.m);
    for (std::size_t k = 0; k < out.m; ++k) {
        if (st.schema.features[k].kind == FeatureKind::continuous) {
            const auto& col = t.numeric[k];
            const auto& fs = st.continuous[k];
            for (std::size_t r = 0; r < out.n_rows; ++r) {
                out.symbols[r * out.m + k] = fs.symbol(col[r]);
            }
        } else {
            const auto& col = t.symbolic[k];
            const auto& fs = st.symbolic[k];
            for (std::size_t r = 0; r < out.n_rows; ++r) {
                out.symbols[r * out.m + k] = fs.symbol(col[r], st.q);
            }
        }
    }
    if (t.has_labels()) {
        std::map<std::string, std::uint32_t> ids;
        for (const auto& l : t.labels) ids.emplace(l, 0);
        out.label_vocab.reserve(ids.size());
        for (auto& [label, id] : ids) {
            id = static_cast<std::uint32_t>(out.label_vocab.size());
            out.label_vocab.push_back(label);
        }
        out.label_ids.reserve(t.n_rows);
        for (const auto& l : t.labels) out.label_ids.push_back(ids.at(l));
    }
    return out;
}

inline DiscretizedTable select_rows(const DiscretizedTable& t,
                                    const std::vector<std::size_t>& rows) {
    DiscretizedTable out;
    out.n_rows = rows.size();
    out.m = t.m;
    out.q = t.q;
    out.symbols.reserve(rows.size() * t.m);
    for (std::size_t r : rows) {
        const auto* base = t.symbols.data() + r * t.m;
        out.symbols.insert(out.symbols.end(), base, base + t.m);
    }
    if (t.has_labels()) {
        out.label_vocab = t.label_vocab;
        out.label_ids.reserve(rows.size());
        for (std::size_t r : rows) out.label_ids.push_back(t.label_ids.at(r));
    }
    return out;
}

// Row indices per class, classes in vocabulary (sorted) order.
inline std::vector<std::vector<std::size_t>> rows_by_class(const DiscretizedTable& t) {
    std::vector<std::vector<std::size_t>> groups(t.label_vocab.size());
    for (std::size_t r = 0; r < t.n_rows; ++r) groups[t.label_ids[r]].push_back(r);
    return groups;
}

// Cap every class at `cap` rows, keeping a seeded uniform sample in original
// row order. Each class draws from its own label-keyed stream, so adding or
// removing a class never changes which rows survive for the others.
inline DiscretizedTable undersample(const DiscretizedTable& t, std::size_t cap,
                                    std::uint64_t seed) {
    if (cap == 0) return t;
    if (!t.has_labels()) throw ValidationError("undersample requires a labeled table");
    std::vector<std::size_t> keep;
    const auto groups = rows_by_class(t);
    for (std::size_t c = 0; c < groups.size(); ++c) {
        const auto& rows = groups[c];
        if (rows.size() <= cap) {
            keep.insert(keep.end(), rows.begin(), rows.end());
            continue;
        }
        auto gen = label_rng(seed, t.label_vocab[c]);
        for (std::size_t pos : sample_without_replacement(rows.size(), cap, gen)) {
            keep.push_back(rows[pos]);
        }
    }
    std::sort(keep.begin(), keep.end());
    return select_rows(t, keep);
}

}  // namespace efc
