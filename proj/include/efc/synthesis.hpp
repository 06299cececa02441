#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "efc/error.hpp"
#include "efc/preprocess.hpp"
#include "efc/rng.hpp"
#include "efc/schema.hpp"
#include "efc/table.hpp"

namespace efc {

// Correlation knob: after independent sampling, feature dst copies feature
// src's symbol with probability rho.
struct PairRule {
    std::size_t src = 0;
    std::size_t dst = 0;
    double rho = 0.0;
};

struct SyntheticClass {
    std::string label;
    std::size_t rows = 0;
    std::vector<std::vector<double>> dists;  // m distributions over symbols 1..q
};

struct SyntheticSpec {
    std::uint16_t q = 0;
    std::uint64_t seed = 0;
    std::optional<PairRule> pair_rule;
    std::vector<SyntheticClass> classes;

    std::size_t m() const { return classes.empty() ? 0 : classes.front().dists.size(); }

    void validate() const {
        if (q < 2) throw ValidationError("synthetic spec: alphabet needs q >= 2");
        if (classes.empty()) throw ValidationError("synthetic spec: no classes");
        const std::size_t m_ = m();
        if (m_ < 2) throw ValidationError("synthetic spec: need at least 2 features");
        std::unordered_set<std::string> labels;
        for (const auto& c : classes) {
            if (c.label.empty()) throw ValidationError("synthetic spec: empty class label");
            if (!labels.insert(c.label).second) {
                throw ValidationError("synthetic spec: duplicate class label '" + c.label + "'");
            }
            if (c.rows == 0) {
                throw ValidationError("synthetic spec: class '" + c.label + "' has zero rows");
            }
            if (c.dists.size() != m_) {
                throw ValidationError("synthetic spec: class '" + c.label + "' has " +
                                      std::to_string(c.dists.size()) +
                                      " feature distributions, expected " + std::to_string(m_));
            }
            for (std::size_t i = 0; i < m_; ++i) {
                const auto& d = c.dists[i];
                if (d.size() != q) {
                    throw ValidationError("synthetic spec: class '" + c.label + "' feature " +
                                          std::to_string(i) + " distribution has " +
                                          std::to_string(d.size()) + " entries, expected " +
                                          std::to_string(q));
                }
                double sum = 0.0;
                for (double p : d) {
                    if (p < 0.0) {
                        throw ValidationError("synthetic spec: negative probability in class '" +
                                              c.label + "'");
                    }
                    sum += p;
                }
                if (std::abs(sum - 1.0) > 1e-9) {
                    throw ValidationError("synthetic spec: class '" + c.label + "' feature " +
                                          std::to_string(i) + " distribution sums to " +
                                          std::to_string(sum) + ", expected 1");
                }
            }
        }
        if (pair_rule) {
            if (pair_rule->src >= m_ || pair_rule->dst >= m_ || pair_rule->src == pair_rule->dst) {
                throw ValidationError("synthetic spec: pair rule features must be distinct and "
                                      "within range");
            }
            if (pair_rule->rho < 0.0 || pair_rule->rho > 1.0) {
                throw ValidationError("synthetic spec: pair rule probability must lie in [0,1]");
            }
        }
    }
};

namespace detail {

// Symbol sampling by CDF inversion; ties on cumulative boundaries resolve to
// the earlier symbol, and the last symbol absorbs rounding slack.
inline std::uint16_t sample_symbol(const std::vector<double>& cdf, double u) {
    for (std::size_t a = 0; a < cdf.size(); ++a) {
        if (u < cdf[a]) return static_cast<std::uint16_t>(a + 1);
    }
    return static_cast<std::uint16_t>(cdf.size());
}

// Symbols for all rows of the spec, class blocks in spec order. Every class
// samples from its own label-keyed stream: features left to right, then the
// pair-rule draw.
inline std::vector<std::uint16_t> sample_symbols(const SyntheticSpec& spec) {
    const std::size_t m = spec.m();
    std::size_t total = 0;
    for (const auto& c : spec.classes) total += c.rows;
    std::vector<std::uint16_t> symbols;
    symbols.reserve(total * m);
    for (const auto& c : spec.classes) {
        std::vector<std::vector<double>> cdfs(m, std::vector<double>(spec.q));
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::uint16_t a = 0; a < spec.q; ++a) {
                acc += c.dists[i][a];
                cdfs[i][a] = acc;
            }
        }
        auto gen = label_rng(spec.seed, c.label);
        for (std::size_t r = 0; r < c.rows; ++r) {
            const std::size_t base = symbols.size();
            for (std::size_t i = 0; i < m; ++i) {
                symbols.push_back(detail::sample_symbol(cdfs[i], unit_double(gen)));
            }
            if (spec.pair_rule && unit_double(gen) < spec.pair_rule->rho) {
                symbols[base + spec.pair_rule->dst] = symbols[base + spec.pair_rule->src];
            }
        }
    }
    return symbols;
}

}  // namespace detail

// Generate an already-discretized table (symbols 1..q with labels),
// bypassing the preprocessing stage.
inline DiscretizedTable generate(const SyntheticSpec& spec) {
    spec.validate();
    DiscretizedTable t;
    t.m = spec.m();
    t.q = spec.q;
    t.symbols = detail::sample_symbols(spec);
    t.n_rows = t.symbols.size() / t.m;

    std::vector<std::string> labels;
    labels.reserve(t.n_rows);
    for (const auto& c : spec.classes) labels.insert(labels.end(), c.rows, c.label);
    std::map<std::string, std::uint32_t> idmap;
    for (const auto& c : spec.classes) idmap.emplace(c.label, 0);
    for (auto& [label, id] : idmap) {
        id = static_cast<std::uint32_t>(t.label_vocab.size());
        t.label_vocab.push_back(label);
    }
    t.label_ids.reserve(t.n_rows);
    for (const auto& l : labels) t.label_ids.push_back(idmap.at(l));
    return t;
}

// Continuous mode for end-to-end pipeline tests: the same sampled symbols
// emitted as real values (value = symbol), features named f0..f{m-1}, label
// column "label".
inline RawFlowTable generate_continuous(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t m = spec.m();
    const std::vector<std::uint16_t> symbols = detail::sample_symbols(spec);
    const std::size_t n = symbols.size() / m;

    RawFlowTable t;
    std::vector<std::pair<std::string, FeatureKind>> feats;
    for (std::size_t i = 0; i < m; ++i) {
        feats.emplace_back("f" + std::to_string(i), FeatureKind::continuous);
    }
    t.schema = detail::make_schema(std::move(feats), "label", {});
    t.n_rows = n;
    t.numeric.resize(m);
    t.symbolic.resize(m);
    for (std::size_t i = 0; i < m; ++i) t.numeric[i].reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < m; ++i) {
            t.numeric[i].push_back(static_cast<double>(symbols[r * m + i]));
        }
    }
    t.labels.reserve(n);
    for (const auto& c : spec.classes) t.labels.insert(t.labels.end(), c.rows, c.label);
    return t;
}

// Spec file format:
//   {"q": 10, "seed": 7,
//    "pair_rule": {"src": 0, "dst": 1, "rho": 0.5},          (optional)
//    "classes": [{"label": "a", "rows": 100, "dists": [[...], ...]}]}
inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
    SyntheticSpec spec;
    try {
        spec.q = j.at("q").get<std::uint16_t>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("pair_rule")) {
            const auto& p = j.at("pair_rule");
            spec.pair_rule = PairRule{p.at("src").get<std::size_t>(),
                                      p.at("dst").get<std::size_t>(), p.at("rho").get<double>()};
        }
        for (const auto& c : j.at("classes")) {
            SyntheticClass sc;
            sc.label = c.at("label").get<std::string>();
            sc.rows = c.at("rows").get<std::size_t>();
            sc.dists = c.at("dists").get<std::vector<std::vector<double>>>();
            spec.classes.push_back(std::move(sc));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synthetic spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

}  // namespace efc
