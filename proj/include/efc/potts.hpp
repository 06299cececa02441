#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "efc/error.hpp"
#include "efc/frequencies.hpp"
#include "efc/preprocess.hpp"

namespace efc {

// Percentile by the nearest-rank rule: element at 1-based rank ceil(p*n).
inline double nearest_rank(const std::vector<double>& sorted_ascending, double p) {
    if (sorted_ascending.empty()) throw ValidationError("percentile of an empty sample");
    const std::size_t n = sorted_ascending.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted_ascending[rank - 1];
}

struct EnergySummary {
    double min = 0.0;
    double median = 0.0;
    double p95 = 0.0;
    double max = 0.0;
};

// Potts model for one traffic class, in the gauge where symbol q is the
// reference state: couplings and fields involving q are identically zero.
// Couplings are stored densely over the reduced alphabet 1..q-1 as a
// d*d row-major matrix with d = m*(q-1) and index(i,a) = i*(q-1) + (a-1);
// fields keep the full m*q layout (the q column is stored as zero).
struct ClassModel {
    std::string label;
    std::size_t m = 0;
    std::uint16_t q = 0;
    std::vector<double> couplings;  // d * d
    std::vector<double> fields;     // m * q
    double threshold = 0.0;         // 95th percentile of training energies
    EnergySummary train_energy;
    double fit_seconds = 0.0;       // wall time of the fit, not persisted

    std::size_t reduced_dim() const { return m * (q - 1u); }

    double coupling(std::size_t i, std::uint16_t a, std::size_t j, std::uint16_t b) const {
        const std::size_t d = reduced_dim();
        return couplings[(i * (q - 1u) + (a - 1u)) * d + (j * (q - 1u) + (b - 1u))];
    }
    double field(std::size_t i, std::uint16_t a) const { return fields[i * q + (a - 1u)]; }
};

namespace detail {

// Blended connected correlations restricted to symbols 1..q-1:
//   C[(i,a),(j,b)] = f_ij(a,b) - f_i(a) f_j(b)
// The blend is a covariance of a strictly positive mixture distribution, so
// C is positive definite whenever alpha > 0.
inline Eigen::MatrixXd covariance_matrix(const PairFrequencies& pf) {
    const std::size_t m = pf.m;
    const std::uint16_t q = pf.q;
    const std::size_t d = m * (q - 1u);
    Eigen::MatrixXd c(d, d);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::uint16_t a = 1; a < q; ++a) {
            const std::size_t row = i * (q - 1u) + (a - 1u);
            for (std::size_t j = 0; j < m; ++j) {
                for (std::uint16_t b = 1; b < q; ++b) {
                    const std::size_t col = j * (q - 1u) + (b - 1u);
                    c(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
                        pf.at(i, a, j, b) - pf.site.at(i, a) * pf.site.at(j, b);
                }
            }
        }
    }
    return c;
}

// Invert the correlation matrix, verifying the result actually inverts it.
// One ridge retry covers near-singular input (alpha chosen too small).
inline Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& c) {
    const auto d = c.rows();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
    const double tol = 1e-6;
    auto attempt = [&](const Eigen::MatrixXd& mat) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(mat);
        Eigen::MatrixXd inv = ldlt.solve(identity);
        const double residual = (mat * inv - identity).cwiseAbs().maxCoeff();
        return std::pair<Eigen::MatrixXd, bool>(std::move(inv),
                                                ldlt.info() == Eigen::Success &&
                                                    std::isfinite(residual) && residual < tol);
    };
    if (auto [inv, ok] = attempt(c); ok) return inv;
    if (auto [inv, ok] = attempt(c + tol * identity); ok) return inv;
    throw ValidationError(
        "correlation matrix is numerically singular; increase the pseudocount weight");
}

}  // namespace detail

// Couplings of the maximum-entropy fit in the small-correlation
// approximation: e = -C^{-1} over the reduced alphabet.
inline std::vector<double> couplings_from_pairs(const PairFrequencies& pf) {
    const Eigen::MatrixXd inv = detail::checked_inverse(detail::covariance_matrix(pf));
    const std::size_t d = static_cast<std::size_t>(inv.rows());
    std::vector<double> e(d * d);
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            e[r * d + c] = -inv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
    }
    return e;
}

// Local fields consistent with the single-site marginals:
//   h_i(a) = ln(f_i(a)/f_i(q)) - sum_{j != i} sum_{b=1..q-1} e_ij(a,b) f_j(b)
// for a = 1..q-1; h_i(q) = 0 by the gauge choice.
inline std::vector<double> local_fields(const SiteFrequencies& sf,
                                        const std::vector<double>& couplings) {
    const std::size_t m = sf.m;
    const std::uint16_t q = sf.q;
    const std::size_t d = m * (q - 1u);
    std::vector<double> h(m * q, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double ref = sf.at(i, q);
        if (!(ref > 0.0)) {
            throw ValidationError("reference symbol unobserved at feature " + std::to_string(i) +
                                  "; use a pseudocount weight greater than 0");
        }
        for (std::uint16_t a = 1; a < q; ++a) {
            double v = std::log(sf.at(i, a) / ref);
            const std::size_t row = i * (q - 1u) + (a - 1u);
            for (std::size_t j = 0; j < m; ++j) {
                if (j == i) continue;
                for (std::uint16_t b = 1; b < q; ++b) {
                    v -= couplings[row * d + (j * (q - 1u) + (b - 1u))] * sf.at(j, b);
                }
            }
            h[i * q + (a - 1u)] = v;
        }
    }
    return h;
}

// Energy of one flow under a class model. Symbol q carries no couplings and
// no field, so sites at q drop out of both sums.
inline double flow_energy(const ClassModel& model, const std::uint16_t* symbols) {
    const std::size_t m = model.m;
    const std::uint16_t q = model.q;
    const std::size_t d = m * (q - 1u);
    double energy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const std::uint16_t a = symbols[i];
        if (a == q) continue;
        const std::size_t row = i * (q - 1u) + (a - 1u);
        const double* coup = model.couplings.data() + row * d;
        for (std::size_t j = i + 1; j < m; ++j) {
            const std::uint16_t b = symbols[j];
            if (b == q) continue;
            energy -= coup[j * (q - 1u) + (b - 1u)];
        }
        energy -= model.fields[i * q + (a - 1u)];
    }
    return energy;
}

inline double flow_energy(const ClassModel& model, const DiscretizedTable& t, std::size_t row) {
    if (t.m != model.m || t.q != model.q) {
        throw ValidationError("table shape does not match the model");
    }
    return flow_energy(model, t.symbols.data() + row * t.m);
}

// Fit one class: frequencies with pseudocount blend, inverse-correlation
// couplings, matching local fields, then the decision threshold at the 95th
// percentile of the training flows' own energies.
inline ClassModel fit_class(const DiscretizedTable& t, const std::vector<std::size_t>& rows,
                            double alpha, std::string label) {
    if (rows.size() < 2) {
        throw ValidationError("class '" + label + "' has " + std::to_string(rows.size()) +
                              " training flows, need at least 2");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const PairFrequencies pf = pair_freq(t, rows, alpha);
    ClassModel model;
    model.label = std::move(label);
    model.m = t.m;
    model.q = t.q;
    model.couplings = couplings_from_pairs(pf);
    model.fields = local_fields(pf.site, model.couplings);

    std::vector<double> energies;
    energies.reserve(rows.size());
    for (std::size_t r : rows) energies.push_back(flow_energy(model, t, r));
    std::sort(energies.begin(), energies.end());
    model.train_energy.min = energies.front();
    model.train_energy.median = nearest_rank(energies, 0.5);
    model.train_energy.p95 = nearest_rank(energies, 0.95);
    model.train_energy.max = energies.back();
    model.threshold = model.train_energy.p95;
    model.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return model;
}

}  // namespace efc
