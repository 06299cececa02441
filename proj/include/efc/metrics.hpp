#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "efc/error.hpp"
#include "efc/schema.hpp"

namespace efc {

// Counts of (true class, predicted verdict). Rows are the known classes;
// columns are the known classes plus a final column for the suspicious
// verdict. Suspicious never appears as a true label.
struct ConfusionMatrix {
    std::vector<std::string> labels;    // known classes
    std::vector<std::uint64_t> counts;  // labels.size() x (labels.size()+1)

    explicit ConfusionMatrix(std::vector<std::string> known = {})
        : labels(std::move(known)), counts(labels.size() * (labels.size() + 1), 0) {}

    std::size_t suspicious_column() const { return labels.size(); }

    std::uint64_t at(std::size_t true_class, std::size_t predicted) const {
        return counts[true_class * (labels.size() + 1) + predicted];
    }

    void add(std::size_t true_class, std::size_t predicted, std::uint64_t n = 1) {
        counts[true_class * (labels.size() + 1) + predicted] += n;
    }

    std::size_t index_of(const std::string& label) const {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == label) return i;
        }
        throw ValidationError("label '" + label + "' is not a known class of this matrix");
    }

    std::uint64_t row_sum(std::size_t c) const {
        std::uint64_t s = 0;
        for (std::size_t col = 0; col <= labels.size(); ++col) s += at(c, col);
        return s;
    }

    std::uint64_t col_sum(std::size_t c) const {
        std::uint64_t s = 0;
        for (std::size_t row = 0; row < labels.size(); ++row) s += at(row, c);
        return s;
    }
};

struct ClassMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;  // true test count
    bool degenerate = false;    // zero predicted and zero true
};

// Mean and spread of one quantity across folds. The interval uses the normal
// approximation (1.96 * standard error), which is rough for small fold
// counts; reports label it as such.
struct FoldStat {
    double mean = 0.0;
    double stderr_ = 0.0;
    double ci95 = 0.0;
};

inline FoldStat fold_stat(const std::vector<double>& values) {
    FoldStat s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    for (double v : values) s.mean += v;
    s.mean /= n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    s.ci95 = 1.96 * s.stderr_;
    return s;
}

// Metrics for a single evaluation pass plus per-fold aggregates when the
// pass is one fold of several.
struct MetricsReport {
    std::vector<std::string> labels;

    // one entry per fold
    std::vector<std::vector<ClassMetrics>> per_fold;  // [fold][class]
    std::vector<ConfusionMatrix> fold_matrices;
    std::vector<double> fold_macro_f1;
    std::vector<double> fold_weighted_f1;

    // across folds, parallel to labels
    std::vector<FoldStat> precision;
    std::vector<FoldStat> recall;
    std::vector<FoldStat> f1;
    FoldStat macro_f1;
    FoldStat weighted_f1;

    std::vector<std::string> flags;  // e.g. classes too small to train
};

namespace detail {

inline double harmonic_f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

inline std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
    std::vector<ClassMetrics> out;
    out.reserve(cm.labels.size());
    for (std::size_t c = 0; c < cm.labels.size(); ++c) {
        ClassMetrics m;
        m.label = cm.labels[c];
        const std::uint64_t tp = cm.at(c, c);
        const std::uint64_t pred = cm.col_sum(c);  // suspicious has its own column
        const std::uint64_t true_n = cm.row_sum(c);
        m.support = true_n;
        m.degenerate = pred == 0 && true_n == 0;
        m.precision = pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred);
        m.recall = true_n == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(true_n);
        m.f1 = harmonic_f1(m.precision, m.recall);
        out.push_back(std::move(m));
    }
    return out;
}

inline double macro_f1_of(const std::vector<ClassMetrics>& per_class) {
    if (per_class.empty()) return 0.0;
    double s = 0.0;
    for (const auto& m : per_class) s += m.f1;
    return s / static_cast<double>(per_class.size());
}

inline double weighted_f1_of(const std::vector<ClassMetrics>& per_class) {
    std::uint64_t total = 0;
    for (const auto& m : per_class) total += m.support;
    if (total == 0) return 0.0;
    double s = 0.0;
    for (const auto& m : per_class) {
        s += m.f1 * static_cast<double>(m.support) / static_cast<double>(total);
    }
    return s;
}

}  // namespace detail

// Fold aggregation over per-fold confusion matrices sharing one label list.
inline MetricsReport aggregate_metrics(std::vector<ConfusionMatrix> fold_matrices) {
    if (fold_matrices.empty()) throw ValidationError("no confusion matrices to aggregate");
    MetricsReport rep;
    rep.labels = fold_matrices.front().labels;
    for (const auto& cm : fold_matrices) {
        if (cm.labels != rep.labels) {
            throw ValidationError("fold confusion matrices disagree on class labels");
        }
        auto per_class = detail::per_class_metrics(cm);
        rep.fold_macro_f1.push_back(detail::macro_f1_of(per_class));
        rep.fold_weighted_f1.push_back(detail::weighted_f1_of(per_class));
        rep.per_fold.push_back(std::move(per_class));
    }
    rep.fold_matrices = std::move(fold_matrices);

    const std::size_t k = rep.per_fold.size();
    std::vector<double> buf(k);
    for (std::size_t c = 0; c < rep.labels.size(); ++c) {
        for (std::size_t f = 0; f < k; ++f) buf[f] = rep.per_fold[f][c].precision;
        rep.precision.push_back(fold_stat(buf));
        for (std::size_t f = 0; f < k; ++f) buf[f] = rep.per_fold[f][c].recall;
        rep.recall.push_back(fold_stat(buf));
        for (std::size_t f = 0; f < k; ++f) buf[f] = rep.per_fold[f][c].f1;
        rep.f1.push_back(fold_stat(buf));
    }
    rep.macro_f1 = fold_stat(rep.fold_macro_f1);
    rep.weighted_f1 = fold_stat(rep.fold_weighted_f1);
    return rep;
}

// Metrics of a single confusion matrix (one-fold report, zero spread).
inline MetricsReport compute_metrics(ConfusionMatrix cm) {
    return aggregate_metrics({std::move(cm)});
}

}  // namespace efc
